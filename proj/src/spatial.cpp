#include "greendrl/spatial.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "greendrl/error.hpp"
#include "greendrl/kernels.hpp"

namespace greendrl::spatial {

void SpatialField::check() const {
  if (z.empty()) throw InvalidInput("spatial field needs at least one site");
  if (dim == 0 || coords.size() != z.size() * dim) throw InvalidInput("field coordinates do not match its sites");
  if (!(cell_measure > 0.0)) throw InvalidInput("cell measure must be positive");
  for (double v : z)
    if (!std::isfinite(v)) throw InvalidInput("field value is not finite");
}

SpatialField SpatialField::grid_1d(std::size_t n, double spacing) {
  SpatialField f;
  f.dim = 1;
  for (std::size_t i = 0; i < n; ++i) f.coords.push_back(static_cast<double>(i) * spacing);
  f.z.assign(n, 0.0);
  f.cell_measure = spacing;
  return f;
}

SpatialField SpatialField::grid_2d(std::size_t nx, std::size_t ny, double spacing) {
  SpatialField f;
  f.dim = 2;
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      f.coords.push_back(static_cast<double>(i) * spacing);
      f.coords.push_back(static_cast<double>(j) * spacing);
    }
  f.z.assign(nx * ny, 0.0);
  f.cell_measure = spacing * spacing;
  return f;
}

double Kernel::operator()(std::span<const double> s, std::span<const double> r) const {
  double d2 = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) d2 += (s[k] - r[k]) * (s[k] - r[k]);
  return amplitude * std::exp(-d2 / (2.0 * length_scale * length_scale));
}

double distort(Distortion f, double z) { return f == Distortion::Identity ? z : std::tanh(z); }

std::vector<double> mixing_matrix(const SpatialField& field, const Kernel& kernel) {
  field.check();
  std::vector<double> m(field.sites() * field.sites());
  kernels::gaussian_mixing(field.coords, field.dim, kernel.amplitude, kernel.length_scale, field.cell_measure, m);
  return m;
}

SpatialField side_step(const SpatialField& field, const Kernel& kernel, Distortion f, const FieldNoise& noise, Rng& rng) {
  if (!(kernel.length_scale > 0.0)) throw ConfigError("kernel length scale must be positive");
  return side_step(field, mixing_matrix(field, kernel), f, noise, rng);
}

SpatialField side_step(const SpatialField& field, std::span<const double> mixing, Distortion f,
                       const FieldNoise& noise, Rng& rng) {
  field.check();
  const std::size_t n = field.sites();
  if (mixing.size() != n * n) throw InvalidInput("mixing matrix does not match the field");
  if (!(noise.sigma >= 0.0) || !std::isfinite(noise.sigma)) throw ConfigError("noise sigma must be finite and >= 0");
  std::vector<double> fz(n);
  for (std::size_t i = 0; i < n; ++i) fz[i] = distort(f, field.z[i]);
  SpatialField next = field;
  kernels::affine(mixing, n, n, fz, {}, next.z);
  if (noise.sigma > 0.0) {
    std::normal_distribution<double> gauss(0.0, noise.sigma);
    for (double& v : next.z) v += gauss(rng);
  }
  return next;
}

TrafficIntensity TrafficIntensity::from_field(const SpatialField& field, double base_rate) {
  if (!(base_rate > 0.0) || !std::isfinite(base_rate)) throw ConfigError("base rate must be positive");
  TrafficIntensity t;
  t.base_rate = base_rate;
  t.rates.reserve(field.sites());
  for (double z : field.z) t.rates.push_back(base_rate * std::exp(z));
  return t;
}

std::vector<int> sample_traffic(const TrafficIntensity& intensity, Rng& rng) {
  std::vector<int> counts(intensity.rates.size(), 0);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double rate = intensity.rates[i];
    if (!std::isfinite(rate) || rate < 0.0) throw InvalidInput("traffic rate must be finite and >= 0");
    if (rate > 0.0) counts[i] = std::poisson_distribution<int>(rate)(rng);
  }
  return counts;
}

CorrelationMatrix estimate_correlation(const std::vector<std::vector<double>>& histories) {
  const std::size_t n = histories.size();
  if (n == 0) throw InvalidInput("no traffic histories");
  const std::size_t len = histories.front().size();
  if (len < 2) throw InvalidInput("correlation needs series of length >= 2");
  for (const auto& h : histories)
    if (h.size() != len) throw InvalidInput("traffic histories differ in length");

  std::vector<std::vector<double>> centered(n, std::vector<double>(len));
  std::vector<double> norm(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (double v : histories[i]) mean += v;
    mean /= static_cast<double>(len);
    for (std::size_t t = 0; t < len; ++t) {
      centered[i][t] = histories[i][t] - mean;
      norm[i] += centered[i][t] * centered[i][t];
    }
    norm[i] = std::sqrt(norm[i]);
  }

  CorrelationMatrix c;
  c.n = n;
  c.values.assign(n * n, 0.0);
  c.zero_variance.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) c.zero_variance[i] = !(norm[i] > 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    c.values[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double r = 0.0;
      if (!c.zero_variance[i] && !c.zero_variance[j]) {
        double dot = 0.0;
        for (std::size_t t = 0; t < len; ++t) dot += centered[i][t] * centered[j][t];
        r = std::clamp(dot / (norm[i] * norm[j]), -1.0, 1.0);
      }
      c.values[i * n + j] = c.values[j * n + i] = r;
    }
  }
  return c;
}

namespace {

struct PairData {
  std::vector<double> d2;
  std::vector<double> y;
};

// Optimal amplitude and SSE for a fixed length scale.
std::pair<double, double> fit_at(const PairData& p, double length_scale) {
  double gy = 0.0, gg = 0.0, yy = 0.0;
  for (std::size_t k = 0; k < p.y.size(); ++k) {
    const double g = std::exp(-p.d2[k] / (2.0 * length_scale * length_scale));
    gy += g * p.y[k];
    gg += g * g;
    yy += p.y[k] * p.y[k];
  }
  if (!(gg > 0.0)) return {0.0, yy};
  const double a = gy / gg;
  return {a, std::max(0.0, yy - gy * a)};
}

}  // namespace

KernelFit fit_kernel(const CorrelationMatrix& corr, std::span<const double> coords, std::size_t dim) {
  const std::size_t n = corr.n;
  if (n < 2) throw InvalidInput("kernel fitting needs at least two sites");
  if (dim == 0 || coords.size() != n * dim) throw InvalidInput("site coordinates do not match the correlation matrix");

  PairData p;
  double min_d = INFINITY, max_d = 0.0;
  bool any_positive = false;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = coords[i * dim + k] - coords[j * dim + k];
        d2 += diff * diff;
      }
      const double d = std::sqrt(d2);
      if (d > 0.0) min_d = std::min(min_d, d);
      max_d = std::max(max_d, d);
      const double y = std::max(corr.at(i, j), 0.0);
      any_positive = any_positive || y > 0.0;
      p.d2.push_back(d2);
      p.y.push_back(y);
    }

  const double l_min = std::isfinite(min_d) ? min_d / 10.0 : 1e-3;
  const double l_max = max_d > 0.0 ? max_d * 10.0 : 1.0;
  KernelFit fit;
  if (!any_positive) {
    fit.kernel = Kernel{1.0, l_min};
    fit.residual = 0.0;
    fit.degenerate = true;
    return fit;
  }

  // Coarse log-spaced scan, then golden-section refinement around the best cell.
  constexpr int kScan = 200;
  const double lo = std::log(l_min), hi = std::log(l_max);
  auto sse = [&](double log_l) { return fit_at(p, std::exp(log_l)).second; };
  int best = 0;
  double best_v = INFINITY;
  for (int k = 0; k <= kScan; ++k) {
    const double v = sse(lo + (hi - lo) * k / kScan);
    if (v < best_v) {
      best_v = v;
      best = k;
    }
  }
  double a = lo + (hi - lo) * std::max(0, best - 1) / kScan;
  double b = lo + (hi - lo) * std::min(kScan, best + 1) / kScan;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = sse(x1), f2 = sse(x2);
  for (int it = 0; it < 200 && (b - a) > 1e-12; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = sse(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = sse(x2);
    }
  }
  const double l = std::exp(0.5 * (a + b));
  const auto [amp, res] = fit_at(p, l);
  fit.kernel = Kernel{amp, l};
  fit.residual = res;
  return fit;
}

std::vector<double> mixing_weights(const CorrelationMatrix& corr, std::size_t i, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidInput("transfer beta must lie in [0, 1]");
  if (i >= corr.n) throw InvalidInput("agent index outside the correlation matrix");
  double mass = 0.0;
  for (std::size_t j = 0; j < corr.n; ++j)
    if (j != i) mass += std::max(corr.at(i, j), 0.0);
  std::vector<double> w(corr.n, 0.0);
  for (std::size_t j = 0; j < corr.n; ++j)
    if (j != i) w[j] = beta * std::max(corr.at(i, j), 0.0) / (1.0 + mass);
  w[i] = (1.0 - beta) + beta / (1.0 + mass);
  return w;
}

std::vector<DenseNet> transfer_weights(std::span<const DenseNet> nets, const CorrelationMatrix& corr, double beta) {
  if (nets.size() != corr.n) throw InvalidInput("one network per correlation row is required");
  for (const auto& net : nets)
    if (net.layer_dims() != nets.front().layer_dims()) throw InvalidInput("transfer requires identical architectures");
  std::vector<DenseNet> out(nets.begin(), nets.end());
  for (std::size_t i = 0; i < nets.size(); ++i) {
    const auto w = mixing_weights(corr, i, beta);
    // theta_i + sum_j w_ij (theta_j - theta_i): identical inputs stay bit-identical.
    for (std::size_t l = 0; l < nets[i].num_layers(); ++l) {
      auto dw = out[i].weights(l);
      auto db = out[i].biases(l);
      for (std::size_t j = 0; j < nets.size(); ++j) {
        if (j == i || w[j] == 0.0) continue;
        const auto sw = nets[j].weights(l);
        const auto sb = nets[j].biases(l);
        const auto ow = nets[i].weights(l);
        const auto ob = nets[i].biases(l);
        for (std::size_t k = 0; k < dw.size(); ++k) dw[k] += w[j] * (sw[k] - ow[k]);
        for (std::size_t k = 0; k < db.size(); ++k) db[k] += w[j] * (sb[k] - ob[k]);
      }
    }
    out[i].apply_mask();
    if (beta > 0.0) out[i].quant.reset();
  }
  return out;
}

void write_field_csv_header(std::ostream& os) { os << "step,site,coord0,coord1,z,traffic\n"; }

void write_field_csv(std::ostream& os, std::uint64_t step, const SpatialField& field, std::span<const int> traffic) {
  for (std::size_t i = 0; i < field.sites(); ++i) {
    os << step << ',' << i << ',' << field.coords[i * field.dim] << ','
       << (field.dim > 1 ? field.coords[i * field.dim + 1] : 0.0) << ',' << field.z[i] << ',';
    if (i < traffic.size()) os << traffic[i];
    os << '\n';
  }
}

std::string kernel_fit_json(const KernelFit& fit) {
  nlohmann::ordered_json j{{"form", "gaussian"},
                           {"amplitude", fit.kernel.amplitude},
                           {"length_scale", fit.kernel.length_scale},
                           {"residual", fit.residual},
                           {"degenerate", fit.degenerate}};
  return j.dump(2);
}

}  // namespace greendrl::spatial
