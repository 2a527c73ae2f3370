#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "greendrl/dense_net.hpp"
#include "greendrl/rng.hpp"

// Spatially correlated traffic: a latent field evolved by a discretized
// integro-difference equation drives Poisson arrival intensities per site;
// traffic correlation then gates parameter sharing between co-learning agents.
namespace greendrl::spatial {

struct SpatialField {
  std::vector<double> coords;  // sites x dim, row-major
  std::size_t dim = 1;
  std::vector<double> z;
  double cell_measure = 1.0;   // dx for the rectangle-rule quadrature

  std::size_t sites() const noexcept { return z.size(); }
  std::span<const double> site(std::size_t i) const { return {coords.data() + i * dim, dim}; }
  void check() const;

  static SpatialField grid_1d(std::size_t n, double spacing);
  static SpatialField grid_2d(std::size_t nx, std::size_t ny, double spacing);
};

// k(s, r) = amplitude * exp(-|s - r|^2 / (2 length_scale^2))
struct Kernel {
  double amplitude = 1.0;
  double length_scale = 1.0;

  double operator()(std::span<const double> s, std::span<const double> r) const;
};

enum class Distortion { Identity, Squash };

double distort(Distortion f, double z);

struct FieldNoise {
  double sigma = 0.0;
};

// Quadrature matrix M_ij = k(s_i, s_j) * dx.
std::vector<double> mixing_matrix(const SpatialField& field, const Kernel& kernel);

SpatialField side_step(const SpatialField& field, const Kernel& kernel, Distortion f, const FieldNoise& noise, Rng& rng);

// Same step with a precomputed (sites x sites) quadrature matrix.
SpatialField side_step(const SpatialField& field, std::span<const double> mixing, Distortion f,
                       const FieldNoise& noise, Rng& rng);

struct TrafficIntensity {
  double base_rate = 1.0;
  std::vector<double> rates;  // base_rate * exp(z)

  static TrafficIntensity from_field(const SpatialField& field, double base_rate);
};

// Independent Poisson draw per site.
std::vector<int> sample_traffic(const TrafficIntensity& intensity, Rng& rng);

struct CorrelationMatrix {
  std::size_t n = 0;
  std::vector<double> values;           // row-major n x n
  std::vector<bool> zero_variance;      // flagged sites, correlations set to 0

  double at(std::size_t i, std::size_t j) const { return values.at(i * n + j); }
};

// Pearson correlation per pair of equal-length series (length >= 2).
CorrelationMatrix estimate_correlation(const std::vector<std::vector<double>>& histories);

struct KernelFit {
  Kernel kernel;
  double residual = 0.0;  // sum of squared errors over pairs
  bool degenerate = false;
};

// Least-squares fit of amplitude and length scale to max(c_ij, 0) over site pairs.
KernelFit fit_kernel(const CorrelationMatrix& corr, std::span<const double> coords, std::size_t dim);

// Convex mixing weights for agent i: self (1 - beta) + beta / (1 + Z_i), neighbour j
// beta * max(c_ij, 0) / (1 + Z_i), with Z_i the clipped neighbour correlation mass.
std::vector<double> mixing_weights(const CorrelationMatrix& corr, std::size_t i, double beta);

std::vector<DenseNet> transfer_weights(std::span<const DenseNet> nets, const CorrelationMatrix& corr, double beta);

void write_field_csv_header(std::ostream& os);
void write_field_csv(std::ostream& os, std::uint64_t step, const SpatialField& field,
                     std::span<const int> traffic = {});
std::string kernel_fit_json(const KernelFit& fit);

}  // namespace greendrl::spatial
