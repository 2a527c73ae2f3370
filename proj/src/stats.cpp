#include "greendrl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "greendrl/error.hpp"

namespace greendrl::stats {

double mean(std::span<const double> x) {
  if (x.empty()) throw InvalidInput("mean of an empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_stddev(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double median(std::span<const double> x) {
  if (x.empty()) throw InvalidInput("median of an empty sample");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  return n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

double ci_half_width(std::span<const double> x, double level) {
  if (x.size() < 2) return 0.0;
  boost::math::students_t dist(static_cast<double>(x.size() - 1));
  const double q = boost::math::quantile(dist, 0.5 + level / 2.0);
  return q * sample_stddev(x) / std::sqrt(static_cast<double>(x.size()));
}

PairedTest paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw InvalidInput("paired test needs two equal samples of size >= 2");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  PairedTest r;
  r.mean_difference = mean(d);
  r.df = static_cast<double>(d.size() - 1);
  const double se = sample_stddev(d) / std::sqrt(static_cast<double>(d.size()));
  if (se == 0.0) {
    if (r.mean_difference == 0.0) return r;
    r.t = r.mean_difference > 0.0 ? INFINITY : -INFINITY;
    r.p_two_sided = 0.0;
    r.p_greater = r.mean_difference > 0.0 ? 0.0 : 1.0;
    return r;
  }
  r.t = r.mean_difference / se;
  boost::math::students_t dist(r.df);
  r.p_greater = boost::math::cdf(boost::math::complement(dist, r.t));
  r.p_two_sided = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

}  // namespace greendrl::stats
