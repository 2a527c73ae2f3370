#pragma once

#include <span>

namespace greendrl::stats {

double mean(std::span<const double> x);
double sample_stddev(std::span<const double> x);
double median(std::span<const double> x);

// Half-width of the two-sided t confidence interval for the mean.
double ci_half_width(std::span<const double> x, double level = 0.95);

struct PairedTest {
  double mean_difference = 0.0;  // mean(a - b)
  double t = 0.0;
  double df = 0.0;
  double p_two_sided = 1.0;
  double p_greater = 0.5;  // H1: mean(a - b) > 0
};

PairedTest paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace greendrl::stats
