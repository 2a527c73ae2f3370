#include "greendrl/kernels.hpp"

#include <cmath>

#include "greendrl/error.hpp"

namespace greendrl::kernels {

namespace {

void check_affine(std::span<const double> w, std::size_t rows, std::size_t cols,
                  std::span<const double> x, std::span<const double> b, std::span<double> y) {
  if (w.size() != rows * cols || x.size() != cols || y.size() != rows || (!b.empty() && b.size() != rows))
    throw InvalidInput("affine kernel: shape mismatch");
}

void check_transposed(std::span<const double> w, std::size_t rows, std::size_t cols,
                      std::span<const double> d, std::span<double> y) {
  if (w.size() != rows * cols || d.size() != rows || y.size() != cols)
    throw InvalidInput("transposed mat-vec kernel: shape mismatch");
}

std::size_t check_mixing(std::span<const double> coords, std::size_t dim, double length_scale,
                         std::span<double> out) {
  if (dim == 0 || coords.size() % dim != 0) throw InvalidInput("mixing kernel: bad coordinate layout");
  if (!(length_scale > 0.0)) throw ConfigError("kernel length scale must be positive");
  const std::size_t n = coords.size() / dim;
  if (out.size() != n * n) throw InvalidInput("mixing kernel: output must be n x n");
  return n;
}

inline double affine_row(const double* wr, std::size_t cols, const double* x, double init) {
  double acc = init;
  for (std::size_t j = 0; j < cols; ++j) acc += wr[j] * x[j];
  return acc;
}

inline double transposed_col(const double* w, std::size_t rows, std::size_t cols, std::size_t j,
                             const double* d) {
  double acc = 0.0;
  for (std::size_t i = 0; i < rows; ++i) acc += w[i * cols + j] * d[i];
  return acc;
}

inline double mixing_entry(const double* coords, std::size_t dim, std::size_t i, std::size_t j,
                           double amplitude, double inv_two_l2, double cell_measure) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double diff = coords[i * dim + k] - coords[j * dim + k];
    d2 += diff * diff;
  }
  return amplitude * std::exp(-d2 * inv_two_l2) * cell_measure;
}

}  // namespace

void affine_serial(std::span<const double> w, std::size_t rows, std::size_t cols,
                   std::span<const double> x, std::span<const double> b, std::span<double> y) {
  check_affine(w, rows, cols, x, b, y);
  for (std::size_t i = 0; i < rows; ++i)
    y[i] = affine_row(w.data() + i * cols, cols, x.data(), b.empty() ? 0.0 : b[i]);
}

void affine_omp(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> x, std::span<const double> b, std::span<double> y) {
  check_affine(w, rows, cols, x, b, y);
  const auto n = static_cast<long>(rows);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    y[r] = affine_row(w.data() + r * cols, cols, x.data(), b.empty() ? 0.0 : b[r]);
  }
}

void affine(std::span<const double> w, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<const double> b, std::span<double> y) {
  if (rows * cols >= kParallelThreshold)
    affine_omp(w, rows, cols, x, b, y);
  else
    affine_serial(w, rows, cols, x, b, y);
}

void matvec_transposed_serial(std::span<const double> w, std::size_t rows, std::size_t cols,
                              std::span<const double> d, std::span<double> y) {
  check_transposed(w, rows, cols, d, y);
  for (std::size_t j = 0; j < cols; ++j) y[j] = transposed_col(w.data(), rows, cols, j, d.data());
}

void matvec_transposed_omp(std::span<const double> w, std::size_t rows, std::size_t cols,
                           std::span<const double> d, std::span<double> y) {
  check_transposed(w, rows, cols, d, y);
  const auto n = static_cast<long>(cols);
#pragma omp parallel for schedule(static)
  for (long j = 0; j < n; ++j)
    y[static_cast<std::size_t>(j)] = transposed_col(w.data(), rows, cols, static_cast<std::size_t>(j), d.data());
}

void matvec_transposed(std::span<const double> w, std::size_t rows, std::size_t cols,
                       std::span<const double> d, std::span<double> y) {
  if (rows * cols >= kParallelThreshold)
    matvec_transposed_omp(w, rows, cols, d, y);
  else
    matvec_transposed_serial(w, rows, cols, d, y);
}

void gaussian_mixing_serial(std::span<const double> coords, std::size_t dim, double amplitude,
                            double length_scale, double cell_measure, std::span<double> out) {
  const std::size_t n = check_mixing(coords, dim, length_scale, out);
  const double inv = 1.0 / (2.0 * length_scale * length_scale);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out[i * n + j] = mixing_entry(coords.data(), dim, i, j, amplitude, inv, cell_measure);
}

void gaussian_mixing_omp(std::span<const double> coords, std::size_t dim, double amplitude,
                         double length_scale, double cell_measure, std::span<double> out) {
  const std::size_t n = check_mixing(coords, dim, length_scale, out);
  const double inv = 1.0 / (2.0 * length_scale * length_scale);
  const auto rows = static_cast<long>(n);
#pragma omp parallel for schedule(static)
  for (long ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = 0; j < n; ++j)
      out[i * n + j] = mixing_entry(coords.data(), dim, i, j, amplitude, inv, cell_measure);
  }
}

void gaussian_mixing(std::span<const double> coords, std::size_t dim, double amplitude,
                     double length_scale, double cell_measure, std::span<double> out) {
  if (out.size() >= kParallelThreshold)
    gaussian_mixing_omp(coords, dim, amplitude, length_scale, cell_measure, out);
  else
    gaussian_mixing_serial(coords, dim, amplitude, length_scale, cell_measure, out);
}

}  // namespace greendrl::kernels
