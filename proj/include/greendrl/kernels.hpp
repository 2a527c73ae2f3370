#pragma once

#include <cstddef>
#include <span>

// Row-parallel numeric kernels. Every `_omp` variant partitions output
// elements across threads and keeps each element's reduction order equal to
// the `_serial` reference, so both return bit-identical results.
namespace greendrl::kernels {

// Work size (rows * cols) below which the dispatching entry points stay serial.
inline constexpr std::size_t kParallelThreshold = std::size_t{1} << 15;

// y = W x + b, W row-major rows x cols. `b` may be empty.
void affine_serial(std::span<const double> w, std::size_t rows, std::size_t cols,
                   std::span<const double> x, std::span<const double> b, std::span<double> y);
void affine_omp(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> x, std::span<const double> b, std::span<double> y);
void affine(std::span<const double> w, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<const double> b, std::span<double> y);

// y = W^T d, W row-major rows x cols, y has length cols.
void matvec_transposed_serial(std::span<const double> w, std::size_t rows, std::size_t cols,
                              std::span<const double> d, std::span<double> y);
void matvec_transposed_omp(std::span<const double> w, std::size_t rows, std::size_t cols,
                           std::span<const double> d, std::span<double> y);
void matvec_transposed(std::span<const double> w, std::size_t rows, std::size_t cols,
                       std::span<const double> d, std::span<double> y);

// M_ij = amplitude * exp(-|s_i - s_j|^2 / (2 l^2)) * cell_measure over n sites
// with `dim` coordinates each (coords row-major n x dim).
void gaussian_mixing_serial(std::span<const double> coords, std::size_t dim, double amplitude,
                            double length_scale, double cell_measure, std::span<double> out);
void gaussian_mixing_omp(std::span<const double> coords, std::size_t dim, double amplitude,
                         double length_scale, double cell_measure, std::span<double> out);
void gaussian_mixing(std::span<const double> coords, std::size_t dim, double amplitude,
                     double length_scale, double cell_measure, std::span<double> out);

}  // namespace greendrl::kernels
