#include <doctest.h>

#include <cmath>
#include <vector>

#include "greendrl/error.hpp"
#include "greendrl/kernels.hpp"
#include "greendrl/rng.hpp"

using namespace greendrl;
namespace k = greendrl::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = uniform01(rng) * 2.0 - 1.0;
  return v;
}

}  // namespace

TEST_CASE("affine: serial reference against hand computation") {
  const std::vector<double> w{1, 2, 3, 4, 5, 6};  // 2 x 3
  const std::vector<double> x{1, 0, -1};
  const std::vector<double> b{0.5, -0.5};
  std::vector<double> y(2);
  k::affine_serial(w, 2, 3, x, b, y);
  CHECK(y[0] == 1 - 3 + 0.5);
  CHECK(y[1] == 4 - 6 - 0.5);
  k::affine_serial(w, 2, 3, x, {}, y);
  CHECK(y[0] == -2);
}

TEST_CASE("omp variants are bit-identical to the serial references") {
  Rng rng(5);
  for (std::size_t n : {3u, 64u, 257u, 300u}) {
    const std::size_t m = n + 7;
    const auto w = random_vec(n * m, rng), x = random_vec(m, rng), b = random_vec(n, rng), d = random_vec(n, rng);
    std::vector<double> y1(n), y2(n), y3(n);
    k::affine_serial(w, n, m, x, b, y1);
    k::affine_omp(w, n, m, x, b, y2);
    k::affine(w, n, m, x, b, y3);
    CHECK(y1 == y2);
    CHECK(y1 == y3);

    std::vector<double> t1(m), t2(m), t3(m);
    k::matvec_transposed_serial(w, n, m, d, t1);
    k::matvec_transposed_omp(w, n, m, d, t2);
    k::matvec_transposed(w, n, m, d, t3);
    CHECK(t1 == t2);
    CHECK(t1 == t3);

    const auto coords = random_vec(2 * n, rng);
    std::vector<double> g1(n * n), g2(n * n), g3(n * n);
    k::gaussian_mixing_serial(coords, 2, 0.7, 1.3, 0.25, g1);
    k::gaussian_mixing_omp(coords, 2, 0.7, 1.3, 0.25, g2);
    k::gaussian_mixing(coords, 2, 0.7, 1.3, 0.25, g3);
    CHECK(g1 == g2);
    CHECK(g1 == g3);
  }
}

TEST_CASE("matvec_transposed matches the explicit transpose") {
  Rng rng(8);
  const std::size_t r = 5, c = 4;
  const auto w = random_vec(r * c, rng), d = random_vec(r, rng);
  std::vector<double> y(c);
  k::matvec_transposed_serial(w, r, c, d, y);
  for (std::size_t j = 0; j < c; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < r; ++i) s += w[i * c + j] * d[i];
    CHECK(y[j] == doctest::Approx(s).epsilon(1e-14));
  }
}

TEST_CASE("gaussian mixing entries") {
  const std::vector<double> coords{0.0, 1.0, 3.0};
  std::vector<double> m(9);
  k::gaussian_mixing_serial(coords, 1, 2.0, 1.5, 0.5, m);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      const double d = coords[i] - coords[j];
      CHECK(m[i * 3 + j] == doctest::Approx(2.0 * std::exp(-d * d / (2 * 1.5 * 1.5)) * 0.5).epsilon(1e-15));
      CHECK(m[i * 3 + j] == m[j * 3 + i]);
    }
}

TEST_CASE("kernel shape errors") {
  std::vector<double> w(6), x(2), y(2);
  CHECK_THROWS_AS(k::affine_serial(w, 2, 3, x, {}, y), InvalidInput);
  std::vector<double> coords(3), out(4);
  CHECK_THROWS_AS(k::gaussian_mixing_serial(coords, 1, 1.0, 1.0, 1.0, out), InvalidInput);
}
