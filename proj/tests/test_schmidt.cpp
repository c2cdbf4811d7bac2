#include <doctest.h>

#include <cmath>
#include <numbers>

#include "jsaphase/jsa.hpp"
#include "jsaphase/schmidt.hpp"

using namespace jsaphase;

namespace {

// Purity of exp(-ws^2/2 - wi^2/2 + i beta ws wi) by brute-force quadrature of
// int |rho|^2 / N^2, with rho(w, w') = int psi(w, x) psi*(w', x) dx evaluated
// in closed form over x.
double gaussian_integral_purity(double beta) {
  const int n = 801;
  const double h = 16.0 / (n - 1);
  double num = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double w = -8.0 + i * h, v = -8.0 + j * h;
      const double rho = std::sqrt(std::numbers::pi) * std::exp(-0.5 * (w * w + v * v)) *
                         std::exp(-0.25 * beta * beta * (w - v) * (w - v));
      num += rho * rho * h * h;
    }
  const double norm = std::numbers::pi;
  return num / (norm * norm);
}

FrequencyGrid wide_grid(std::size_t n) { return make_grid(1554.0, 1554.0, 16.0, n); }

}  // namespace

TEST_SUITE("schmidt") {

TEST_CASE("separable JSA has one mode") {
  const auto d = schmidt_decompose(build_chirped_factorable_jsa(1.0, 0.7, 0.0, wide_grid(96)));
  CHECK(d.xi.at(0) == doctest::Approx(1.0).epsilon(1e-6));
  for (std::size_t j = 1; j < d.xi.size(); ++j) CHECK(d.xi[j] < 1e-6);
  CHECK(purity(d) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("Gaussian-integral oracle") {
  CHECK(gaussian_integral_purity(0.0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(gaussian_integral_purity(1.0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
}

TEST_CASE("chirped Gaussian purity matches the oracle") {
  for (double beta : {0.5, 1.0, 2.0}) {
    CAPTURE(beta);
    const double oracle = gaussian_integral_purity(beta);
    const auto jsa = build_chirped_factorable_jsa(1.0, 1.0, beta, wide_grid(256));
    CHECK(purity(schmidt_decompose(jsa)) == doctest::Approx(oracle).epsilon(1e-6));
  }
  const auto jsa = build_chirped_factorable_jsa(1.0, 1.0, 1.0, wide_grid(256));
  CHECK(purity(schmidt_decompose(jsa)) == doctest::Approx(0.7071).epsilon(1e-4));
}

TEST_CASE("chirped Gaussian coefficients are geometric") {
  // purity (1 - q) / (1 + q) for lambda_j proportional to q^j gives xi ratio sqrt(q).
  const double p = 1.0 / std::sqrt(2.0);
  const double ratio = std::sqrt((1.0 - p) / (1.0 + p));
  for (std::size_t n : {128, 256}) {
    CAPTURE(n);
    const auto d = schmidt_decompose(build_chirped_factorable_jsa(1.0, 1.0, 1.0, wide_grid(n)));
    for (std::size_t j = 0; j + 1 < 6; ++j) CHECK(d.xi[j + 1] / d.xi[j] == doctest::Approx(ratio).epsilon(1e-4));
  }
}

TEST_CASE("disjoint blocks give their weights") {
  const FrequencyGrid g = make_grid(1554.0, 1554.0, 7.0, 8);
  const double h = g.signal.step();
  ComplexMatrix m = ComplexMatrix::Zero(8, 8);
  // Block 1 on rows/cols 0..3, block 2 on 4..7; unit vectors under the step-weighted product.
  const double u = 1.0 / std::sqrt(4.0 * h);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      m(a, b) = 0.8 * u * u;
      m(a + 4, b + 4) = 0.6 * u * u * (b % 2 ? -1.0 : 1.0);
    }
  const auto d = schmidt_decompose(JointSpectralAmplitude(g, m));
  CHECK(d.xi.at(0) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(d.xi.at(1) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(d.xi.at(2) < 1e-12);
  CHECK(purity(d) == doctest::Approx(0.8 * 0.8 * 0.8 * 0.8 + 0.6 * 0.6 * 0.6 * 0.6).epsilon(1e-12));
}

TEST_CASE("purity of coefficient lists") {
  CHECK(purity(std::vector<double>{1.0}) == 1.0);
  CHECK(purity(std::vector<double>{std::sqrt(0.5), std::sqrt(0.5)}) == doctest::Approx(0.5));
}

TEST_CASE("modes are orthonormal and reconstruct the JSA") {
  const auto jsa = build_chirped_factorable_jsa(1.0, 1.2, 0.9, wide_grid(96));
  const auto d = schmidt_decompose(jsa);
  const double h = jsa.grid().signal.step();
  const std::size_t k = 5;
  const ComplexMatrix us = d.signal_modes.leftCols(k);
  const ComplexMatrix gram = h * us.adjoint() * us;
  CHECK((gram - ComplexMatrix::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((d.reconstruct() - jsa.amplitude()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("reduced density") {
  const auto jsa = build_chirped_factorable_jsa(1.0, 1.0, 1.0, wide_grid(128));
  const DensityFunction rho = reduced_density(jsa);
  CHECK(rho.trace() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rho.hermiticity_error() < 1e-14);
  CHECK(rho.purity() == doctest::Approx(purity(schmidt_decompose(jsa))).epsilon(1e-9));

  // Riemann sum over the idler at one pair of points.
  const auto& g = jsa.grid();
  const std::size_t a = 50, b = 70;
  Complex direct = 0.0;
  for (std::size_t k = 0; k < jsa.n_idler(); ++k) direct += jsa(a, k) * std::conj(jsa(b, k)) * g.idler.step();
  CHECK(std::abs(rho(a, b) - direct) < 1e-14);
}

TEST_CASE("separable density is rank one") {
  const auto jsa = build_chirped_factorable_jsa(0.8, 1.0, 0.0, wide_grid(64));
  const DensityFunction rho = reduced_density(jsa);
  const std::size_t n = rho.size();
  double worst = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      worst = std::max(worst, std::abs(rho(a, b) * rho(b, a) - rho(a, a) * rho(b, b)));
  CHECK(worst < 1e-14);
  CHECK(rho.purity() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("anti-diagonal width of |rho| narrows with chirp") {
  // |rho(x, -x)| = C exp(-(1 + beta^2) x^2) for unit widths, so the 1/e
  // half-width is (1 + beta^2)^(-1/2). The oracle integrates psi psi* over
  // the idler directly at twice the grid resolution.
  double prev = 1e9;
  for (double beta : {0.0, 0.5, 1.0, 2.0}) {
    CAPTURE(beta);
    const auto jsa = build_chirped_factorable_jsa(1.0, 1.0, beta, wide_grid(128));
    const DensityFunction rho = reduced_density(jsa);
    const auto& ax = jsa.grid().signal;
    const std::size_t n = ax.size();

    auto quadrature = [&](double w, double v) {
      const int m = 2 * int(n) - 1;
      const double h = 16.0 / (m - 1);
      Complex sum = 0.0;
      for (int k = 0; k < m; ++k) {
        const double x = -8.0 + k * h;
        sum += std::exp(-0.5 * (w * w + v * v) - x * x) * std::polar(1.0, beta * x * (w - v)) * h;
      }
      return std::abs(sum) / std::numbers::pi;  // norm of the unit-width Gaussian is pi
    };
    const std::size_t c = n / 2, a = c + 12;
    CHECK(std::abs(rho(c, n - 1 - c)) == doctest::Approx(quadrature(ax[c], ax[n - 1 - c])).epsilon(1e-9));
    CHECK(std::abs(rho(a, n - 1 - a)) == doctest::Approx(quadrature(ax[a], ax[n - 1 - a])).epsilon(1e-9));

    const double x0 = ax[c], x1 = ax[a];
    const double k = -std::log(std::abs(rho(a, n - 1 - a)) / std::abs(rho(c, n - 1 - c))) / (x1 * x1 - x0 * x0);
    const double hw = 1.0 / std::sqrt(k);
    CHECK(hw == doctest::Approx(1.0 / std::sqrt(1.0 + beta * beta)).epsilon(1e-6));
    CHECK(hw < prev);
    prev = hw;
  }
}

TEST_CASE("marginal spectra") {
  const auto jsa = build_chirped_factorable_jsa(0.7, 1.3, 1.0, wide_grid(128));
  const auto& g = jsa.grid();
  const auto s = marginal_spectrum(jsa, Photon::Signal);
  const auto i = marginal_spectrum(jsa, Photon::Idler);
  double ss = 0.0, si = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    ss += s[k] * g.signal.step();
    si += i[k] * g.idler.step();
    m2 += s[k] * g.signal[k] * g.signal[k] * g.signal.step();
  }
  CHECK(ss == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(si == doctest::Approx(1.0).epsilon(1e-9));
  // |exp(-w^2 / 2 s^2)|^2 has variance s^2 / 2.
  CHECK(m2 == doctest::Approx(0.7 * 0.7 / 2.0).epsilon(1e-6));
}

TEST_CASE("grid resolution does not move the purity") {
  const double p128 = purity(schmidt_decompose(build_chirped_factorable_jsa(1.0, 1.0, 2.0, wide_grid(128))));
  const double p256 = purity(schmidt_decompose(build_chirped_factorable_jsa(1.0, 1.0, 2.0, wide_grid(256))));
  CHECK(p128 == doctest::Approx(p256).epsilon(1e-6));
}

}
