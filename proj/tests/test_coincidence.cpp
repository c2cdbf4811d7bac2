#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "jsaphase/coincidence.hpp"
#include "jsaphase/config.hpp"
#include "jsaphase/detector.hpp"
#include "jsaphase/schmidt.hpp"

using namespace jsaphase;

namespace {

FrequencyGrid grid(std::size_t n, double span = 12.0) { return make_grid(1554.0, 1554.0, span, n); }

FrequencyQuad random_quad(const FrequencyGrid& g, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> s(0, g.signal.size() - 1), i(0, g.idler.size() - 1);
  return {g.signal[s(rng)], g.idler[i(rng)], g.signal[s(rng)], g.idler[i(rng)]};
}

// Lag-binned difference map built straight from the full tensor.
std::vector<double> bin_tensor(const FourfoldDistribution& t, std::size_t n, std::size_t lags) {
  std::vector<double> out(lags * lags, 0.0);
  double in = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
        for (std::size_t d = 0; d < n; ++d) {
          const std::size_t ls = a > c ? a - c : c - a, li = b > d ? b - d : d - b;
          if (ls >= lags || li >= lags) continue;
          const double v = t.values[((a * n + b) * n + c) * n + d];
          out[ls * lags + li] += v;
          in += v;
        }
  for (double& v : out) v /= in;
  return out;
}

}  // namespace

TEST_SUITE("coincidence") {

TEST_CASE("double-pair probability identities") {
  const auto g = grid(128);
  const auto jsa = build_chirped_factorable_jsa(1.0, 1.3, 2.2, g);
  std::mt19937_64 rng(7);
  for (int k = 0; k < 50; ++k) {
    FrequencyQuad q = random_quad(g, rng);
    // Both idlers at one frequency: the two amplitudes coincide.
    q.idler2 = q.idler;
    const IndexQuad iq = to_indices(g, q);
    const double expect = 4.0 * std::norm(jsa(iq.signal, iq.idler)) * std::norm(jsa(iq.signal2, iq.idler));
    CHECK(four_photon_probability(jsa, q) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("separable JSA is a product of marginals") {
  const auto g = grid(96);
  const auto jsa = build_chirped_factorable_jsa(0.8, 1.1, 0.0, g);
  const auto m = make_marginals(jsa);
  std::mt19937_64 rng(11);
  for (int k = 0; k < 200; ++k) {
    const FrequencyQuad q = random_quad(g, rng);
    const IndexQuad i = to_indices(g, q);
    const double expect = 4.0 * m.signal[i.signal] * m.signal[i.signal2] * m.idler[i.idler] * m.idler[i.idler2];
    CHECK(four_photon_probability(jsa, q) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(fringe_closed_form(m, 0.0, q) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("closed form matches the direct evaluation") {
  const auto g = grid(128);
  for (double beta : {0.3, 1.0, 6.41}) {
    CAPTURE(beta);
    const auto jsa = build_chirped_factorable_jsa(1.0, 0.9, beta, g);
    const auto m = make_marginals(jsa);
    std::mt19937_64 rng(1234);
    double worst = 0.0, scale = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const FrequencyQuad q = random_quad(g, rng);
      const double direct = four_photon_probability(jsa, q);
      const double closed = fringe_closed_form(m, beta, q);
      const IndexQuad i = to_indices(g, q);
      const double env = 4.0 * m.signal[i.signal] * m.signal[i.signal2] * m.idler[i.idler] * m.idler[i.idler2];
      if (env < 1e-250) continue;
      worst = std::max(worst, std::abs(direct - closed) / env);
      scale = std::max(scale, env);
    }
    CHECK(scale > 0.0);
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("closed form vanishes on the fringe minima") {
  const auto g = grid(128);
  // Pick lags, then choose beta so beta/2 * dws * dwi = pi/2.
  const std::size_t a = 60, c = 70, b = 55, d = 62;
  const double dws = g.signal[c] - g.signal[a], dwi = g.idler[d] - g.idler[b];
  const double beta = std::numbers::pi / (dws * dwi);
  const auto jsa = build_chirped_factorable_jsa(1.0, 1.0, beta, g);
  const auto m = make_marginals(jsa);
  const FrequencyQuad q{g.signal[a], g.idler[b], g.signal[c], g.idler[d]};
  const double env = 4.0 * m.signal[a] * m.signal[c] * m.idler[b] * m.idler[d];
  CHECK(fringe_closed_form(m, beta, q) < 1e-20 * env);
  CHECK(four_photon_probability(jsa, q) < 1e-12 * env);
  CHECK(fringe_closed_form(m, 0.0, q) == doctest::Approx(env));
}

TEST_CASE("symmetries") {
  const auto jsa = build_jsa(RunConfig{}, 15.0);
  const auto conj = jsa.conjugate();
  std::mt19937_64 rng(3);
  for (int k = 0; k < 200; ++k) {
    const FrequencyQuad q = random_quad(jsa.grid(), rng);
    const double p = four_photon_probability(jsa, q);
    CHECK(four_photon_probability(jsa, FrequencyQuad{q.signal2, q.idler, q.signal, q.idler2}) ==
          doctest::Approx(p).epsilon(1e-12));
    CHECK(four_photon_probability(jsa, FrequencyQuad{q.signal, q.idler2, q.signal2, q.idler}) ==
          doctest::Approx(p).epsilon(1e-12));
    CHECK(four_photon_probability(conj, q) == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("unchirped difference map matches the full tensor") {
  const std::size_t n = 32, lags = 20;
  const auto jsa = build_chirped_factorable_jsa(1.0, 1.0, 0.0, grid(n, 8.0));
  FourfoldBinning bins = FourfoldBinning::defaults(jsa);
  bins.signal = lag_axis(jsa.grid().signal, lags);
  bins.idler = lag_axis(jsa.grid().idler, lags);
  const auto tensor = project_fourfold(jsa, FourfoldRepresentation::FullTensor, bins);
  CHECK(tensor.sum() == doctest::Approx(1.0).epsilon(1e-12));
  const auto oracle = bin_tensor(tensor, n, lags);
  const auto map = project_fourfold(jsa, FourfoldRepresentation::DifferenceProjection, bins);
  REQUIRE(map.values.size() == oracle.size());
  for (std::size_t k = 0; k < oracle.size(); ++k) CHECK(map.values[k] == doctest::Approx(oracle[k]).epsilon(1e-12));

  // And it factorises into lag profiles of the two marginals.
  const auto m = make_marginals(jsa);
  std::vector<double> ps(lags, 0.0), pi(lags, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t l = a > c ? a - c : c - a;
      if (l < lags) {
        ps[l] += m.signal[a] * m.signal[c];
        pi[l] += m.idler[a] * m.idler[c];
      }
    }
  double zs = 0.0, zi = 0.0;
  for (std::size_t l = 0; l < lags; ++l) zs += ps[l], zi += pi[l];
  for (std::size_t s = 0; s < lags; ++s)
    for (std::size_t i = 0; i < lags; ++i)
      CHECK(map.at(s, i) == doctest::Approx(ps[s] * pi[i] / (zs * zi)).epsilon(1e-12));
}

TEST_CASE("full tensor is limited in size") {
  const auto jsa = build_chirped_factorable_jsa(1.0, 1.0, 0.0, grid(128));
  CHECK_THROWS_AS(project_fourfold(jsa, FourfoldRepresentation::FullTensor, FourfoldBinning::defaults(jsa)),
                  std::invalid_argument);
}

TEST_CASE("projections do not depend on block size or workers") {
  const auto jsa = build_chirped_factorable_jsa(1.0, 1.0, 3.0, grid(64));
  const auto bins = FourfoldBinning::defaults(jsa);
  for (auto rep : {FourfoldRepresentation::DifferenceProjection, FourfoldRepresentation::ProductProjection}) {
    ProjectionOptions base;
    base.threads = 1;
    const auto ref = project_fourfold(jsa, rep, bins, base);
    for (std::size_t block : {4093, 65536, 1 << 22})
      for (std::size_t threads : {1, 4, 16}) {
        CAPTURE(block);
        CAPTURE(threads);
        ProjectionOptions o;
        o.block_size = block;
        o.threads = threads;
        const auto d = project_fourfold(jsa, rep, bins, o);
        CHECK(d.values == ref.values);
        CHECK(d.bin_mean == ref.bin_mean);
        CHECK(d.total_mass == ref.total_mass);
      }
  }
}

TEST_CASE("projections are blind to the sign of the chirp") {
  const RunConfig cfg;
  const auto plus = build_jsa(cfg, 5.0);
  const auto minus = build_jsa(cfg, -5.0);
  const auto bins = FourfoldBinning::defaults(plus);
  for (auto rep : {FourfoldRepresentation::DifferenceProjection, FourfoldRepresentation::ProductProjection})
    CHECK(project_fourfold(plus, rep, bins).values == project_fourfold(minus, rep, bins).values);
}

TEST_CASE("unnormalised projection keeps the double-pair mass") {
  const auto jsa = build_chirped_factorable_jsa(1.0, 1.0, 1.0, grid(48));
  ProjectionOptions o;
  o.normalize = false;
  const auto tensor = project_fourfold(jsa, FourfoldRepresentation::FullTensor, FourfoldBinning::defaults(jsa), o);
  const auto map = project_fourfold(jsa, FourfoldRepresentation::DifferenceProjection, FourfoldBinning::defaults(jsa), o);
  // Streamed projections accumulate in fixed-point quanta of 2^-52 of the peak.
  CHECK(map.total_mass == doctest::Approx(tensor.total_mass).epsilon(1e-9));
  // sum |A + B|^2 = 2 (1 + purity) for a normalised JSA
  CHECK(tensor.total_mass == doctest::Approx(2.0 * (1.0 + purity(schmidt_decompose(jsa)))).epsilon(1e-9));
}

TEST_CASE("signal-signal probability") {
  SUBCASE("separable: interfering equals non-interfering") {
    const auto jsa = build_chirped_factorable_jsa(1.0, 1.0, 0.0, grid(64));
    const auto t = signal_signal_terms(jsa);
    CHECK((t.interfering - t.non_interfering).cwiseAbs().maxCoeff() < 1e-12 * t.non_interfering.maxCoeff());
  }
  SUBCASE("chirped: interfering term from the idler spectrum's Fourier transform") {
    const double beta = 1.7;
    const auto g = grid(128, 14.0);
    const auto jsa = build_chirped_factorable_jsa(1.0, 0.8, beta, g);
    const auto t = signal_signal_terms(jsa);
    const auto m = make_marginals(jsa);
    auto ft = [&](double k) {
      Complex s = 0.0;
      for (std::size_t j = 0; j < g.idler.size(); ++j) s += m.idler[j] * std::polar(1.0, k * g.idler[j]) * g.idler.step();
      return std::norm(s);
    };
    double worst = 0.0;
    for (std::size_t a = 0; a < g.signal.size(); a += 3)
      for (std::size_t c = 0; c < g.signal.size(); c += 5) {
        const double expect = 2.0 * m.signal[a] * m.signal[c] * ft(beta * (g.signal[a] - g.signal[c]));
        worst = std::max(worst, std::abs(t.interfering(a, c) - expect));
      }
    CHECK(worst < 1e-6 * t.interfering.maxCoeff());
  }
  SUBCASE("point evaluation agrees with the grid terms") {
    const auto jsa = build_jsa(RunConfig{}, 10.0);
    const auto t = signal_signal_terms(jsa);
    const auto& ax = jsa.grid().signal;
    for (std::size_t a : {10, 64, 100})
      for (std::size_t c : {20, 64, 90})
        CHECK(signal_signal_probability(jsa, ax[a], ax[c]) == doctest::Approx(t.total()(a, c)).epsilon(1e-12));
  }
}

TEST_CASE("unheralded g2") {
  CHECK(unheralded_g2(schmidt_decompose(build_chirped_factorable_jsa(1.0, 1.0, 0.0, grid(64)))) ==
        doctest::Approx(2.0).epsilon(1e-9));

  const auto g = make_grid(1554.0, 1554.0, 3.0, 4);
  ComplexMatrix m = ComplexMatrix::Zero(4, 4);
  m(0, 0) = 1.0;
  m(2, 3) = 1.0;
  CHECK(unheralded_g2(schmidt_decompose(JointSpectralAmplitude(g, m))) == doctest::Approx(1.5));

  const auto chirped = build_chirped_factorable_jsa(1.0, 1.0, 1.0, make_grid(1554.0, 1554.0, 16.0, 256));
  CHECK(unheralded_g2(schmidt_decompose(chirped)) == doctest::Approx(1.7071).epsilon(1e-4));
}

}
