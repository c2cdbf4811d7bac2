#include <doctest.h>

#include <cmath>

#include "jsaphase/analysis.hpp"
#include "jsaphase/config.hpp"
#include "jsaphase/errors.hpp"
#include "jsaphase/pipeline.hpp"
#include "jsaphase/schmidt.hpp"
#include "stats.hpp"

using namespace jsaphase;

namespace {

FrequencyGrid grid(std::size_t n, double span = 12.0) { return make_grid(1554.0, 1554.0, span, n); }

CoincidenceHistogram histogram(HistogramScheme s, std::size_t n, std::vector<std::uint64_t> counts, std::uint64_t total) {
  return CoincidenceHistogram{s, {n, 0.0, double(n)}, {n, 0.0, double(n)}, std::move(counts), total};
}

struct Simulated {
  std::vector<DetectionRecord> records;
  CoincidenceHistogram ss, acc;
  double oracle;
};

Simulated simulate_source(const JointSpectralAmplitude& jsa, double mu, std::size_t pulses, std::uint64_t seed,
                          const DetectorChainConfig& chain, const HistogramAxis& axis) {
  const auto decomp = schmidt_decompose(jsa);
  SourceConfig sc;
  sc.mean_pairs_per_pulse = mu;
  sc.n_pulses = pulses;
  sc.rng_seed = seed;
  Simulated out;
  out.records = simulate(PairSource(jsa, decomp, sc), chain);
  out.ss = accumulate(out.records, HistogramScheme::SignalSignal, axis, axis, jsa.grid());
  out.acc = accumulate(out.records, HistogramScheme::CrossPulseAccidentals, axis, axis, jsa.grid());
  out.oracle = purity(decomp);
  return out;
}

DetectorChainConfig sharp_chain() {
  DetectorChainConfig c;
  c.timing_jitter_fwhm_ps = 0.0;
  return c;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("method names") {
  for (auto m : {EstimationMethod::CountRatio, EstimationMethod::WidthRatio, EstimationMethod::G2,
                 EstimationMethod::FringePeriod, EstimationMethod::MLE})
    CHECK(estimation_method_from_string(to_string(m)) == m);
  CHECK_THROWS(estimation_method_from_string("nope"));
}

TEST_CASE("count ratio from totals") {
  const auto s = histogram(HistogramScheme::SignalSignal, 2, {100, 0, 0, 50}, 150);
  const auto a = histogram(HistogramScheme::CrossPulseAccidentals, 2, {50, 25, 25, 0}, 100);
  const auto r = purity_from_count_ratio(s, a);
  CHECK(r.value == doctest::Approx(0.5));
  // Poisson errors on both totals propagated through S / A.
  CHECK(r.std_error == doctest::Approx(std::sqrt(150.0 / 1e4 + 150.0 * 150.0 / 1e6)));
  const auto empty = histogram(HistogramScheme::CrossPulseAccidentals, 2, {0, 0, 0, 0}, 0);
  CHECK_THROWS_AS(purity_from_count_ratio(s, empty), InsufficientDataError);
}

TEST_CASE("interference term extraction") {
  const auto s = histogram(HistogramScheme::SignalSignal, 2, {10, 4, 3, 9}, 26);
  const auto a = histogram(HistogramScheme::CrossPulseAccidentals, 2, {5, 6, 2, 1}, 14);
  const auto t = extract_interference_term(s, a);
  CHECK(t.values(0, 0) == 5.0);
  CHECK(t.values(0, 1) == -2.0);
  CHECK(t.variances(0, 1) == 10.0);
  CHECK(t.n_negative_bins == 1);
  const auto scaled = extract_interference_term(s, a, 0.5);
  CHECK(scaled.values(0, 1) == 1.0);
  CHECK(scaled.variances(0, 1) == doctest::Approx(4.0 + 0.25 * 6.0));

  CoincidenceHistogram other = a;
  other.x.hi = 3.0;
  CHECK_THROWS_AS(extract_interference_term(s, other), std::invalid_argument);
  CHECK_THROWS_AS(purity_from_count_ratio(s, other), std::invalid_argument);
}

TEST_CASE("noise-free estimators agree with the Schmidt purity") {
  const auto g = grid(256, 16.0);
  for (double beta : {0.0, 0.5, 1.0, 2.0}) {
    CAPTURE(beta);
    const auto jsa = build_chirped_factorable_jsa(1.0, 1.0, beta, g);
    const double oracle = 1.0 / std::sqrt(1.0 + beta * beta);
    const auto terms = signal_signal_terms(jsa);
    CHECK(purity_from_count_ratio(terms).value == doctest::Approx(oracle).epsilon(1e-6));
    const auto w = purity_from_width_ratio(interference_term(terms));
    CHECK(w.value == doctest::Approx(oracle).epsilon(1e-4));
    CHECK(w.diagnostics.at("width_antidiagonal") <= w.diagnostics.at("width_diagonal") * (1.0 + 1e-9));
  }
}

TEST_CASE("width ratio with windowed profile fits") {
  const auto jsa = build_chirped_factorable_jsa(1.0, 1.0, 1.0, grid(128, 16.0));
  WidthRatioOptions o;
  o.window_sigmas = 3.0;
  const auto term = interference_term(signal_signal_terms(jsa));
  CHECK(purity_from_width_ratio(term, o).value == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(2e-3));

  // A broad uncorrelated background, shaped like the non-interfering term,
  // inflates the moment widths far more than the windowed fit.
  const auto sharp = build_chirped_factorable_jsa(1.0, 1.0, 3.0, grid(128, 16.0));
  const auto sharp_terms = signal_signal_terms(sharp);
  InterferenceTerm noisy = interference_term(sharp_terms);
  noisy.values += 0.3 * sharp_terms.non_interfering;
  const double truth = 1.0 / std::sqrt(10.0);
  const double moments = purity_from_width_ratio(noisy).value;
  const double windowed = purity_from_width_ratio(noisy, o).value;
  CAPTURE(moments);
  CAPTURE(windowed);
  CHECK(std::abs(windowed - truth) < 0.25 * std::abs(moments - truth));

  InterferenceTerm blank = term;
  blank.values.setZero();
  CHECK_THROWS_AS(purity_from_width_ratio(blank), InsufficientDataError);
  CHECK_THROWS_AS(purity_from_width_ratio(blank, o), InsufficientDataError);
}

TEST_CASE("g2 from counts") {
  const auto r = g2_from_counts(1000, 100, 5, 4);
  CHECK(r.value == doctest::Approx(2.0 * 5 * 1000 * 4 / (3.0 * 100 * 100)));
  CHECK(r.diagnostics.at("purity") == doctest::Approx(r.value - 1.0));
  CHECK(r.std_error > 0.0);
  CHECK_THROWS_AS(g2_from_counts(1000, 0, 0, 4), InsufficientDataError);
  CHECK_THROWS_AS(g2_from_counts(1000, 10, 1, 1), ConfigError);
}

TEST_CASE("simulated g2 of thermal sources") {
  // Low mean keeps three-photon saturation of the four detectors negligible.
  const DetectorChainConfig chain = sharp_chain();
  SUBCASE("single mode") {
    const auto jsa = build_chirped_factorable_jsa(1.0, 1.0, 0.0, grid(32));
    SourceConfig sc;
    sc.mean_pairs_per_pulse = 0.02;
    sc.n_pulses = 10000000;
    sc.rng_seed = 31;
    const auto recs = simulate(PairSource(jsa, schmidt_decompose(jsa), sc), chain);
    const auto r = g2_from_counts(count_signal_arm(recs, sc.n_pulses), 4);
    CAPTURE(r.value);
    CHECK(std::abs(r.value - 2.0) < 3.0 * r.std_error);
  }
  SUBCASE("two equal modes") {
    const auto g = grid(32);
    ComplexMatrix m = ComplexMatrix::Zero(32, 32);
    for (int a = 4; a < 12; ++a)
      for (int b = 4; b < 12; ++b) m(a, b) = 1.0, m(a + 16, b + 16) = 1.0;
    const JointSpectralAmplitude jsa(g, m);
    SourceConfig sc;
    sc.mean_pairs_per_pulse = 0.02;
    sc.n_pulses = 10000000;
    sc.rng_seed = 32;
    const auto recs = simulate(PairSource(jsa, schmidt_decompose(jsa), sc), chain);
    const auto r = g2_from_counts(count_signal_arm(recs, sc.n_pulses), 4);
    CAPTURE(r.value);
    CHECK(std::abs(r.value - 1.5) < 3.0 * r.std_error);
  }
}

TEST_CASE("simulated estimators track the oracle without leakage") {
  const auto axis_of = [](const JointSpectralAmplitude& j) { return grid_axis(j.grid().signal); };
  for (double beta : {0.0, 1.0}) {
    CAPTURE(beta);
    const auto jsa = build_chirped_factorable_jsa(1.0, 1.0, beta, grid(64, 10.0));
    const auto sim = simulate_source(jsa, 0.03, 4000000, 41, sharp_chain(), axis_of(jsa));
    const auto count = purity_from_count_ratio(sim.ss, sim.acc);
    CAPTURE(count.value);
    CHECK(std::abs(count.value - sim.oracle) < 3.0 * count.std_error);
    WidthRatioOptions o;
    o.window_sigmas = kWidthWindowSigmas;
    const auto width = purity_from_width_ratio(extract_interference_term(sim.ss, sim.acc), o);
    CAPTURE(width.value);
    CHECK(std::abs(width.value - sim.oracle) < 3.0 * width.std_error);
    const auto g2 = g2_from_counts(count_signal_arm(sim.records, 4000000), 4);
    CHECK(std::abs(g2.value - 1.0 - sim.oracle) < 3.0 * g2.std_error);
  }
}

TEST_CASE("simulated interference term follows |rho|^2") {
  const auto jsa = build_chirped_factorable_jsa(1.0, 1.0, 1.5, grid(64, 10.0));
  const HistogramAxis axis{16, -3.0, 3.0};
  const auto sim = simulate_source(jsa, 0.1, 2000000, 43, sharp_chain(), axis);
  const auto term = extract_interference_term(sim.ss, sim.acc);

  // Analytic 2 |rho|^2 binned the same way, scaled to the measured total.
  const auto terms = signal_signal_terms(jsa);
  const auto& g = jsa.grid().signal;
  RealMatrix expect = RealMatrix::Zero(16, 16);
  for (std::size_t a = 0; a < g.size(); ++a)
    for (std::size_t c = 0; c < g.size(); ++c) {
      const auto i = axis.bin(g[a]), j = axis.bin(g[c]);
      if (i && j) expect(Eigen::Index(*i), Eigen::Index(*j)) += terms.interfering(a, c);
    }
  expect *= term.values.sum() / expect.sum();
  std::size_t within = 0, used = 0;
  for (Eigen::Index i = 0; i < 16; ++i)
    for (Eigen::Index j = 0; j < 16; ++j) {
      if (term.variances(i, j) <= 0.0) continue;
      ++used;
      within += std::abs(term.values(i, j) - expect(i, j)) < 3.0 * std::sqrt(term.variances(i, j));
    }
  CAPTURE(used);
  CHECK(used > 50);
  CHECK(double(within) >= 0.95 * double(used));
}

TEST_CASE("leaked idlers bias count ratio and g2 upward") {
  RunConfig cfg;
  cfg.run.n_pulses = 1000000;
  const double chirp = 0.6;
  cfg.detector.idler_leak_probability = 0.0;
  const auto clean = purity_point(cfg, chirp, 501, 0);
  cfg.detector.idler_leak_probability = 0.05;
  const auto leaky = purity_point(cfg, chirp, 501, 0);
  REQUIRE(leaky.count_ratio);
  REQUIRE(leaky.width_ratio);
  REQUIRE(leaky.g2);
  CAPTURE(leaky.oracle);
  CHECK(leaky.count_ratio->value > leaky.oracle + 3.0 * leaky.count_ratio->std_error);
  CHECK(leaky.g2->value - 1.0 > leaky.oracle + 3.0 * leaky.g2->std_error);
  CHECK(leaky.count_ratio->value > clean.count_ratio->value);
  CHECK(std::abs(leaky.width_ratio->value - leaky.oracle) < std::abs(leaky.count_ratio->value - leaky.oracle));
}

TEST_CASE("fringe-period fit") {
  const RunConfig cfg;
  SUBCASE("noise-free projection") {
    const auto jsa = build_jsa(cfg, 20.0);
    const double beta = std::abs(resolve_source(cfg.source, 20.0).pump.beta);
    const auto bins = FourfoldBinning::defaults(jsa);
    const auto data = project_fourfold(jsa, FourfoldRepresentation::ProductProjection, bins);
    const auto env = project_fourfold(magnitude_only(jsa), FourfoldRepresentation::ProductProjection, bins);
    const auto r = fringe_period_fit(data, env);
    CHECK(r.value == doctest::Approx(beta).epsilon(0.02));
    CHECK(r.method == EstimationMethod::FringePeriod);
  }
  SUBCASE("unchirped events have no fringe") {
    const auto jsa = build_jsa(cfg, 0.0);
    const auto bins = FourfoldBinning::defaults(jsa);
    const auto env = project_fourfold(jsa, FourfoldRepresentation::ProductProjection, bins);
    const auto events = sample_fourfold_events(jsa, 10000, 9).events;
    CHECK_THROWS_AS(fringe_period_fit(histogram_products(events, bins.product), env), FitError);
  }
  SUBCASE("mismatched binning") {
    const auto jsa = build_jsa(cfg, 20.0);
    auto bins = FourfoldBinning::defaults(jsa);
    const auto env = project_fourfold(jsa, FourfoldRepresentation::ProductProjection, bins);
    bins.product.hi *= 2.0;
    const auto events = sample_fourfold_events(jsa, 1000, 9).events;
    CHECK_THROWS_AS(fringe_period_fit(histogram_products(events, bins.product), env), std::invalid_argument);
  }
}

TEST_CASE("maximum likelihood") {
  SUBCASE("log-likelihood matches a brute-force normalisation") {
    const auto jsa = build_chirped_factorable_jsa(1.0, 1.0, 1.0, grid(20, 8.0));
    const auto m = make_marginals(jsa);
    const auto& g = jsa.grid();
    const auto events = sample_fourfold_events(jsa, 300, 2).events;
    auto brute = [&](double beta) {
      double z = 0.0;
      for (std::size_t a = 0; a < 20; ++a)
        for (std::size_t b = 0; b < 20; ++b)
          for (std::size_t c = 0; c < 20; ++c)
            for (std::size_t d = 0; d < 20; ++d)
              z += fringe_closed_form(m, beta, {g.signal[a], g.idler[b], g.signal[c], g.idler[d]});
      double ll = 0.0;
      for (const auto& q : events) ll += std::log(fringe_closed_form(m, beta, q) / z);
      return ll;
    };
    const double d_lib = mle_log_likelihood(events, m, 1.3) - mle_log_likelihood(events, m, 0.4);
    CHECK(d_lib == doctest::Approx(brute(1.3) - brute(0.4)).epsilon(1e-8));
  }
  SUBCASE("recovers the chirp") {
    const RunConfig cfg;
    const auto jsa = build_jsa(cfg, 20.0);
    const double beta = std::abs(resolve_source(cfg.source, 20.0).pump.beta);
    const auto events = sample_fourfold_events(jsa, 10000, 77).events;
    const auto r = fit_beta_mle(events, make_marginals(jsa));
    CHECK(r.value == doctest::Approx(beta).epsilon(0.05));
    CHECK(std::abs(r.value - beta) < 3.0 * r.std_error);
    CHECK(r.diagnostics.at("at_boundary") == 0.0);
    CHECK(!r.profile.empty());
  }
  SUBCASE("unchirped events give an upper bound") {
    const RunConfig cfg;
    const auto jsa = build_jsa(cfg, 0.0);
    const auto events = sample_fourfold_events(jsa, 5000, 78).events;
    const auto r = fit_beta_mle(events, make_marginals(jsa));
    CHECK(r.value < 2.0 * r.std_error);
    if (r.diagnostics.at("at_boundary") == 1.0) CHECK(r.diagnostics.at("upper_bound_95") > r.value);
  }
  SUBCASE("too few events") {
    const auto jsa = build_chirped_factorable_jsa(1.0, 1.0, 1.0, grid(20, 8.0));
    const auto events = sample_fourfold_events(jsa, 50, 2).events;
    CHECK_THROWS_AS(fit_beta_mle(events, make_marginals(jsa)), InsufficientDataError);
  }
}

}
