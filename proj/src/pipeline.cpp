#include "jsaphase/pipeline.hpp"

#include <random>

#include "jsaphase/detector.hpp"
#include "jsaphase/errors.hpp"
#include "jsaphase/rng.hpp"
#include "jsaphase/schmidt.hpp"

namespace jsaphase {

std::uint64_t resolve_seed(std::uint64_t seed) {
  while (seed == 0) {
    std::random_device rd;
    seed = (std::uint64_t(rd()) << 32) ^ rd();
  }
  return seed;
}

std::uint64_t point_seed(std::uint64_t seed, std::size_t index) {
  CounterRng rng(seed, index, 3);
  std::uint64_t s = rng();
  return s ? s : 1;
}

namespace {

template <class F>
void attempt(std::map<std::string, std::string>& errors, const std::string& name, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    errors[name] = e.what();
  }
}

}  // namespace

PurityPoint purity_point(const RunConfig& config, double applied_chirp_ps_per_nm,
                         std::uint64_t seed, std::size_t threads) {
  PurityPoint p;
  p.chirp_ps_per_nm = applied_chirp_ps_per_nm;
  p.seed = seed;
  const JointSpectralAmplitude jsa = build_jsa(config, applied_chirp_ps_per_nm);
  const SchmidtDecomposition decomp = schmidt_decompose(jsa);
  p.oracle = purity(decomp);

  SourceConfig sc;
  sc.mean_pairs_per_pulse = config.run.mean_pairs_per_pulse;
  sc.n_pulses = config.run.n_pulses;
  sc.rng_seed = seed;
  const PairSource source(jsa, decomp, sc, threads);
  const auto records = simulate(source, config.detector, threads);

  const HistogramAxis axis = grid_axis(jsa.grid().signal);
  const auto ss = accumulate(records, HistogramScheme::SignalSignal, axis, axis, jsa.grid());
  const auto acc = accumulate(records, HistogramScheme::CrossPulseAccidentals, axis, axis, jsa.grid());
  p.signal_signal = ss.total;
  p.accidentals = acc.total;

  attempt(p.errors, "count_ratio", [&] { p.count_ratio = purity_from_count_ratio(ss, acc); });
  attempt(p.errors, "width_ratio", [&] {
    WidthRatioOptions options;
    options.window_sigmas = kWidthWindowSigmas;
    p.width_ratio = purity_from_width_ratio(extract_interference_term(ss, acc), options);
  });
  attempt(p.errors, "g2", [&] {
    p.g2 = g2_from_counts(count_signal_arm(records, config.run.n_pulses),
                          config.detector.n_detectors_per_arm);
  });
  return p;
}

JointSpectralAmplitude magnitude_only(const JointSpectralAmplitude& jsa) {
  ComplexMatrix m = jsa.amplitude().cwiseAbs().cast<Complex>();
  return JointSpectralAmplitude(jsa.grid(), std::move(m), jsa.gamma());
}

BetaFits fit_beta(const RunConfig& config, double applied_chirp_ps_per_nm,
                  const std::vector<FrequencyQuad>& events, std::size_t threads) {
  BetaFits out;
  const JointSpectralAmplitude jsa = build_jsa(config, applied_chirp_ps_per_nm);
  out.beta_true = resolve_source(config.source, applied_chirp_ps_per_nm).pump.beta;

  auto guarded = [&](const std::string& name, auto&& f) {
    try {
      f();
    } catch (const InsufficientDataError& e) {
      out.errors[name] = e.what();
      out.error_kinds[name] = 3;
    } catch (const FitError& e) {
      out.errors[name] = e.what();
      out.error_kinds[name] = 4;
      out.failed_profiles[name] = e.profile();
    }
  };
  guarded("mle", [&] { out.mle = fit_beta_mle(events, make_marginals(jsa)); });
  guarded("fringe_period", [&] {
    const FourfoldBinning binning = FourfoldBinning::defaults(jsa);
    ProjectionOptions po;
    po.threads = threads;
    const auto envelope = project_fourfold(magnitude_only(jsa),
                                           FourfoldRepresentation::ProductProjection, binning, po);
    if (events.empty()) throw InsufficientDataError("no events to histogram");
    out.fringe = fringe_period_fit(histogram_products(events, binning.product), envelope);
  });
  return out;
}

}  // namespace jsaphase
