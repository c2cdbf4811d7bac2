#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "jsaphase/coincidence.hpp"
#include "jsaphase/detector.hpp"
#include "jsaphase/errors.hpp"

namespace jsaphase {

enum class EstimationMethod { CountRatio, WidthRatio, G2, FringePeriod, MLE };

std::string to_string(EstimationMethod m);
EstimationMethod estimation_method_from_string(const std::string& name);

struct EstimationResult {
  double value = 0.0;
  double std_error = 0.0;
  EstimationMethod method = EstimationMethod::CountRatio;
  std::uint64_t n_events_used = 0;
  std::map<std::string, double> diagnostics;
  /// Objective profile (parameter, objective) for fits; empty otherwise.
  std::vector<std::pair<double, double>> profile;
};

/// Signal-signal coincidences with the non-interfering part removed.
struct InterferenceTerm {
  HistogramAxis x;
  HistogramAxis y;
  RealMatrix values;
  RealMatrix variances;  ///< zero for analytic input
  std::size_t n_negative_bins = 0;
  double signal_signal_total = 0.0;  ///< including out-of-range pairs
  double accidental_total = 0.0;
};

/// signal_signal - scale * accidentals, with Poisson variances. Throws
/// std::invalid_argument if the histograms are binned differently.
InterferenceTerm extract_interference_term(const CoincidenceHistogram& signal_signal,
                                           const CoincidenceHistogram& accidentals,
                                           double scale = 1.0);

/// Noise-free term 2 gamma |rho_s|^2 on the grid.
InterferenceTerm interference_term(const SignalSignalTerms& terms);

/// (S - A) / A from the coincidence totals. Throws InsufficientDataError on
/// zero accidentals.
EstimationResult purity_from_count_ratio(const CoincidenceHistogram& signal_signal,
                                         const CoincidenceHistogram& accidentals);
/// Ratio of the summed interfering and non-interfering analytic terms.
EstimationResult purity_from_count_ratio(const SignalSignalTerms& terms);

struct WidthRatioOptions {
  /// 0 takes second moments over every bin (exact for noise-free input).
  /// Otherwise the diagonal and anti-diagonal profiles are each fitted with a
  /// Gaussian plus constant inside +-k sigma, re-windowed until stable. The
  /// constant soaks up broad backgrounds such as leaked idlers.
  double window_sigmas = 0.0;
  int max_iterations = 50;
};

/// Width along v = (w - w')/sqrt2 over width along u = (w + w')/sqrt2.
/// Throws InsufficientDataError for non-positive or too sparse input.
EstimationResult purity_from_width_ratio(const InterferenceTerm& term,
                                         const WidthRatioOptions& options = {});

/// 1-D product-coordinate histogram |dws| |dwi| of a set of quadruples.
FourfoldDistribution histogram_products(const std::vector<FrequencyQuad>& events,
                                        const HistogramAxis& axis);

/// 2-D histogram of (|dws|, |dwi|) for comparison with a difference map.
FourfoldDistribution histogram_differences(const std::vector<FrequencyQuad>& events,
                                           const HistogramAxis& signal,
                                           const HistogramAxis& idler);

struct FringeFitOptions {
  std::size_t scan_points = 4000;
  /// Bins whose envelope is below this fraction of its peak are ignored.
  double envelope_floor = 1e-3;
};

/// Fits A cos^2(beta u / 2) + C to the product histogram divided by the
/// beta = 0 envelope. Unnormalised data are weighted as Poisson counts.
/// Throws FitError when the support holds less than one fringe or the
/// modulation is not significant.
EstimationResult fringe_period_fit(const FourfoldDistribution& product,
                                   const FourfoldDistribution& envelope,
                                   const FringeFitOptions& options = {});

struct MleOptions {
  double scan_step = 0.01;  ///< ps^2
  /// Search range [0, beta_max]; 0 selects the grid's aliasing limit.
  double beta_max = 0.0;
  std::size_t profile_points = 200;
};

/// Maximum-likelihood |beta| for quadruples from a JSA with the given
/// magnitudes and a bilinear phase. Needs at least 100 events.
EstimationResult fit_beta_mle(const std::vector<FrequencyQuad>& events,
                              const Marginals& marginals,
                              const MleOptions& options = {});

/// Log-likelihood sum log P(q | beta) up to a beta-independent constant.
double mle_log_likelihood(const std::vector<FrequencyQuad>& events,
                          const Marginals& marginals, double beta);

/// Unheralded g2(0) = 2 D N n / ((n - 1) S^2) from signal-arm singles S and
/// distinct-detector doubles D over N pulses with n detectors. The purity
/// estimate g2 - 1 is in diagnostics["purity"].
EstimationResult g2_from_counts(std::uint64_t n_pulses, std::uint64_t signal_singles,
                                std::uint64_t signal_doubles, std::size_t n_detectors);
EstimationResult g2_from_counts(const SignalArmCounts& counts, std::size_t n_detectors);

}  // namespace jsaphase
