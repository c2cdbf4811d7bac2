#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jsaphase/analysis.hpp"
#include "jsaphase/config.hpp"

namespace jsaphase {

/// Seed 0 asks for a fresh one from std::random_device.
std::uint64_t resolve_seed(std::uint64_t seed);
/// Independent seed for the index-th point of a scan.
std::uint64_t point_seed(std::uint64_t seed, std::size_t index);

/// Window used for the width ratio on simulated histograms.
inline constexpr double kWidthWindowSigmas = 3.0;

struct PurityPoint {
  double chirp_ps_per_nm = 0.0;
  double oracle = 0.0;  ///< Schmidt purity of the simulated JSA
  std::uint64_t seed = 0;
  std::optional<EstimationResult> count_ratio;
  std::optional<EstimationResult> width_ratio;
  std::optional<EstimationResult> g2;  ///< value is g2; purity is value - 1
  std::map<std::string, std::string> errors;  ///< method -> failure message
  std::uint64_t signal_signal = 0;
  std::uint64_t accidentals = 0;
};

/// Simulates run.n_pulses pulses at one applied chirp and applies the three
/// purity estimators. Estimator failures are recorded, not thrown.
PurityPoint purity_point(const RunConfig& config, double applied_chirp_ps_per_nm,
                         std::uint64_t seed, std::size_t threads);

/// |psi| with the phase removed: the beta = 0 envelope of a chirped JSA.
JointSpectralAmplitude magnitude_only(const JointSpectralAmplitude& jsa);

struct BetaFits {
  double beta_true = 0.0;  ///< signed ps^2; both fits estimate its magnitude
  std::optional<EstimationResult> mle;
  std::optional<EstimationResult> fringe;
  std::map<std::string, std::string> errors;
  /// Set when a fit failed with a scanned objective.
  std::map<std::string, std::vector<std::pair<double, double>>> failed_profiles;
  std::map<std::string, int> error_kinds;  ///< 3 insufficient data, 4 fit failure
};

/// Runs the MLE and the fringe-period fit on quadruples drawn from (or
/// compatible with) the JSA `config` builds at `applied_chirp_ps_per_nm`.
BetaFits fit_beta(const RunConfig& config, double applied_chirp_ps_per_nm,
                  const std::vector<FrequencyQuad>& events, std::size_t threads);

}  // namespace jsaphase
