#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "jsaphase/coincidence.hpp"
#include "jsaphase/jsa.hpp"
#include "jsaphase/rng.hpp"
#include "jsaphase/schmidt.hpp"

namespace jsaphase {

/// Draws grid indices from a discrete distribution by inverse CDF.
class DiscreteSampler {
 public:
  DiscreteSampler() = default;
  explicit DiscreteSampler(const std::vector<double>& weights);

  std::size_t operator()(CounterRng& rng) const;
  std::size_t size() const { return cdf_.size(); }

 private:
  std::vector<double> cdf_;
};

/// Rejection sampler for the double-pair density
/// |psi(a,b) psi(a',b') + psi(a,b') psi(a',b)|^2 against the separable
/// envelope 4 Psi_s(a) Psi_s(a') Psi_i(b) Psi_i(b'). For JSAs whose
/// intensity is separable the envelope ratio is a cos^2 factor and the bound
/// is exactly one; otherwise the bound is the maximum ratio over the grid.
class FourfoldSampler {
 public:
  explicit FourfoldSampler(const JointSpectralAmplitude& jsa, std::size_t threads = 0);

  /// Throws std::logic_error if a proposal exceeds the envelope bound.
  IndexQuad sample(CounterRng& rng, std::uint64_t* attempts = nullptr) const;

  double envelope_bound() const { return bound_; }
  bool separable_intensity() const { return separable_; }

 private:
  ComplexMatrix psi_;
  std::vector<double> signal_;
  std::vector<double> idler_;
  DiscreteSampler signal_sampler_;
  DiscreteSampler idler_sampler_;
  double bound_ = 1.0;
  bool separable_ = false;
};

struct FourfoldSample {
  std::vector<FrequencyQuad> events;
  std::uint64_t attempts = 0;

  double acceptance_rate() const {
    return attempts ? double(events.size()) / double(attempts) : 0.0;
  }
};

/// Draws `n_events` quadruples from the double-pair density. Event k uses the
/// counter stream (seed, k), so results do not depend on `threads`.
FourfoldSample sample_fourfold_events(const JointSpectralAmplitude& jsa,
                                      std::size_t n_events, std::uint64_t rng_seed,
                                      std::size_t threads = 0);

struct SourceConfig {
  double mean_pairs_per_pulse = 0.1;
  std::size_t n_pulses = 1000000;
  std::uint64_t rng_seed = 1;

  void validate() const;
};

struct PhotonPair {
  double omega_s;  ///< rad/ps detuning
  double omega_i;
};

/// Multimode squeezed-vacuum pair source in the Schmidt basis. Each mode j
/// has thermal pair statistics P(n) = (1 - l_j) l_j^n with
/// l_j = s^2 xi_j^2 and s chosen so the total mean equals
/// `mean_pairs_per_pulse`. One-pair pulses are drawn from |psi|^2, two-pair
/// pulses from the coherent double-pair density, and higher orders mode by
/// mode.
class PairSource {
 public:
  PairSource(const JointSpectralAmplitude& jsa, const SchmidtDecomposition& decomp,
             SourceConfig config, std::size_t threads = 0);

  /// Deterministic in (rng_seed, pulse_index).
  std::vector<PhotonPair> sample_pulse(std::uint64_t pulse_index) const;

  const JointSpectralAmplitude& jsa() const { return jsa_; }
  const SourceConfig& config() const { return config_; }
  /// l_j per retained mode.
  const std::vector<double>& mode_occupation() const { return lambda_; }
  /// P(N = k) for k = 0..size-1.
  const std::vector<double>& pair_number_pmf() const { return total_pmf_; }
  double mean_pairs() const;

 private:
  std::vector<std::size_t> assign_modes(std::size_t n_pairs, CounterRng& rng) const;

  JointSpectralAmplitude jsa_;
  SourceConfig config_;
  std::vector<double> lambda_;
  std::vector<double> total_pmf_;
  std::vector<double> total_cdf_;
  // suffix_[j][r]: P(sum of modes j.. = r)
  std::vector<std::vector<double>> suffix_;
  DiscreteSampler jsi_sampler_;
  FourfoldSampler fourfold_;
  std::vector<DiscreteSampler> signal_modes_;
  std::vector<DiscreteSampler> idler_modes_;
};

/// Free-function form of PairSource::sample_pulse.
std::vector<PhotonPair> sample_pulse(const PairSource& source, std::uint64_t pulse_index);

enum class Arm : std::uint8_t { Signal = 0, Idler = 1 };

std::string to_string(Arm arm);

struct DetectorChainConfig {
  double dispersion_ns_per_nm = 2.3;
  double timing_jitter_fwhm_ps = 150.0;
  double efficiency_signal = 1.0;
  double efficiency_idler = 1.0;
  std::size_t n_detectors_per_arm = 4;
  double idler_leak_probability = 0.0;
  double dark_count_rate_per_pulse = 0.0;

  void validate() const;
};

struct DetectionRecord {
  std::uint64_t pulse_index;
  Arm arm;
  std::uint32_t detector_index;
  double inferred_wavelength_nm;

  bool operator==(const DetectionRecord&) const = default;
};

/// Detection chain for one pulse: loss, idler leakage into the signal arm,
/// uniform 1->n splitting with same-detector exclusion (earliest arrival
/// clicks), dispersive time of flight with Gaussian jitter, dark counts.
/// Records come out signal arm first, each arm ordered by detector index.
std::vector<DetectionRecord> detect(std::uint64_t pulse_index,
                                    const std::vector<PhotonPair>& pairs,
                                    const FrequencyGrid& grid,
                                    const DetectorChainConfig& chain,
                                    CounterRng& rng);

/// Simulates `source.config().n_pulses` pulses in parallel chunks; the record
/// stream is identical for any worker count.
std::vector<DetectionRecord> simulate(const PairSource& source,
                                      const DetectorChainConfig& chain,
                                      std::size_t threads = 0);

enum class HistogramScheme { TwofoldJsi, SignalSignal, FourfoldDifference, CrossPulseAccidentals };

std::string to_string(HistogramScheme scheme);

/// 2-D count histogram. Axes are in rad/ps: detunings from the arm centre
/// (twofold, signal-signal, accidentals) or absolute detuning differences
/// (fourfold).
struct CoincidenceHistogram {
  HistogramScheme scheme = HistogramScheme::TwofoldJsi;
  HistogramAxis x;
  HistogramAxis y;
  std::vector<std::uint64_t> counts;  ///< row-major, x-major
  std::uint64_t total = 0;            ///< including events outside the axes

  std::uint64_t at(std::size_t i, std::size_t j) const { return counts.at(i * y.count + j); }
  std::uint64_t in_range() const;
  void merge(const CoincidenceHistogram& other);
};

/// Axes centred on the grid points, so jitter-free detections of grid
/// frequencies land in the bin of their grid index.
HistogramAxis grid_axis(const FrequencyAxis& axis);
/// Lag-centred axis for |dw| histograms: bin k holds lag k.
HistogramAxis lag_axis(const FrequencyAxis& axis, std::size_t n_lags);

/// Bins a pulse-sorted record stream; throws std::invalid_argument if the
/// stream is not sorted by pulse index.
CoincidenceHistogram accumulate(const std::vector<DetectionRecord>& records,
                                HistogramScheme scheme, const HistogramAxis& x,
                                const HistogramAxis& y, const FrequencyGrid& grid);

/// Signal-arm click totals for unheralded g2.
struct SignalArmCounts {
  std::uint64_t n_pulses = 0;
  std::uint64_t singles = 0;  ///< signal-arm clicks
  std::uint64_t doubles = 0;  ///< same-pulse click pairs (distinct detectors)
};

SignalArmCounts count_signal_arm(const std::vector<DetectionRecord>& records,
                                 std::uint64_t n_pulses);

}  // namespace jsaphase
