#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "jsaphase/detector.hpp"
#include "jsaphase/jsa.hpp"

namespace jsaphase {

struct SourceSpec {
  double pump_center_nm = 777.0;
  double pump_fwhm_nm = 2.0;  ///< intensity FWHM
  double chirp_ps_per_nm = 0.0;
  /// Added to every applied chirp (uncompensated dispersion of the pump line).
  double residual_chirp_ps_per_nm = 0.0;
  PhaseMatchKind phase_matching = PhaseMatchKind::Gaussian;
  /// rad/mm; 0 picks the width that makes the unchirped JSA factorable.
  double pm_sigma_per_mm = 0.0;
  double group_index_pump = 1.83;
  double group_index_signal = 1.86;
  double group_index_idler = 1.80;
  double signal_center_nm = 1554.0;
};

struct GridSpec {
  std::size_t n_points = 128;
  /// rad/ps; 0 spans the Gaussian marginals down to `edge_decay`.
  double span_rad_per_ps = 0.0;
  double edge_decay = 1e-8;
};

struct RunSpec {
  std::size_t n_pulses = 1000000;
  double mean_pairs_per_pulse = 0.2;
  std::size_t n_fourfold_events = 10000;
  /// 0 means "pick one"; the chosen seed is recorded in outputs.
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::vector<double> chirps_ps_per_nm{-5, 0, 5, 10, 15, 20};
};

struct OutputSpec {
  std::string directory = "out";
  std::string matrix_encoding = "binary";  ///< "binary" or "csv"
};

struct RunConfig {
  SourceSpec source;
  GridSpec grid;
  DetectorChainConfig detector;
  RunSpec run;
  OutputSpec output;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Parses a config document. Missing keys keep their defaults; unknown keys
/// and wrongly typed values throw ConfigError naming the key.
RunConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config(const std::string& path);

/// Overrides one dotted key ("source.chirp_ps_per_nm") from a string value.
void set_config_value(RunConfig& config, const std::string& dotted_key,
                      const std::string& value);

/// Pump sigma, chirp and phase matching resolved from a source spec.
struct ResolvedSource {
  PumpSpectrum pump;
  PhaseMatchModel phase_matching;
  double signal_center_nm;
  double idler_center_nm;
  MarginalWidths marginal_widths;  ///< Gaussian-equivalent amplitude widths
};

/// `applied_chirp_ps_per_nm` replaces source.chirp_ps_per_nm; the residual
/// offset is added on top.
ResolvedSource resolve_source(const SourceSpec& source, double applied_chirp_ps_per_nm);
ResolvedSource resolve_source(const SourceSpec& source);

FrequencyGrid make_grid(const ResolvedSource& source, const GridSpec& grid);

JointSpectralAmplitude build_jsa(const RunConfig& config, double applied_chirp_ps_per_nm);
JointSpectralAmplitude build_jsa(const RunConfig& config);

}  // namespace jsaphase
