#include "jsaphase/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>

#include "jsaphase/errors.hpp"

namespace jsaphase {

using nlohmann::json;

namespace {

using Setter = std::function<void(const json&)>;
using Section = std::map<std::string, Setter>;

template <class T>
Setter number(T& field, const std::string& key) {
  return [&field, key](const json& v) {
    if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
      field = v.get<T>();
    } else {
      if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError("'" + key + "' must be a non-negative integer");
      field = v.get<T>();
    }
  };
}

Setter text(std::string& field, const std::string& key) {
  return [&field, key](const json& v) {
    if (!v.is_string()) throw ConfigError("'" + key + "' must be a string");
    field = v.get<std::string>();
  };
}

void apply_section(const json& doc, const std::string& name, const Section& setters) {
  if (!doc.contains(name)) return;
  const json& sec = doc.at(name);
  if (!sec.is_object()) throw ConfigError("'" + name + "' must be an object");
  for (const auto& [key, value] : sec.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + name + "." + key + "'");
    it->second(value);
  }
}

std::map<std::string, Section> sections(RunConfig& c) {
  auto& s = c.source;
  auto& g = c.grid;
  auto& d = c.detector;
  auto& r = c.run;
  auto& o = c.output;
  std::map<std::string, Section> out;
  out["source"] = {
      {"pump_center_nm", number(s.pump_center_nm, "source.pump_center_nm")},
      {"pump_fwhm_nm", number(s.pump_fwhm_nm, "source.pump_fwhm_nm")},
      {"chirp_ps_per_nm", number(s.chirp_ps_per_nm, "source.chirp_ps_per_nm")},
      {"residual_chirp_ps_per_nm",
       number(s.residual_chirp_ps_per_nm, "source.residual_chirp_ps_per_nm")},
      {"phase_matching",
       [&s](const json& v) {
         if (!v.is_string()) throw ConfigError("'source.phase_matching' must be a string");
         try {
           s.phase_matching = phase_match_kind_from_string(v.get<std::string>());
         } catch (const std::exception& e) {
           throw ConfigError("'source.phase_matching': " + std::string(e.what()));
         }
       }},
      {"pm_sigma_per_mm", number(s.pm_sigma_per_mm, "source.pm_sigma_per_mm")},
      {"group_index_pump", number(s.group_index_pump, "source.group_index_pump")},
      {"group_index_signal", number(s.group_index_signal, "source.group_index_signal")},
      {"group_index_idler", number(s.group_index_idler, "source.group_index_idler")},
      {"signal_center_nm", number(s.signal_center_nm, "source.signal_center_nm")},
  };
  out["grid"] = {
      {"n_points", number(g.n_points, "grid.n_points")},
      {"span_rad_per_ps", number(g.span_rad_per_ps, "grid.span_rad_per_ps")},
      {"edge_decay", number(g.edge_decay, "grid.edge_decay")},
  };
  out["detector"] = {
      {"dispersion_ns_per_nm", number(d.dispersion_ns_per_nm, "detector.dispersion_ns_per_nm")},
      {"timing_jitter_fwhm_ps", number(d.timing_jitter_fwhm_ps, "detector.timing_jitter_fwhm_ps")},
      {"efficiency_signal", number(d.efficiency_signal, "detector.efficiency_signal")},
      {"efficiency_idler", number(d.efficiency_idler, "detector.efficiency_idler")},
      {"n_detectors_per_arm", number(d.n_detectors_per_arm, "detector.n_detectors_per_arm")},
      {"idler_leak_probability",
       number(d.idler_leak_probability, "detector.idler_leak_probability")},
      {"dark_count_rate_per_pulse",
       number(d.dark_count_rate_per_pulse, "detector.dark_count_rate_per_pulse")},
  };
  out["run"] = {
      {"n_pulses", number(r.n_pulses, "run.n_pulses")},
      {"mean_pairs_per_pulse", number(r.mean_pairs_per_pulse, "run.mean_pairs_per_pulse")},
      {"n_fourfold_events", number(r.n_fourfold_events, "run.n_fourfold_events")},
      {"seed", number(r.seed, "run.seed")},
      {"threads", number(r.threads, "run.threads")},
      {"chirps_ps_per_nm",
       [&r](const json& v) {
         if (!v.is_array()) throw ConfigError("'run.chirps_ps_per_nm' must be an array of numbers");
         std::vector<double> chirps;
         for (const auto& x : v) {
           if (!x.is_number())
             throw ConfigError("'run.chirps_ps_per_nm' must be an array of numbers");
           chirps.push_back(x.get<double>());
         }
         r.chirps_ps_per_nm = std::move(chirps);
       }},
  };
  out["output"] = {
      {"directory", text(o.directory, "output.directory")},
      {"matrix_encoding", text(o.matrix_encoding, "output.matrix_encoding")},
  };
  return out;
}

}  // namespace

void RunConfig::validate() const {
  auto positive = [](double v, const char* key) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("'") + key + "' must be positive");
  };
  auto finite = [](double v, const char* key) {
    if (!std::isfinite(v)) throw ConfigError(std::string("'") + key + "' must be finite");
  };
  positive(source.pump_center_nm, "source.pump_center_nm");
  positive(source.pump_fwhm_nm, "source.pump_fwhm_nm");
  finite(source.chirp_ps_per_nm, "source.chirp_ps_per_nm");
  finite(source.residual_chirp_ps_per_nm, "source.residual_chirp_ps_per_nm");
  if (!(source.pm_sigma_per_mm >= 0.0)) throw ConfigError("'source.pm_sigma_per_mm' must be >= 0");
  positive(source.group_index_pump, "source.group_index_pump");
  positive(source.group_index_signal, "source.group_index_signal");
  positive(source.group_index_idler, "source.group_index_idler");
  if (!(source.signal_center_nm > source.pump_center_nm))
    throw ConfigError("'source.signal_center_nm' must exceed the pump centre wavelength");
  if (grid.n_points < 8 || grid.n_points > 1024)
    throw ConfigError("'grid.n_points' must lie in [8, 1024]");
  if (!(grid.span_rad_per_ps >= 0.0)) throw ConfigError("'grid.span_rad_per_ps' must be >= 0");
  if (!(grid.edge_decay > 0.0 && grid.edge_decay < 1.0))
    throw ConfigError("'grid.edge_decay' must lie in (0, 1)");
  try {
    detector.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("detector: ") + e.what());
  }
  if (!(run.mean_pairs_per_pulse >= 0.0 && run.mean_pairs_per_pulse <= 5.0))
    throw ConfigError("'run.mean_pairs_per_pulse' must lie in [0, 5]");
  for (double c : run.chirps_ps_per_nm) finite(c, "run.chirps_ps_per_nm");
  if (output.matrix_encoding != "binary" && output.matrix_encoding != "csv")
    throw ConfigError("'output.matrix_encoding' must be \"binary\" or \"csv\"");
  if (output.directory.empty()) throw ConfigError("'output.directory' must not be empty");
  if (source.pm_sigma_per_mm == 0.0) {
    PhaseMatchModel pm;
    pm.group_index_pump = source.group_index_pump;
    pm.group_index_signal = source.group_index_signal;
    pm.group_index_idler = source.group_index_idler;
    if (!pm.admits_factorable())
      throw ConfigError(
          "'source.pm_sigma_per_mm' = 0 needs group indices with n_signal > n_pump > n_idler");
  }
}

RunConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  auto table = sections(c);
  for (const auto& [key, value] : doc.items())
    if (!table.count(key)) throw ConfigError("unknown config key '" + key + "'");
  for (const auto& [name, setters] : table) apply_section(doc, name, setters);
  c.validate();
  return c;
}

json config_to_json(const RunConfig& c) {
  const auto& s = c.source;
  const auto& d = c.detector;
  return json{
      {"source",
       {{"pump_center_nm", s.pump_center_nm},
        {"pump_fwhm_nm", s.pump_fwhm_nm},
        {"chirp_ps_per_nm", s.chirp_ps_per_nm},
        {"residual_chirp_ps_per_nm", s.residual_chirp_ps_per_nm},
        {"phase_matching", to_string(s.phase_matching)},
        {"pm_sigma_per_mm", s.pm_sigma_per_mm},
        {"group_index_pump", s.group_index_pump},
        {"group_index_signal", s.group_index_signal},
        {"group_index_idler", s.group_index_idler},
        {"signal_center_nm", s.signal_center_nm}}},
      {"grid",
       {{"n_points", c.grid.n_points},
        {"span_rad_per_ps", c.grid.span_rad_per_ps},
        {"edge_decay", c.grid.edge_decay}}},
      {"detector",
       {{"dispersion_ns_per_nm", d.dispersion_ns_per_nm},
        {"timing_jitter_fwhm_ps", d.timing_jitter_fwhm_ps},
        {"efficiency_signal", d.efficiency_signal},
        {"efficiency_idler", d.efficiency_idler},
        {"n_detectors_per_arm", d.n_detectors_per_arm},
        {"idler_leak_probability", d.idler_leak_probability},
        {"dark_count_rate_per_pulse", d.dark_count_rate_per_pulse}}},
      {"run",
       {{"n_pulses", c.run.n_pulses},
        {"mean_pairs_per_pulse", c.run.mean_pairs_per_pulse},
        {"n_fourfold_events", c.run.n_fourfold_events},
        {"seed", c.run.seed},
        {"threads", c.run.threads},
        {"chirps_ps_per_nm", c.run.chirps_ps_per_nm}}},
      {"output",
       {{"directory", c.output.directory}, {"matrix_encoding", c.output.matrix_encoding}}},
  };
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(doc);
}

void set_config_value(RunConfig& config, const std::string& dotted_key,
                      const std::string& value) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string::npos) throw ConfigError("override key '" + dotted_key + "' needs a section");
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;
  }
  json doc = config_to_json(config);
  doc[dotted_key.substr(0, dot)][dotted_key.substr(dot + 1)] = parsed;
  config = config_from_json(doc);
}

ResolvedSource resolve_source(const SourceSpec& s, double applied_chirp_ps_per_nm) {
  ResolvedSource r;
  r.pump.center_wavelength_nm = s.pump_center_nm;
  r.pump.sigma_p = sigma_from_fwhm_nm(s.pump_fwhm_nm, s.pump_center_nm);
  r.pump.beta = chirp_from_gdd(applied_chirp_ps_per_nm + s.residual_chirp_ps_per_nm,
                               s.pump_center_nm);
  r.phase_matching.kind = s.phase_matching;
  r.phase_matching.group_index_pump = s.group_index_pump;
  r.phase_matching.group_index_signal = s.group_index_signal;
  r.phase_matching.group_index_idler = s.group_index_idler;
  r.phase_matching.sigma = s.pm_sigma_per_mm > 0.0
                               ? s.pm_sigma_per_mm
                               : factorable_pm_sigma(r.pump.sigma_p, r.phase_matching);
  r.signal_center_nm = s.signal_center_nm;
  r.idler_center_nm = idler_center_for(s.pump_center_nm, s.signal_center_nm);
  r.marginal_widths = gaussian_marginal_widths(r.pump.sigma_p, r.phase_matching);
  return r;
}

ResolvedSource resolve_source(const SourceSpec& s) {
  return resolve_source(s, s.chirp_ps_per_nm);
}

FrequencyGrid make_grid(const ResolvedSource& source, const GridSpec& grid) {
  double span = grid.span_rad_per_ps;
  if (span == 0.0) {
    // The amplitude exp(-w^2 / 2 sigma^2) falls to edge_decay at the edges.
    const double w = std::max(source.marginal_widths.signal, source.marginal_widths.idler);
    span = 2.0 * w * std::sqrt(-2.0 * std::log(grid.edge_decay));
  }
  return make_grid(source.signal_center_nm, source.idler_center_nm, span, grid.n_points);
}

JointSpectralAmplitude build_jsa(const RunConfig& config, double applied_chirp_ps_per_nm) {
  const ResolvedSource src = resolve_source(config.source, applied_chirp_ps_per_nm);
  return build_jsa(src.pump, src.phase_matching, make_grid(src, config.grid));
}

JointSpectralAmplitude build_jsa(const RunConfig& config) {
  return build_jsa(config, config.source.chirp_ps_per_nm);
}

}  // namespace jsaphase
