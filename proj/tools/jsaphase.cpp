// jsaphase: build JSAs, four-fold maps, purity scans and beta fits from one
// JSON config. Exit codes: 0 ok, 2 config error, 3 insufficient data,
// 4 fit failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "jsaphase/analysis.hpp"
#include "jsaphase/coincidence.hpp"
#include "jsaphase/config.hpp"
#include "jsaphase/detector.hpp"
#include "jsaphase/errors.hpp"
#include "jsaphase/io.hpp"
#include "jsaphase/pipeline.hpp"
#include "jsaphase/schmidt.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace jsaphase;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kNoData = 3, kFit = 4 };

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;
  std::string out;
};

RunConfig resolve_config(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.threads) cfg.run.threads = *c.threads;
  if (c.seed) cfg.run.seed = *c.seed;
  if (!c.out.empty()) cfg.output.directory = c.out;
  cfg.validate();
  return cfg;
}

fs::path out_dir(const RunConfig& cfg) {
  fs::path dir(cfg.output.directory);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

void write_json(const fs::path& path, const json& j) { open_out(path) << j.dump(2) << '\n'; }

std::string chirp_tag(double chirp) { return "chirp_" + format_double(chirp); }

json grid_json(const FrequencyGrid& g) {
  return {{"n_signal", g.signal.size()},
          {"n_idler", g.idler.size()},
          {"step_signal_rad_per_ps", g.signal.step()},
          {"step_idler_rad_per_ps", g.idler.step()},
          {"signal_center_nm", g.signal.center_wavelength_nm()},
          {"idler_center_nm", g.idler.center_wavelength_nm()}};
}

int cmd_build(const RunConfig& cfg) {
  const fs::path dir = out_dir(cfg);
  const JointSpectralAmplitude jsa = build_jsa(cfg);
  const SchmidtDecomposition decomp = schmidt_decompose(jsa);
  const MatrixEncoding enc = matrix_encoding_from_string(cfg.output.matrix_encoding);
  const fs::path jsa_path = dir / (enc == MatrixEncoding::Binary ? "jsa.bin" : "jsa.csv");
  write_jsa(jsa_path.string(), jsa, enc);
  {
    auto f = open_out(dir / "jsi.csv");
    write_jsi_csv(f, jsa);
  }
  {
    auto f = open_out(dir / "schmidt.csv");
    write_schmidt_csv(f, decomp);
  }
  const ResolvedSource src = resolve_source(cfg.source);
  write_json(dir / "build.json", {{"config", config_to_json(cfg)},
                                  {"beta_ps2", src.pump.beta},
                                  {"purity", purity(decomp)},
                                  {"unheralded_g2", unheralded_g2(decomp)},
                                  {"grid", grid_json(jsa.grid())},
                                  {"files", {jsa_path.filename().string(), "jsi.csv", "schmidt.csv"}}});
  std::printf("purity %s  files in %s\n", format_double(purity(decomp)).c_str(), dir.string().c_str());
  return kOk;
}

int cmd_fourfold(const RunConfig& cfg, bool monte_carlo) {
  const fs::path dir = out_dir(cfg);
  const std::uint64_t seed = resolve_seed(cfg.run.seed);
  ProjectionOptions po;
  po.threads = cfg.run.threads;
  json maps = json::array();
  for (std::size_t i = 0; i < cfg.run.chirps_ps_per_nm.size(); ++i) {
    const double chirp = cfg.run.chirps_ps_per_nm[i];
    const std::string tag = chirp_tag(chirp);
    const JointSpectralAmplitude jsa = build_jsa(cfg, chirp);
    const FourfoldBinning binning = FourfoldBinning::defaults(jsa);
    const auto diff = project_fourfold(jsa, FourfoldRepresentation::DifferenceProjection, binning, po);
    const auto prod = project_fourfold(jsa, FourfoldRepresentation::ProductProjection, binning, po);
    {
      auto f = open_out(dir / ("fourfold_difference_" + tag + ".csv"));
      write_fourfold_csv(f, diff);
    }
    {
      auto f = open_out(dir / ("fourfold_product_" + tag + ".csv"));
      write_fourfold_csv(f, prod);
    }
    json entry = {{"chirp_ps_per_nm", chirp},
                  {"beta_ps2", resolve_source(cfg.source, chirp).pump.beta},
                  {"difference", fourfold_metadata(diff)},
                  {"product", fourfold_metadata(prod)}};
    if (monte_carlo) {
      const std::uint64_t s = point_seed(seed, i);
      const auto sample = sample_fourfold_events(jsa, cfg.run.n_fourfold_events, s, cfg.run.threads);
      {
        auto f = open_out(dir / ("events_" + tag + ".csv"));
        write_events_csv(f, sample.events);
      }
      {
        auto f = open_out(dir / ("mc_difference_" + tag + ".csv"));
        write_fourfold_csv(f, histogram_differences(sample.events, binning.signal, binning.idler));
      }
      {
        auto f = open_out(dir / ("mc_product_" + tag + ".csv"));
        write_fourfold_csv(f, histogram_products(sample.events, binning.product));
      }
      entry["monte_carlo"] = {{"seed", s},
                              {"events", sample.events.size()},
                              {"acceptance_rate", sample.acceptance_rate()}};
    }
    maps.push_back(entry);
    std::fprintf(stderr, "fourfold %s done\n", tag.c_str());
  }
  json meta = {{"config", config_to_json(cfg)}, {"maps", maps}};
  if (monte_carlo) meta["seed"] = seed;
  write_json(dir / "fourfold.json", meta);
  return kOk;
}

int cmd_purity_scan(const RunConfig& cfg) {
  const fs::path dir = out_dir(cfg);
  const std::uint64_t seed = resolve_seed(cfg.run.seed);
  std::vector<ScanRow> rows;
  json points = json::array();
  for (std::size_t i = 0; i < cfg.run.chirps_ps_per_nm.size(); ++i) {
    const double chirp = cfg.run.chirps_ps_per_nm[i];
    const PurityPoint p = purity_point(cfg, chirp, point_seed(seed, i), cfg.run.threads);
    rows.push_back({chirp, "oracle", p.oracle, 0.0});
    json point = {{"chirp_ps_per_nm", chirp},
                  {"seed", p.seed},
                  {"oracle", p.oracle},
                  {"signal_signal_total", p.signal_signal},
                  {"accidental_total", p.accidentals},
                  {"errors", p.errors}};
    auto add = [&](const std::string& name, const std::optional<EstimationResult>& r, double shift) {
      if (r) {
        rows.push_back({chirp, name, r->value + shift, r->std_error});
        point[name] = to_json(*r);
      } else {
        rows.push_back({chirp, name, std::numeric_limits<double>::quiet_NaN(), 0.0});
      }
    };
    add("count_ratio", p.count_ratio, 0.0);
    add("width_ratio", p.width_ratio, 0.0);
    add("g2", p.g2, -1.0);
    points.push_back(point);
    std::fprintf(stderr, "chirp %s  oracle %.4f\n", format_double(chirp).c_str(), p.oracle);
    for (const auto& [method, what] : p.errors)
      std::fprintf(stderr, "  %s failed: %s\n", method.c_str(), what.c_str());
  }
  {
    auto f = open_out(dir / "purity_scan.csv");
    write_scan_csv(f, rows);
  }
  write_json(dir / "purity_scan.json",
             {{"config", config_to_json(cfg)}, {"seed", seed}, {"points", points},
              {"note", "g2 rows report g2 - 1"}});
  return kOk;
}

int cmd_fit(const RunConfig& cfg, const std::string& events_path) {
  const fs::path dir = out_dir(cfg);
  const double chirp = cfg.source.chirp_ps_per_nm;
  std::vector<FrequencyQuad> events;
  json meta = {{"config", config_to_json(cfg)}};
  if (!events_path.empty()) {
    std::ifstream in(events_path, std::ios::binary);
    if (!in) throw ConfigError("events: cannot read '" + events_path + "'");
    events = read_events_csv(in);
    meta["events_file"] = events_path;
  } else {
    const std::uint64_t seed = resolve_seed(cfg.run.seed);
    const JointSpectralAmplitude jsa = build_jsa(cfg, chirp);
    events = sample_fourfold_events(jsa, cfg.run.n_fourfold_events, seed, cfg.run.threads).events;
    auto f = open_out(dir / "events.csv");
    write_events_csv(f, events);
    meta["seed"] = seed;
  }
  meta["n_events"] = events.size();

  const BetaFits fits = fit_beta(cfg, chirp, events, cfg.run.threads);
  meta["beta_true_ps2"] = fits.beta_true;
  meta["results"] = json::object();
  if (fits.mle) meta["results"]["mle"] = to_json(*fits.mle);
  if (fits.fringe) meta["results"]["fringe_period"] = to_json(*fits.fringe);
  meta["errors"] = fits.errors;
  for (const auto& [method, profile] : fits.failed_profiles) {
    if (profile.empty()) continue;
    auto f = open_out(dir / ("fit_profile_" + method + ".csv"));
    f << "beta_ps2,objective\n";
    for (const auto& [b, v] : profile) f << format_double(b) << ',' << format_double(v) << '\n';
  }
  write_json(dir / "fit.json", meta);

  for (const auto& [method, what] : fits.errors)
    std::fprintf(stderr, "%s failed: %s\n", method.c_str(), what.c_str());
  if (fits.mle) std::printf("mle |beta| = %s +- %s ps^2\n", format_double(fits.mle->value).c_str(),
                            format_double(fits.mle->std_error).c_str());
  if (fits.fringe)
    std::printf("fringe |beta| = %s +- %s ps^2\n", format_double(fits.fringe->value).c_str(),
                format_double(fits.fringe->std_error).c_str());

  int code = kOk;
  for (const auto& [method, kind] : fits.error_kinds)
    if (code != kNoData) code = kind;
  if (code == kNoData)
    std::fprintf(stderr, "too few events: pass a larger --events file or raise run.n_fourfold_events\n");
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPDC spectral-phase simulator and analysis"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "JSON config file");
    sub->add_option("--set", common.overrides, "Override a config key: section.key=value")
        ->take_all();
    sub->add_option("--threads", common.threads, "Worker cap (0: all cores)");
    sub->add_option("--seed", common.seed, "RNG seed (0: pick and record one)");
    sub->add_option("-o,--out", common.out, "Output directory");
  };

  auto* build = app.add_subcommand("build", "Write the JSA, JSI and Schmidt spectrum");
  add_common(build);
  auto* fourfold = app.add_subcommand("fourfold", "Four-fold difference and product maps per chirp");
  add_common(fourfold);
  bool monte_carlo = false;
  fourfold->add_flag("--mc", monte_carlo, "Also sample quadruples and histogram them");
  auto* scan = app.add_subcommand("purity-scan", "Simulate and estimate purity at each chirp");
  add_common(scan);
  auto* fit = app.add_subcommand("fit", "Fit |beta| by maximum likelihood and fringe period");
  add_common(fit);
  std::string events_path;
  fit->add_option("--events", events_path, "Quadruple CSV (omega_s,omega_i,omega_s2,omega_i2)");
  auto* emit = app.add_subcommand("emit-config", "Print the resolved config as JSON");
  add_common(emit);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    const RunConfig cfg = resolve_config(common);
    if (*build) return cmd_build(cfg);
    if (*fourfold) return cmd_fourfold(cfg, monte_carlo);
    if (*scan) return cmd_purity_scan(cfg);
    if (*fit) return cmd_fit(cfg, events_path);
    std::cout << config_to_json(cfg).dump(2) << '\n';
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const InsufficientDataError& e) {
    std::cerr << "insufficient data: " << e.what() << '\n';
    return kNoData;
  } catch (const FitError& e) {
    std::cerr << "fit failed: " << e.what() << '\n';
    return kFit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
