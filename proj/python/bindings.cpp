#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "jsaphase/analysis.hpp"
#include "jsaphase/coincidence.hpp"
#include "jsaphase/config.hpp"
#include "jsaphase/detector.hpp"
#include "jsaphase/errors.hpp"
#include "jsaphase/io.hpp"
#include "jsaphase/pipeline.hpp"
#include "jsaphase/schmidt.hpp"

namespace py = pybind11;
using namespace jsaphase;

namespace {

// Configs cross the boundary as JSON text; the Python wrapper converts dicts.
RunConfig parse_config(const std::string& text) {
  return text.empty() ? RunConfig{} : config_from_json(nlohmann::json::parse(text));
}

py::dict result_dict(const EstimationResult& r) {
  return py::module_::import("json").attr("loads")(to_json(r).dump());
}

py::array_t<double> events_array(const std::vector<FrequencyQuad>& events) {
  py::array_t<double> out({py::ssize_t(events.size()), py::ssize_t(4)});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t k = 0; k < events.size(); ++k) {
    const py::ssize_t i = py::ssize_t(k);
    v(i, 0) = events[k].signal, v(i, 1) = events[k].idler;
    v(i, 2) = events[k].signal2, v(i, 3) = events[k].idler2;
  }
  return out;
}

std::vector<FrequencyQuad> events_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 || a.shape(1) != 4) throw std::invalid_argument("events must have shape (n, 4)");
  auto v = a.unchecked<2>();
  std::vector<FrequencyQuad> out(std::size_t(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[std::size_t(i)] = {v(i, 0), v(i, 1), v(i, 2), v(i, 3)};
  return out;
}

py::dict distribution_dict(const FourfoldDistribution& d) {
  py::dict out;
  out["representation"] = to_string(d.representation);
  std::vector<py::ssize_t> shape(d.shape.begin(), d.shape.end());
  py::array_t<double> values(shape);
  std::copy(d.values.begin(), d.values.end(), values.mutable_data());
  out["values"] = values;
  py::list edges;
  for (const auto& a : d.axes) {
    std::vector<double> c(a.count);
    for (std::size_t k = 0; k < a.count; ++k) c[k] = a.center(k);
    edges.append(py::array_t<double>(py::ssize_t(c.size()), c.data()));
  }
  out["centers"] = edges;
  if (!d.bin_mean.empty()) out["bin_mean"] = d.bin_mean;
  out["total_mass"] = d.total_mass;
  out["overflow_fraction"] = d.overflow_fraction;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "SPDC joint spectral amplitude simulation and spectral-phase analysis";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InsufficientDataError>(m, "InsufficientDataError", PyExc_RuntimeError);
  py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);

  py::class_<JointSpectralAmplitude>(m, "JSA")
      .def_property_readonly("amplitude", [](const JointSpectralAmplitude& j) { return j.amplitude(); })
      .def_property_readonly("intensity", &JointSpectralAmplitude::intensity)
      .def_property_readonly("signal_axis", [](const JointSpectralAmplitude& j) { return j.grid().signal.values(); })
      .def_property_readonly("idler_axis", [](const JointSpectralAmplitude& j) { return j.grid().idler.values(); })
      .def_property_readonly("signal_center_nm",
                             [](const JointSpectralAmplitude& j) { return j.grid().signal.center_wavelength_nm(); })
      .def_property_readonly("idler_center_nm",
                             [](const JointSpectralAmplitude& j) { return j.grid().idler.center_wavelength_nm(); })
      .def_property_readonly("gamma", &JointSpectralAmplitude::gamma)
      .def("norm", &JointSpectralAmplitude::norm)
      .def("conjugate", &JointSpectralAmplitude::conjugate);

  m.def("chirp_from_gdd", &chirp_from_gdd, py::arg("dispersion_ps_per_nm"), py::arg("center_wavelength_nm"));
  m.def("chirped_factorable_jsa",
        [](double sigma_s, double sigma_i, double beta, double span, std::size_t n_points) {
          return build_chirped_factorable_jsa(sigma_s, sigma_i, beta, make_grid(1554.0, 1554.0, span, n_points));
        },
        py::arg("sigma_s"), py::arg("sigma_i"), py::arg("beta"), py::arg("span"), py::arg("n_points") = 128);
  m.def("build_jsa",
        [](const std::string& config, std::optional<double> chirp) {
          const RunConfig cfg = parse_config(config);
          return chirp ? build_jsa(cfg, *chirp) : build_jsa(cfg);
        },
        py::arg("config") = "", py::arg("chirp_ps_per_nm") = py::none());
  m.def("default_config", [] { return config_to_json(RunConfig{}).dump(); });
  m.def("normalize_config", [](const std::string& text) {
    RunConfig cfg = parse_config(text);
    cfg.validate();
    return config_to_json(cfg).dump();
  });

  m.def("schmidt_coefficients", [](const JointSpectralAmplitude& j) { return schmidt_decompose(j).xi; });
  m.def("purity", [](const JointSpectralAmplitude& j) { return purity(schmidt_decompose(j)); });
  m.def("unheralded_g2", [](const JointSpectralAmplitude& j) { return unheralded_g2(schmidt_decompose(j)); });
  m.def("reduced_density", [](const JointSpectralAmplitude& j) { return reduced_density(j).matrix(); });

  m.def("four_photon_probability",
        [](const JointSpectralAmplitude& j, double ws, double wi, double ws2, double wi2) {
          return four_photon_probability(j, FrequencyQuad{ws, wi, ws2, wi2});
        });
  m.def("fringe_closed_form",
        [](const JointSpectralAmplitude& j, double beta, double ws, double wi, double ws2, double wi2) {
          return fringe_closed_form(make_marginals(j), beta, FrequencyQuad{ws, wi, ws2, wi2});
        });
  m.def("project_fourfold",
        [](const JointSpectralAmplitude& j, const std::string& representation, std::size_t threads) {
          FourfoldRepresentation rep;
          if (representation == "difference") rep = FourfoldRepresentation::DifferenceProjection;
          else if (representation == "product") rep = FourfoldRepresentation::ProductProjection;
          else throw std::invalid_argument("representation must be 'difference' or 'product'");
          ProjectionOptions po;
          po.threads = threads;
          FourfoldDistribution d;
          {
            py::gil_scoped_release release;
            d = project_fourfold(j, rep, FourfoldBinning::defaults(j), po);
          }
          return distribution_dict(d);
        },
        py::arg("jsa"), py::arg("representation") = "difference", py::arg("threads") = 0);
  m.def("sample_fourfold_events",
        [](const JointSpectralAmplitude& j, std::size_t n, std::uint64_t seed, std::size_t threads) {
          FourfoldSample s;
          {
            py::gil_scoped_release release;
            s = sample_fourfold_events(j, n, seed, threads);
          }
          return events_array(s.events);
        },
        py::arg("jsa"), py::arg("n_events"), py::arg("seed"), py::arg("threads") = 0);

  m.def("fit_beta_mle",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& events,
           const JointSpectralAmplitude& j) { return result_dict(fit_beta_mle(events_from(events), make_marginals(j))); },
        py::arg("events"), py::arg("jsa"));
  m.def("fit_beta",
        [](const std::string& config, double chirp,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& events, std::size_t threads) {
          const BetaFits f = fit_beta(parse_config(config), chirp, events_from(events), threads);
          py::dict out;
          out["beta_true"] = f.beta_true;
          out["mle"] = f.mle ? py::object(result_dict(*f.mle)) : py::object(py::none());
          out["fringe_period"] = f.fringe ? py::object(result_dict(*f.fringe)) : py::object(py::none());
          out["errors"] = f.errors;
          return out;
        },
        py::arg("config"), py::arg("chirp_ps_per_nm"), py::arg("events"), py::arg("threads") = 0);
  m.def("purity_point",
        [](const std::string& config, double chirp, std::uint64_t seed, std::size_t threads) {
          PurityPoint p;
          {
            py::gil_scoped_release release;
            p = purity_point(parse_config(config), chirp, seed, threads);
          }
          py::dict out;
          out["chirp_ps_per_nm"] = p.chirp_ps_per_nm;
          out["oracle"] = p.oracle;
          out["seed"] = p.seed;
          auto put = [&](const char* name, const std::optional<EstimationResult>& r) {
            out[name] = r ? py::object(result_dict(*r)) : py::object(py::none());
          };
          put("count_ratio", p.count_ratio);
          put("width_ratio", p.width_ratio);
          put("g2", p.g2);
          out["errors"] = p.errors;
          return out;
        },
        py::arg("config"), py::arg("chirp_ps_per_nm"), py::arg("seed"), py::arg("threads") = 0);
  m.def("analytic_purity_estimates", [](const JointSpectralAmplitude& j) {
    const SignalSignalTerms terms = signal_signal_terms(j);
    py::dict out;
    out["count_ratio"] = purity_from_count_ratio(terms).value;
    out["width_ratio"] = purity_from_width_ratio(interference_term(terms)).value;
    out["g2_minus_1"] = unheralded_g2(schmidt_decompose(j)) - 1.0;
    return out;
  });
}
