#include "jsaphase/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace jsaphase {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "jsaphase-matrix";
constexpr int kVersion = 1;

json axis_json(const FrequencyAxis& a) {
  return {{"start", a.start()},
          {"step", a.step()},
          {"count", a.size()},
          {"center_wavelength_nm", a.center_wavelength_nm()}};
}

FrequencyAxis axis_from_json(const json& j) {
  return FrequencyAxis(j.at("start").get<double>(), j.at("step").get<double>(),
                       j.at("count").get<std::size_t>(),
                       j.at("center_wavelength_nm").get<double>());
}

void put_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int k = 0; k < 8; ++k) buf[k] = char((bits >> (8 * k)) & 0xFF);
  out.write(buf, 8);
}

double get_le(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8))
    throw std::runtime_error("matrix body is truncated");
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= std::uint64_t(buf[k]) << (8 * k);
  return std::bit_cast<double>(bits);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw std::runtime_error("cannot parse number '" + s + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::ofstream open_out(const std::string& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  return in;
}

void expect_header(std::istream& in, const std::string& header) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("missing CSV header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header)
    throw std::runtime_error("unexpected CSV header '" + line + "', want '" + header + "'");
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

MatrixEncoding matrix_encoding_from_string(const std::string& name) {
  if (name == "binary") return MatrixEncoding::Binary;
  if (name == "csv") return MatrixEncoding::Csv;
  throw std::invalid_argument("unknown matrix encoding '" + name + "'");
}

void write_matrix(std::ostream& out, const MatrixFile& f, MatrixEncoding encoding) {
  if (std::size_t(f.matrix.rows()) != f.row_axis.size() ||
      std::size_t(f.matrix.cols()) != f.col_axis.size())
    throw std::invalid_argument("matrix shape does not match its axes");
  const json header = {
      {"format", kFormat},
      {"version", kVersion},
      {"kind", f.kind == MatrixKind::Jsa ? "jsa" : "density"},
      {"encoding", encoding == MatrixEncoding::Binary ? "binary" : "csv"},
      {"rows", f.matrix.rows()},
      {"cols", f.matrix.cols()},
      {"gamma", f.gamma},
      {"axes", {{"rows", axis_json(f.row_axis)}, {"cols", axis_json(f.col_axis)}}},
      {"units", {{"axes", "rad/ps detuning"}, {"values", "ps"}}},
  };
  out << header.dump() << '\n';
  for (Eigen::Index i = 0; i < f.matrix.rows(); ++i)
    for (Eigen::Index j = 0; j < f.matrix.cols(); ++j) {
      const Complex z = f.matrix(i, j);
      if (encoding == MatrixEncoding::Binary) {
        put_le(out, z.real());
        put_le(out, z.imag());
      } else {
        out << format_double(z.real()) << ',' << format_double(z.imag()) << '\n';
      }
    }
}

MatrixFile read_matrix(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty matrix file");
  json h;
  try {
    h = json::parse(line);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("bad matrix header: ") + e.what());
  }
  MatrixFile f;
  try {
    if (h.at("format") != kFormat) throw std::runtime_error("not a jsaphase matrix file");
    if (h.at("version") != kVersion) throw std::runtime_error("unsupported matrix file version");
    const auto kind = h.at("kind").get<std::string>();
    if (kind != "jsa" && kind != "density") throw std::runtime_error("unknown matrix kind " + kind);
    f.kind = kind == "jsa" ? MatrixKind::Jsa : MatrixKind::Density;
    f.row_axis = axis_from_json(h.at("axes").at("rows"));
    f.col_axis = axis_from_json(h.at("axes").at("cols"));
    f.gamma = h.value("gamma", 1.0);
    const auto rows = h.at("rows").get<std::size_t>(), cols = h.at("cols").get<std::size_t>();
    if (rows != f.row_axis.size() || cols != f.col_axis.size())
      throw std::runtime_error("matrix header shape disagrees with its axes");
    f.matrix.resize(Eigen::Index(rows), Eigen::Index(cols));
    const bool binary = matrix_encoding_from_string(h.at("encoding").get<std::string>()) ==
                        MatrixEncoding::Binary;
    for (Eigen::Index i = 0; i < f.matrix.rows(); ++i)
      for (Eigen::Index j = 0; j < f.matrix.cols(); ++j) {
        if (binary) {
          const double re = get_le(in);
          f.matrix(i, j) = Complex(re, get_le(in));
        } else {
          if (!std::getline(in, line)) throw std::runtime_error("matrix body is truncated");
          const auto cells = split_csv(line);
          if (cells.size() != 2) throw std::runtime_error("bad matrix CSV line '" + line + "'");
          f.matrix(i, j) = Complex(parse_double(cells[0]), parse_double(cells[1]));
        }
      }
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("bad matrix header: ") + e.what());
  }
  return f;
}

void write_jsa(const std::string& path, const JointSpectralAmplitude& jsa,
               MatrixEncoding encoding) {
  auto out = open_out(path, true);
  write_matrix(out, {MatrixKind::Jsa, jsa.grid().signal, jsa.grid().idler, jsa.amplitude(),
                     jsa.gamma()},
               encoding);
}

JointSpectralAmplitude read_jsa(const std::string& path) {
  auto in = open_in(path);
  MatrixFile f = read_matrix(in);
  if (f.kind != MatrixKind::Jsa) throw std::runtime_error("'" + path + "' holds a density, not a JSA");
  return JointSpectralAmplitude({f.row_axis, f.col_axis}, std::move(f.matrix), f.gamma);
}

void write_density(const std::string& path, const DensityFunction& rho,
                   MatrixEncoding encoding) {
  auto out = open_out(path, true);
  write_matrix(out, {MatrixKind::Density, rho.axis(), rho.axis(), rho.matrix(), 1.0}, encoding);
}

DensityFunction read_density(const std::string& path) {
  auto in = open_in(path);
  MatrixFile f = read_matrix(in);
  if (f.kind != MatrixKind::Density) throw std::runtime_error("'" + path + "' holds a JSA, not a density");
  return DensityFunction(f.row_axis, std::move(f.matrix));
}

void write_jsi_csv(std::ostream& out, const JointSpectralAmplitude& jsa) {
  const auto& g = jsa.grid();
  out << "omega_s,omega_i,wavelength_s_nm,wavelength_i_nm,intensity\n";
  for (std::size_t a = 0; a < g.signal.size(); ++a)
    for (std::size_t b = 0; b < g.idler.size(); ++b)
      out << format_double(g.signal[a]) << ',' << format_double(g.idler[b]) << ','
          << format_double(g.signal.wavelength_nm(a)) << ','
          << format_double(g.idler.wavelength_nm(b)) << ','
          << format_double(std::norm(jsa(a, b))) << '\n';
}

void write_schmidt_csv(std::ostream& out, const SchmidtDecomposition& d) {
  double total = 0.0;
  for (double x : d.xi) total += x * x;
  out << "mode,coefficient,weight\n";
  for (std::size_t j = 0; j < d.xi.size(); ++j)
    out << j << ',' << format_double(d.xi[j]) << ',' << format_double(d.xi[j] * d.xi[j] / total)
        << '\n';
}

void write_fourfold_csv(std::ostream& out, const FourfoldDistribution& dist) {
  switch (dist.representation) {
    case FourfoldRepresentation::ProductProjection: {
      const auto& ax = dist.axes.at(0);
      out << "product,bin_mean,value\n";
      for (std::size_t k = 0; k < ax.count; ++k)
        out << format_double(ax.center(k)) << ','
            << format_double(dist.bin_mean.size() == ax.count ? dist.bin_mean[k] : ax.center(k))
            << ',' << format_double(dist.values[k]) << '\n';
      break;
    }
    case FourfoldRepresentation::DifferenceProjection: {
      const auto& xs = dist.axes.at(0);
      const auto& xi = dist.axes.at(1);
      out << "delta_signal,delta_idler,value\n";
      for (std::size_t i = 0; i < xs.count; ++i)
        for (std::size_t j = 0; j < xi.count; ++j)
          out << format_double(xs.center(i)) << ',' << format_double(xi.center(j)) << ','
              << format_double(dist.at(i, j)) << '\n';
      break;
    }
    case FourfoldRepresentation::FullTensor: {
      out << "index,value\n";
      for (std::size_t k = 0; k < dist.values.size(); ++k)
        out << k << ',' << format_double(dist.values[k]) << '\n';
      break;
    }
  }
}

json fourfold_metadata(const FourfoldDistribution& dist) {
  json axes = json::array();
  for (const auto& a : dist.axes) axes.push_back({{"count", a.count}, {"lo", a.lo}, {"hi", a.hi}});
  const bool freq = dist.coordinate == DifferenceCoordinate::Frequency;
  return {{"representation", to_string(dist.representation)},
          {"coordinate", to_string(dist.coordinate)},
          {"units", dist.representation == FourfoldRepresentation::ProductProjection
                        ? (freq ? "rad^2/ps^2" : "nm^2")
                        : (freq ? "rad/ps" : "nm")},
          {"axes", axes},
          {"shape", dist.shape},
          {"normalized", dist.normalized},
          {"total_mass", dist.total_mass},
          {"overflow_fraction", dist.overflow_fraction}};
}

void write_records_csv(std::ostream& out, const std::vector<DetectionRecord>& records) {
  out << "pulse_index,arm,detector_index,inferred_wavelength_nm\n";
  for (const auto& r : records)
    out << r.pulse_index << ',' << to_string(r.arm) << ',' << r.detector_index << ','
        << format_double(r.inferred_wavelength_nm) << '\n';
}

std::vector<DetectionRecord> read_records_csv(std::istream& in) {
  expect_header(in, "pulse_index,arm,detector_index,inferred_wavelength_nm");
  std::vector<DetectionRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 4) throw std::runtime_error("bad record line '" + line + "'");
    if (c[1] != "signal" && c[1] != "idler") throw std::runtime_error("bad arm '" + c[1] + "'");
    out.push_back({std::stoull(c[0]), c[1] == "signal" ? Arm::Signal : Arm::Idler,
                   std::uint32_t(std::stoul(c[2])), parse_double(c[3])});
  }
  return out;
}

void write_events_csv(std::ostream& out, const std::vector<FrequencyQuad>& events) {
  out << "omega_s,omega_i,omega_s2,omega_i2\n";
  for (const auto& q : events)
    out << format_double(q.signal) << ',' << format_double(q.idler) << ','
        << format_double(q.signal2) << ',' << format_double(q.idler2) << '\n';
}

std::vector<FrequencyQuad> read_events_csv(std::istream& in) {
  expect_header(in, "omega_s,omega_i,omega_s2,omega_i2");
  std::vector<FrequencyQuad> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 4) throw std::runtime_error("bad event line '" + line + "'");
    out.push_back({parse_double(c[0]), parse_double(c[1]), parse_double(c[2]), parse_double(c[3])});
  }
  return out;
}

json to_json(const EstimationResult& r) {
  json profile = json::array();
  for (const auto& [x, y] : r.profile) profile.push_back({x, y});
  return {{"value", r.value},
          {"std_error", r.std_error},
          {"method", to_string(r.method)},
          {"n_events_used", r.n_events_used},
          {"diagnostics", r.diagnostics},
          {"profile", profile}};
}

void write_scan_csv(std::ostream& out, const std::vector<ScanRow>& rows) {
  out << "chirp_ps_per_nm,method,value,std_error\n";
  for (const auto& r : rows)
    out << format_double(r.chirp_ps_per_nm) << ',' << r.method << ',' << format_double(r.value)
        << ',' << format_double(r.std_error) << '\n';
}

}  // namespace jsaphase
