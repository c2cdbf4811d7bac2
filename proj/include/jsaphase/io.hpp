#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "jsaphase/analysis.hpp"
#include "jsaphase/coincidence.hpp"
#include "jsaphase/detector.hpp"
#include "jsaphase/jsa.hpp"
#include "jsaphase/schmidt.hpp"

namespace jsaphase {

enum class MatrixKind { Jsa, Density };
enum class MatrixEncoding { Binary, Csv };

MatrixEncoding matrix_encoding_from_string(const std::string& name);

/// Complex matrix file: one line of JSON header, '\n', then the body.
/// Binary bodies are little-endian float64 (re, im) pairs, row-major; CSV
/// bodies hold one "re,im" line per entry in the same order. Rows run over
/// the first axis (signal for JSAs).
struct MatrixFile {
  MatrixKind kind = MatrixKind::Jsa;
  FrequencyAxis row_axis{0.0, 1.0, 2, 1.0};
  FrequencyAxis col_axis{0.0, 1.0, 2, 1.0};
  ComplexMatrix matrix;
  double gamma = 1.0;
};

void write_matrix(std::ostream& out, const MatrixFile& file, MatrixEncoding encoding);
/// Throws std::runtime_error on a malformed header or truncated body.
MatrixFile read_matrix(std::istream& in);

void write_jsa(const std::string& path, const JointSpectralAmplitude& jsa,
               MatrixEncoding encoding = MatrixEncoding::Binary);
JointSpectralAmplitude read_jsa(const std::string& path);
void write_density(const std::string& path, const DensityFunction& rho,
                   MatrixEncoding encoding = MatrixEncoding::Binary);
DensityFunction read_density(const std::string& path);

/// omega_s,omega_i,wavelength_s_nm,wavelength_i_nm,intensity
void write_jsi_csv(std::ostream& out, const JointSpectralAmplitude& jsa);
/// mode,coefficient,weight
void write_schmidt_csv(std::ostream& out, const SchmidtDecomposition& decomp);
/// Bin centres and values; product projections add the per-bin mean.
void write_fourfold_csv(std::ostream& out, const FourfoldDistribution& dist);
nlohmann::json fourfold_metadata(const FourfoldDistribution& dist);

/// pulse_index,arm,detector_index,inferred_wavelength_nm
void write_records_csv(std::ostream& out, const std::vector<DetectionRecord>& records);
std::vector<DetectionRecord> read_records_csv(std::istream& in);

/// omega_s,omega_i,omega_s2,omega_i2 (rad/ps detunings)
void write_events_csv(std::ostream& out, const std::vector<FrequencyQuad>& events);
std::vector<FrequencyQuad> read_events_csv(std::istream& in);

nlohmann::json to_json(const EstimationResult& result);

struct ScanRow {
  double chirp_ps_per_nm;
  std::string method;
  double value;
  double std_error;
};

/// chirp_ps_per_nm,method,value,std_error
void write_scan_csv(std::ostream& out, const std::vector<ScanRow>& rows);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace jsaphase
