#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace jsaphase {

using Complex = std::complex<double>;
using ComplexMatrix =
    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Speed of light in nm/ps.
inline constexpr double kSpeedOfLightNmPerPs = 299792.458;
/// Speed of light in mm/ps, used for the phase-mismatch variable.
inline constexpr double kSpeedOfLightMmPerPs = 0.299792458;

/// Angular frequency (rad/ps) of a vacuum wavelength in nm.
double angular_frequency(double wavelength_nm);
/// Vacuum wavelength (nm) of an angular frequency in rad/ps.
double wavelength_of(double angular_frequency_rad_per_ps);
/// Idler centre fixed by energy conservation with the pump and signal centres.
double idler_center_for(double pump_center_nm, double signal_center_nm);

/// Uniform axis of angular-frequency detunings (rad/ps) around a centre
/// wavelength.
class FrequencyAxis {
 public:
  FrequencyAxis(double start, double step, std::size_t count,
                double center_wavelength_nm);

  double start() const { return start_; }
  double step() const { return step_; }
  std::size_t size() const { return count_; }
  double center_wavelength_nm() const { return center_wavelength_nm_; }
  double center_frequency() const;

  double operator[](std::size_t k) const { return start_ + step_ * double(k); }
  std::vector<double> values() const;

  /// Absolute wavelength (nm) of grid point k (exact, not linearised).
  double wavelength_nm(std::size_t k) const;
  /// Detuning (rad/ps) of an absolute wavelength relative to the centre.
  double detuning_of_wavelength(double wavelength_nm) const;

  /// Index of the grid point equal to `detuning`; throws std::out_of_range
  /// when the value is not on the grid.
  std::size_t index_of(double detuning) const;
  /// Nearest grid index, clamped to the axis.
  std::size_t nearest_index(double detuning) const;

  double min() const { return start_; }
  double max() const { return (*this)[count_ - 1]; }

  bool operator==(const FrequencyAxis& other) const = default;

 private:
  double start_;
  double step_;
  std::size_t count_;
  double center_wavelength_nm_;
};

/// Discretised signal and idler frequency axes.
struct FrequencyGrid {
  FrequencyAxis signal;
  FrequencyAxis idler;

  double cell_area() const { return signal.step() * idler.step(); }
  bool operator==(const FrequencyGrid& other) const = default;
};

/// Symmetric grid of `n_points` covering [-span/2, span/2] for both photons.
FrequencyGrid make_grid(double signal_center_nm, double idler_center_nm,
                        double span, std::size_t n_points);

/// Converts a pump group-delay dispersion (ps/nm) into the chirp coefficient
/// beta (ps^2): beta = D * lambda^2 / (2 pi c). Positive D gives positive beta.
double chirp_from_gdd(double dispersion_ps_per_nm, double center_wavelength_nm);
/// Bandwidth conversion: intensity FWHM in nm at `center_nm` to the Gaussian
/// amplitude width sigma (rad/ps) of exp(-w^2 / (2 sigma^2)).
double sigma_from_fwhm_nm(double fwhm_nm, double center_nm);

struct PumpSpectrum {
  double sigma_p = 1.0;  ///< rad/ps, Gaussian amplitude width
  double beta = 0.0;     ///< ps^2, linear chirp
  double center_wavelength_nm = 777.0;

  void validate() const;
};

enum class PhaseMatchKind { Gaussian, Sinc };

std::string to_string(PhaseMatchKind kind);
PhaseMatchKind phase_match_kind_from_string(const std::string& name);

struct PhaseMatchModel {
  PhaseMatchKind kind = PhaseMatchKind::Gaussian;
  double sigma = 1.0;  ///< rad/mm, width of the phase-mismatch acceptance
  double group_index_pump = 1.83;
  double group_index_signal = 1.86;
  double group_index_idler = 1.80;

  void validate() const;
  /// True when n_s > n_p > n_i, the ordering that admits a factorable JSA.
  bool admits_factorable() const;
  /// Phase mismatch (rad/mm) for signal/idler detunings in rad/ps.
  double delta_k(double omega_s, double omega_i) const;
  Complex value(double omega_s, double omega_i) const;
};

/// Pump width that removes signal-idler correlation for a Gaussian
/// phase-matching function: sigma_p = c sigma [(n_s - n_p)(n_p - n_i)]^-1/2.
double factorable_pump_width(const PhaseMatchModel& pm);
/// Phase-matching width that makes a given pump width factorable.
double factorable_pm_sigma(double sigma_p, const PhaseMatchModel& pm);

struct MarginalWidths {
  double signal;
  double idler;
};

/// Gaussian marginal amplitude widths of the pump x Gaussian phase-matching
/// product: sigma_x^-2 = sigma_p^-2 + (n_p - n_x)^2 (c sigma)^-2.
MarginalWidths gaussian_marginal_widths(double sigma_p,
                                        const PhaseMatchModel& pm);

/// Discretised joint spectral amplitude on a frequency grid. Entries are
/// normalised so that sum |psi|^2 * dws * dwi = 1.
class JointSpectralAmplitude {
 public:
  /// Normalises `amplitude`; throws on non-finite entries, a zero matrix, or a
  /// shape that does not match the grid.
  JointSpectralAmplitude(FrequencyGrid grid, ComplexMatrix amplitude,
                         double gamma = 1.0);

  const FrequencyGrid& grid() const { return grid_; }
  const ComplexMatrix& amplitude() const { return amplitude_; }
  double gamma() const { return gamma_; }
  std::size_t n_signal() const { return grid_.signal.size(); }
  std::size_t n_idler() const { return grid_.idler.size(); }

  Complex operator()(std::size_t a, std::size_t b) const {
    return amplitude_(Eigen::Index(a), Eigen::Index(b));
  }

  /// Riemann-sum norm sum |psi|^2 dws dwi.
  double norm() const;
  /// Complex conjugate JSA (beta -> -beta for chirped sources).
  JointSpectralAmplitude conjugate() const;
  /// Joint spectral intensity |psi|^2.
  RealMatrix intensity() const;

 private:
  FrequencyGrid grid_;
  ComplexMatrix amplitude_;
  double gamma_;
};

/// psi(ws, wi) = alpha(ws + wi) phi(dk(ws, wi)) with a Gaussian, linearly
/// chirped pump alpha(wp) = exp(-wp^2 / 2 sigma_p^2) exp(i beta wp^2 / 2).
JointSpectralAmplitude build_jsa(const PumpSpectrum& pump,
                                 const PhaseMatchModel& pm,
                                 const FrequencyGrid& grid);

/// psi(ws, wi) = exp(-ws^2 / 2 sigma_s^2) exp(-wi^2 / 2 sigma_i^2)
///               exp(i beta ws wi).
JointSpectralAmplitude build_chirped_factorable_jsa(double sigma_s,
                                                    double sigma_i,
                                                    double beta,
                                                    const FrequencyGrid& grid);

/// Separable JSA from signal and idler amplitude vectors.
JointSpectralAmplitude build_separable_jsa(const std::vector<Complex>& signal,
                                           const std::vector<Complex>& idler,
                                           const FrequencyGrid& grid);

}  // namespace jsaphase
