#include "jsaphase/jsa.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace jsaphase {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace

double angular_frequency(double wavelength_nm) {
  require(wavelength_nm > 0.0, "wavelength must be positive");
  return kTwoPi * kSpeedOfLightNmPerPs / wavelength_nm;
}

double wavelength_of(double omega) {
  require(omega > 0.0, "angular frequency must be positive");
  return kTwoPi * kSpeedOfLightNmPerPs / omega;
}

double idler_center_for(double pump_center_nm, double signal_center_nm) {
  const double inv = 1.0 / pump_center_nm - 1.0 / signal_center_nm;
  require(inv > 0.0, "signal centre must exceed the pump centre wavelength");
  return 1.0 / inv;
}

FrequencyAxis::FrequencyAxis(double start, double step, std::size_t count,
                             double center_wavelength_nm)
    : start_(start),
      step_(step),
      count_(count),
      center_wavelength_nm_(center_wavelength_nm) {
  require(count >= 2, "axis needs at least two points");
  require(std::isfinite(step) && step > 0.0, "axis step must be positive");
  require(std::isfinite(start), "axis start must be finite");
  require(center_wavelength_nm > 0.0, "centre wavelength must be positive");
}

double FrequencyAxis::center_frequency() const {
  return angular_frequency(center_wavelength_nm_);
}

std::vector<double> FrequencyAxis::values() const {
  std::vector<double> out(count_);
  for (std::size_t k = 0; k < count_; ++k) out[k] = (*this)[k];
  return out;
}

double FrequencyAxis::wavelength_nm(std::size_t k) const {
  return wavelength_of(center_frequency() + (*this)[k]);
}

double FrequencyAxis::detuning_of_wavelength(double wavelength_nm) const {
  return angular_frequency(wavelength_nm) - center_frequency();
}

std::size_t FrequencyAxis::index_of(double detuning) const {
  const double pos = (detuning - start_) / step_;
  const double k = std::round(pos);
  if (!(k >= 0.0 && k < double(count_)) || std::abs(pos - k) > 1e-6)
    throw std::out_of_range("frequency " + std::to_string(detuning) +
                            " rad/ps is not a grid point");
  return std::size_t(k);
}

std::size_t FrequencyAxis::nearest_index(double detuning) const {
  const double k = std::round((detuning - start_) / step_);
  if (!(k > 0.0)) return 0;
  return std::min(std::size_t(k), count_ - 1);
}

FrequencyGrid make_grid(double signal_center_nm, double idler_center_nm,
                        double span, std::size_t n_points) {
  require(std::isfinite(span) && span > 0.0, "grid span must be positive");
  require(n_points >= 2, "grid needs at least two points");
  const double step = span / double(n_points - 1);
  const double start = -0.5 * span;
  return FrequencyGrid{FrequencyAxis(start, step, n_points, signal_center_nm),
                       FrequencyAxis(start, step, n_points, idler_center_nm)};
}

double chirp_from_gdd(double dispersion_ps_per_nm, double center_wavelength_nm) {
  require(center_wavelength_nm > 0.0, "centre wavelength must be positive");
  return dispersion_ps_per_nm * center_wavelength_nm * center_wavelength_nm /
         (kTwoPi * kSpeedOfLightNmPerPs);
}

double sigma_from_fwhm_nm(double fwhm_nm, double center_nm) {
  require(fwhm_nm > 0.0 && center_nm > 0.0, "bandwidth must be positive");
  // |alpha|^2 = exp(-w^2 / sigma^2) has FWHM 2 sigma sqrt(ln 2).
  const double fwhm_omega =
      kTwoPi * kSpeedOfLightNmPerPs * fwhm_nm / (center_nm * center_nm);
  return fwhm_omega / (2.0 * std::sqrt(std::numbers::ln2));
}

void PumpSpectrum::validate() const {
  require(std::isfinite(sigma_p) && sigma_p > 0.0, "pump width must be positive");
  require(std::isfinite(beta), "pump chirp must be finite");
  require(center_wavelength_nm > 0.0, "pump centre must be positive");
}

std::string to_string(PhaseMatchKind kind) {
  return kind == PhaseMatchKind::Gaussian ? "gaussian" : "sinc";
}

PhaseMatchKind phase_match_kind_from_string(const std::string& name) {
  if (name == "gaussian") return PhaseMatchKind::Gaussian;
  if (name == "sinc") return PhaseMatchKind::Sinc;
  throw std::invalid_argument("unknown phase-matching kind '" + name + "'");
}

void PhaseMatchModel::validate() const {
  require(std::isfinite(sigma) && sigma > 0.0,
          "phase-matching width must be positive");
  require(group_index_pump > 0.0 && group_index_signal > 0.0 &&
              group_index_idler > 0.0,
          "group indices must be positive");
}

bool PhaseMatchModel::admits_factorable() const {
  return group_index_signal > group_index_pump &&
         group_index_pump > group_index_idler;
}

double PhaseMatchModel::delta_k(double omega_s, double omega_i) const {
  return ((group_index_pump - group_index_signal) * omega_s +
          (group_index_pump - group_index_idler) * omega_i) /
         kSpeedOfLightMmPerPs;
}

Complex PhaseMatchModel::value(double omega_s, double omega_i) const {
  const double x = delta_k(omega_s, omega_i) / sigma;
  if (kind == PhaseMatchKind::Gaussian) return std::exp(-0.5 * x * x);
  return std::abs(x) < 1e-12 ? 1.0 : std::sin(x) / x;
}

double factorable_pump_width(const PhaseMatchModel& pm) {
  pm.validate();
  require(pm.admits_factorable(),
          "factorable pump width needs n_s > n_p > n_i");
  return kSpeedOfLightMmPerPs * pm.sigma /
         std::sqrt((pm.group_index_signal - pm.group_index_pump) *
                   (pm.group_index_pump - pm.group_index_idler));
}

double factorable_pm_sigma(double sigma_p, const PhaseMatchModel& pm) {
  require(sigma_p > 0.0, "pump width must be positive");
  require(pm.admits_factorable(),
          "factorable pump width needs n_s > n_p > n_i");
  return sigma_p *
         std::sqrt((pm.group_index_signal - pm.group_index_pump) *
                   (pm.group_index_pump - pm.group_index_idler)) /
         kSpeedOfLightMmPerPs;
}

MarginalWidths gaussian_marginal_widths(double sigma_p,
                                        const PhaseMatchModel& pm) {
  const double cs = kSpeedOfLightMmPerPs * pm.sigma;
  const double ds = pm.group_index_pump - pm.group_index_signal;
  const double di = pm.group_index_pump - pm.group_index_idler;
  return {1.0 / std::sqrt(1.0 / (sigma_p * sigma_p) + ds * ds / (cs * cs)),
          1.0 / std::sqrt(1.0 / (sigma_p * sigma_p) + di * di / (cs * cs))};
}

JointSpectralAmplitude::JointSpectralAmplitude(FrequencyGrid grid,
                                               ComplexMatrix amplitude,
                                               double gamma)
    : grid_(std::move(grid)), amplitude_(std::move(amplitude)), gamma_(gamma) {
  if (std::size_t(amplitude_.rows()) != grid_.signal.size() ||
      std::size_t(amplitude_.cols()) != grid_.idler.size())
    throw std::invalid_argument("amplitude shape does not match the grid");
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  for (Eigen::Index k = 0; k < amplitude_.size(); ++k) {
    const Complex z = amplitude_.data()[k];
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
      throw std::invalid_argument("amplitude has non-finite entries");
  }
  const double n = norm();
  if (!(n > 0.0)) throw std::invalid_argument("amplitude is identically zero");
  amplitude_ /= std::sqrt(n);
}

double JointSpectralAmplitude::norm() const {
  return amplitude_.squaredNorm() * grid_.cell_area();
}

JointSpectralAmplitude JointSpectralAmplitude::conjugate() const {
  return JointSpectralAmplitude(grid_, amplitude_.conjugate(), gamma_);
}

RealMatrix JointSpectralAmplitude::intensity() const {
  return amplitude_.cwiseAbs2();
}

JointSpectralAmplitude build_jsa(const PumpSpectrum& pump,
                                 const PhaseMatchModel& pm,
                                 const FrequencyGrid& grid) {
  pump.validate();
  pm.validate();
  const std::size_t ns = grid.signal.size();
  const std::size_t ni = grid.idler.size();
  ComplexMatrix psi(ns, ni);
  const double inv_var = 1.0 / (pump.sigma_p * pump.sigma_p);
  for (std::size_t a = 0; a < ns; ++a) {
    const double ws = grid.signal[a];
    for (std::size_t b = 0; b < ni; ++b) {
      const double wi = grid.idler[b];
      const double wp = ws + wi;
      const Complex alpha = std::exp(Complex(-0.5 * wp * wp * inv_var,
                                             0.5 * pump.beta * wp * wp));
      psi(a, b) = alpha * pm.value(ws, wi);
    }
  }
  return JointSpectralAmplitude(grid, std::move(psi));
}

JointSpectralAmplitude build_chirped_factorable_jsa(double sigma_s,
                                                    double sigma_i, double beta,
                                                    const FrequencyGrid& grid) {
  require(std::isfinite(sigma_s) && sigma_s > 0.0 && std::isfinite(sigma_i) &&
              sigma_i > 0.0,
          "marginal widths must be positive");
  require(std::isfinite(beta), "beta must be finite");
  const std::size_t ns = grid.signal.size();
  const std::size_t ni = grid.idler.size();
  ComplexMatrix psi(ns, ni);
  for (std::size_t a = 0; a < ns; ++a) {
    const double ws = grid.signal[a];
    const double gs = std::exp(-0.5 * ws * ws / (sigma_s * sigma_s));
    for (std::size_t b = 0; b < ni; ++b) {
      const double wi = grid.idler[b];
      const double gi = std::exp(-0.5 * wi * wi / (sigma_i * sigma_i));
      psi(a, b) = gs * gi * std::polar(1.0, beta * ws * wi);
    }
  }
  return JointSpectralAmplitude(grid, std::move(psi));
}

JointSpectralAmplitude build_separable_jsa(const std::vector<Complex>& signal,
                                           const std::vector<Complex>& idler,
                                           const FrequencyGrid& grid) {
  require(signal.size() == grid.signal.size() &&
              idler.size() == grid.idler.size(),
          "mode vectors must match the grid");
  ComplexMatrix psi(signal.size(), idler.size());
  for (std::size_t a = 0; a < signal.size(); ++a)
    for (std::size_t b = 0; b < idler.size(); ++b)
      psi(a, b) = signal[a] * idler[b];
  return JointSpectralAmplitude(grid, std::move(psi));
}

}  // namespace jsaphase
