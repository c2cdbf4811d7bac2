#pragma once

#include <vector>

#include "jsaphase/jsa.hpp"

namespace jsaphase {

/// Schmidt decomposition psi(ws, wi) = sum_j xi_j u_j(ws) v_j(wi) of a
/// normalised JSA. Coefficients are descending; each signal mode is phased so
/// its largest-magnitude entry is real and positive. Modes are orthonormal
/// under the step-weighted inner product.
struct SchmidtDecomposition {
  FrequencyGrid grid;
  std::vector<double> xi;
  ComplexMatrix signal_modes;  ///< n_signal x n_modes, column j = u_j
  ComplexMatrix idler_modes;   ///< n_idler x n_modes, column j = v_j

  std::size_t n_modes() const { return xi.size(); }
  /// Modes kept for sampling: xi_j / xi_0 > 1e-8.
  std::size_t significant_modes(double relative_cutoff = 1e-8) const;
  /// sum_j xi_j u_j(ws) v_j(wi).
  ComplexMatrix reconstruct() const;
};

/// Throws std::runtime_error when the SVD does not produce finite output.
SchmidtDecomposition schmidt_decompose(const JointSpectralAmplitude& jsa);

/// sum xi^4 / (sum xi^2)^2.
double purity(const SchmidtDecomposition& decomp);
double purity(const std::vector<double>& xi);

/// Reduced single-photon density function
/// rho_s(ws, ws') = int psi(ws, wi) psi*(ws', wi) dwi (Riemann sum).
class DensityFunction {
 public:
  DensityFunction(FrequencyAxis axis, ComplexMatrix matrix);

  const FrequencyAxis& axis() const { return axis_; }
  const ComplexMatrix& matrix() const { return matrix_; }
  std::size_t size() const { return axis_.size(); }
  Complex operator()(std::size_t a, std::size_t b) const {
    return matrix_(Eigen::Index(a), Eigen::Index(b));
  }

  /// sum_a rho(a, a) dws
  double trace() const;
  /// Integral of |rho|^2 over both arguments; the photon purity.
  double purity() const;
  /// max |rho(a, b) - conj(rho(b, a))|
  double hermiticity_error() const;

 private:
  FrequencyAxis axis_;
  ComplexMatrix matrix_;
};

DensityFunction reduced_density(const JointSpectralAmplitude& jsa);

enum class Photon { Signal, Idler };

/// Psi_x(w) = int |psi|^2 over the other photon; integrates to one with the
/// axis step.
std::vector<double> marginal_spectrum(const JointSpectralAmplitude& jsa,
                                      Photon which);

}  // namespace jsaphase
