#include "jsaphase/schmidt.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/SVD>

namespace jsaphase {

std::size_t SchmidtDecomposition::significant_modes(
    double relative_cutoff) const {
  if (xi.empty() || xi.front() <= 0.0) return 0;
  std::size_t k = 1;
  while (k < xi.size() && xi[k] / xi.front() > relative_cutoff) ++k;
  return k;
}

ComplexMatrix SchmidtDecomposition::reconstruct() const {
  ComplexMatrix out = ComplexMatrix::Zero(signal_modes.rows(), idler_modes.rows());
  for (std::size_t j = 0; j < xi.size(); ++j)
    out.noalias() += xi[j] * signal_modes.col(Eigen::Index(j)) *
                     idler_modes.col(Eigen::Index(j)).transpose();
  return out;
}

SchmidtDecomposition schmidt_decompose(const JointSpectralAmplitude& jsa) {
  const FrequencyGrid& grid = jsa.grid();
  const double hs = grid.signal.step();
  const double hi = grid.idler.step();

  // Step-weighted matrix: its singular values are the Schmidt coefficients.
  Eigen::MatrixXcd weighted = jsa.amplitude() * std::sqrt(hs * hi);
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(weighted,
                                      Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const Eigen::MatrixXcd& u = svd.matrixU();
  const Eigen::MatrixXcd& v = svd.matrixV();
  if (!sv.allFinite() || !u.allFinite() || !v.allFinite())
    throw std::runtime_error("Schmidt decomposition failed: non-finite SVD");

  const Eigen::Index m = sv.size();
  SchmidtDecomposition out{grid, std::vector<double>(std::size_t(m)),
                           ComplexMatrix(u.rows(), m), ComplexMatrix(v.rows(), m)};
  for (Eigen::Index j = 0; j < m; ++j) {
    out.xi[std::size_t(j)] = sv(j);
    Eigen::Index peak = 0;
    u.col(j).cwiseAbs().maxCoeff(&peak);
    const Complex phase = std::abs(u(peak, j)) > 0.0
                              ? std::conj(u(peak, j)) / std::abs(u(peak, j))
                              : Complex(1.0);
    // psi = sum xi U conj(V)^T; rotate U by `phase`, V^* by its inverse.
    out.signal_modes.col(j) = u.col(j) * phase / std::sqrt(hs);
    out.idler_modes.col(j) = v.col(j).conjugate() * std::conj(phase) / std::sqrt(hi);
  }
  return out;
}

double purity(const std::vector<double>& xi) {
  double s2 = 0.0, s4 = 0.0;
  for (double x : xi) {
    const double x2 = x * x;
    s2 += x2;
    s4 += x2 * x2;
  }
  if (!(s2 > 0.0)) throw std::invalid_argument("purity of an empty spectrum");
  return s4 / (s2 * s2);
}

double purity(const SchmidtDecomposition& decomp) { return purity(decomp.xi); }

DensityFunction::DensityFunction(FrequencyAxis axis, ComplexMatrix matrix)
    : axis_(std::move(axis)), matrix_(std::move(matrix)) {
  if (std::size_t(matrix_.rows()) != axis_.size() ||
      std::size_t(matrix_.cols()) != axis_.size())
    throw std::invalid_argument("density matrix shape does not match its axis");
}

double DensityFunction::trace() const {
  return matrix_.diagonal().real().sum() * axis_.step();
}

double DensityFunction::purity() const {
  return matrix_.cwiseAbs2().sum() * axis_.step() * axis_.step();
}

double DensityFunction::hermiticity_error() const {
  return (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff();
}

DensityFunction reduced_density(const JointSpectralAmplitude& jsa) {
  const ComplexMatrix& psi = jsa.amplitude();
  ComplexMatrix rho = (psi * psi.adjoint()) * jsa.grid().idler.step();
  // Exact Hermitian symmetry and a real diagonal.
  rho = 0.5 * (rho + rho.adjoint()).eval();
  for (Eigen::Index a = 0; a < rho.rows(); ++a) rho(a, a) = rho(a, a).real();
  return DensityFunction(jsa.grid().signal, std::move(rho));
}

std::vector<double> marginal_spectrum(const JointSpectralAmplitude& jsa,
                                      Photon which) {
  const RealMatrix jsi = jsa.intensity();
  std::vector<double> out;
  if (which == Photon::Signal) {
    const double h = jsa.grid().idler.step();
    out.resize(jsa.n_signal());
    for (std::size_t a = 0; a < out.size(); ++a)
      out[a] = jsi.row(Eigen::Index(a)).sum() * h;
  } else {
    const double h = jsa.grid().signal.step();
    out.resize(jsa.n_idler());
    for (std::size_t b = 0; b < out.size(); ++b)
      out[b] = jsi.col(Eigen::Index(b)).sum() * h;
  }
  return out;
}

}  // namespace jsaphase
