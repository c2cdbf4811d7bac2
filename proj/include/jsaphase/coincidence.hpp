#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "jsaphase/jsa.hpp"
#include "jsaphase/schmidt.hpp"

namespace jsaphase {

/// Frequencies (rad/ps detunings) of a double-pair outcome.
struct FrequencyQuad {
  double signal;
  double idler;
  double signal2;
  double idler2;
};

/// Grid indices of a double-pair outcome.
struct IndexQuad {
  std::size_t signal;
  std::size_t idler;
  std::size_t signal2;
  std::size_t idler2;
};

IndexQuad to_indices(const FrequencyGrid& grid, const FrequencyQuad& q);
FrequencyQuad to_frequencies(const FrequencyGrid& grid, const IndexQuad& q);

/// Uniform histogram axis with `count` bins over [lo, hi).
struct HistogramAxis {
  std::size_t count = 1;
  double lo = 0.0;
  double hi = 1.0;

  double width() const { return (hi - lo) / double(count); }
  double center(std::size_t k) const { return lo + (double(k) + 0.5) * width(); }
  /// Bin index, or nullopt outside [lo, hi).
  std::optional<std::size_t> bin(double x) const;
  void validate() const;
  bool operator==(const HistogramAxis&) const = default;
};

/// P(ws, wi) = gamma |psi(ws, wi)|^2; frequencies must be grid points.
double pair_probability(const JointSpectralAmplitude& jsa, double omega_s,
                        double omega_i);

/// Double-pair probability density
/// gamma |psi(ws,wi) psi(ws',wi') + psi(ws,wi') psi(ws',wi)|^2.
double four_photon_probability(const JointSpectralAmplitude& jsa,
                               const FrequencyQuad& q);
double four_photon_probability(const JointSpectralAmplitude& jsa,
                               const IndexQuad& q);

/// Marginal spectra with the axes they live on.
struct Marginals {
  FrequencyAxis signal_axis;
  FrequencyAxis idler_axis;
  std::vector<double> signal;
  std::vector<double> idler;
};

Marginals make_marginals(const JointSpectralAmplitude& jsa);

/// 4 Psi_s(ws) Psi_s(ws') Psi_i(wi) Psi_i(wi') cos^2[beta/2 (ws-ws')(wi-wi')],
/// the double-pair density of a JSA psi_s psi_i exp(i beta ws wi).
double fringe_closed_form(const Marginals& marginals, double beta,
                          const FrequencyQuad& q);

enum class FourfoldRepresentation { FullTensor, DifferenceProjection, ProductProjection };
enum class DifferenceCoordinate { Frequency, Wavelength };

std::string to_string(FourfoldRepresentation r);
std::string to_string(DifferenceCoordinate c);

inline constexpr std::size_t kFullTensorMaxPoints = 96;

struct FourfoldBinning {
  DifferenceCoordinate coordinate = DifferenceCoordinate::Frequency;
  HistogramAxis signal;   ///< |ws - ws'| (rad/ps) or |ls - ls'| (nm)
  HistogramAxis idler;    ///< |wi - wi'| or |li - li'|
  HistogramAxis product;  ///< |dws| |dwi| (rad^2/ps^2) or |dls| |dli| (nm^2)

  /// 64 one-lag bins per axis for the difference map; 600 product bins up to
  /// 2.5 x the RMS difference width on each axis.
  static FourfoldBinning defaults(const JointSpectralAmplitude& jsa,
                                  DifferenceCoordinate coordinate =
                                      DifferenceCoordinate::Frequency);
};

struct FourfoldDistribution {
  FourfoldRepresentation representation = FourfoldRepresentation::DifferenceProjection;
  DifferenceCoordinate coordinate = DifferenceCoordinate::Frequency;
  /// Two axes for DifferenceProjection, one for ProductProjection, none for
  /// FullTensor (indexed by grid points, signal-major over (a, b, a', b')).
  std::vector<HistogramAxis> axes;
  std::vector<double> values;  ///< row-major
  std::vector<std::size_t> shape;
  bool normalized = false;
  /// Sum of P dws^2 dwi^2 over every outcome on the grid.
  double total_mass = 0.0;
  /// Fraction of total_mass that fell outside the bins.
  double overflow_fraction = 0.0;
  /// Product projections: mass-weighted mean coordinate inside each bin.
  std::vector<double> bin_mean;

  double at(std::size_t i) const { return values.at(i); }
  double at(std::size_t i, std::size_t j) const { return values.at(i * shape.at(1) + j); }
  double sum() const;
};

struct ProjectionOptions {
  std::size_t block_size = 65536;  ///< outcomes per work item
  std::size_t threads = 0;         ///< 0: hardware concurrency
  bool normalize = true;
};

/// Projects the double-pair distribution over all grid quadruples onto the
/// requested representation. Projections stream over outcome blocks without
/// materialising the n^4 tensor; the result is bitwise identical for every
/// block size and worker count. FullTensor is limited to
/// n <= kFullTensorMaxPoints.
FourfoldDistribution project_fourfold(const JointSpectralAmplitude& jsa,
                                      FourfoldRepresentation target,
                                      const FourfoldBinning& binning,
                                      const ProjectionOptions& options = {});

/// Two signal photons with the idlers traced out:
/// 2 gamma Psi_s(ws) Psi_s(ws') + 2 gamma |rho_s(ws, ws')|^2.
double signal_signal_probability(const JointSpectralAmplitude& jsa,
                                 double omega_s, double omega_s2);

/// Both terms of the signal-signal probability over the whole grid.
struct SignalSignalTerms {
  FrequencyAxis axis;
  RealMatrix non_interfering;  ///< 2 gamma Psi_s(ws) Psi_s(ws')
  RealMatrix interfering;      ///< 2 gamma |rho_s(ws, ws')|^2

  RealMatrix total() const { return non_interfering + interfering; }
};

SignalSignalTerms signal_signal_terms(const JointSpectralAmplitude& jsa);

/// Multimode thermal second-order coherence 1 + sum xi^4 / (sum xi^2)^2.
double unheralded_g2(const SchmidtDecomposition& decomp);

}  // namespace jsaphase
