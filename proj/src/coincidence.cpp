#include "jsaphase/coincidence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "jsaphase/parallel.hpp"

namespace jsaphase {

namespace {

using Accumulator = unsigned __int128;

// Each outcome is quantised to a 2^-52 fraction of an upper bound on P, so
// integer sums are exact and independent of summation order.
constexpr double kQuantum = 4503599627370496.0;  // 2^52
constexpr double kCoordQuantum = 16777216.0;      // 2^24

double nm_per_rad_per_ps(const FrequencyAxis& axis) {
  const double l = axis.center_wavelength_nm();
  return l * l / (2.0 * std::numbers::pi * kSpeedOfLightNmPerPs);
}

// |x_a - x_a'| for every ordered pair of grid points on one axis.
std::vector<double> pair_differences(const FrequencyAxis& axis,
                                     DifferenceCoordinate coordinate) {
  const std::size_t n = axis.size();
  std::vector<double> pos(n);
  for (std::size_t k = 0; k < n; ++k)
    pos[k] = coordinate == DifferenceCoordinate::Frequency ? axis[k]
                                                           : axis.wavelength_nm(k);
  std::vector<double> out(n * n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t c = 0; c < n; ++c) out[a * n + c] = std::abs(pos[a] - pos[c]);
  return out;
}

std::vector<int> bin_table(const std::vector<double>& values,
                           const HistogramAxis& axis) {
  std::vector<int> out(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    const auto b = axis.bin(values[k]);
    out[k] = b ? int(*b) : -1;
  }
  return out;
}

double rms_width(const FrequencyAxis& axis, const std::vector<double>& w) {
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    m0 += w[k];
    m1 += w[k] * axis[k];
    m2 += w[k] * axis[k] * axis[k];
  }
  const double mean = m1 / m0;
  return std::sqrt(std::max(m2 / m0 - mean * mean, 0.0));
}

FourfoldDistribution full_tensor(const JointSpectralAmplitude& jsa,
                                 const ProjectionOptions& options) {
  const std::size_t ns = jsa.n_signal();
  const std::size_t ni = jsa.n_idler();
  if (std::max(ns, ni) > kFullTensorMaxPoints)
    throw std::invalid_argument(
        "FullTensor representation is limited to grids of at most " +
        std::to_string(kFullTensorMaxPoints) + " points per axis; use a "
        "streamed projection instead");
  FourfoldDistribution out;
  out.representation = FourfoldRepresentation::FullTensor;
  out.shape = {ns, ni, ns, ni};
  out.values.assign(ns * ni * ns * ni, 0.0);
  const double weight = jsa.gamma() * std::pow(jsa.grid().cell_area(), 2);
  const ComplexMatrix& psi = jsa.amplitude();
  parallel_for(ns, options.threads, [&](std::size_t a, std::size_t) {
    for (std::size_t b = 0; b < ni; ++b)
      for (std::size_t c = 0; c < ns; ++c)
        for (std::size_t d = 0; d < ni; ++d) {
          const Complex t = psi(a, b) * psi(c, d) + psi(a, d) * psi(c, b);
          out.values[((a * ni + b) * ns + c) * ni + d] = std::norm(t) * weight;
        }
  });
  // Fixed-order reduction.
  out.total_mass = std::accumulate(out.values.begin(), out.values.end(), 0.0);
  if (options.normalize) {
    for (double& v : out.values) v /= out.total_mass;
    out.normalized = true;
  }
  return out;
}

}  // namespace

std::optional<std::size_t> HistogramAxis::bin(double x) const {
  if (!(x >= lo && x < hi)) return std::nullopt;
  const auto k = std::size_t((x - lo) / width());
  return std::min(k, count - 1);
}

void HistogramAxis::validate() const {
  if (count == 0 || !(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("histogram axis needs count > 0 and hi > lo");
}

IndexQuad to_indices(const FrequencyGrid& grid, const FrequencyQuad& q) {
  return {grid.signal.index_of(q.signal), grid.idler.index_of(q.idler),
          grid.signal.index_of(q.signal2), grid.idler.index_of(q.idler2)};
}

FrequencyQuad to_frequencies(const FrequencyGrid& grid, const IndexQuad& q) {
  return {grid.signal[q.signal], grid.idler[q.idler], grid.signal[q.signal2],
          grid.idler[q.idler2]};
}

double pair_probability(const JointSpectralAmplitude& jsa, double omega_s,
                        double omega_i) {
  const auto a = jsa.grid().signal.index_of(omega_s);
  const auto b = jsa.grid().idler.index_of(omega_i);
  return jsa.gamma() * std::norm(jsa(a, b));
}

double four_photon_probability(const JointSpectralAmplitude& jsa,
                               const IndexQuad& q) {
  const Complex t = jsa(q.signal, q.idler) * jsa(q.signal2, q.idler2) +
                    jsa(q.signal, q.idler2) * jsa(q.signal2, q.idler);
  return jsa.gamma() * std::norm(t);
}

double four_photon_probability(const JointSpectralAmplitude& jsa,
                               const FrequencyQuad& q) {
  return four_photon_probability(jsa, to_indices(jsa.grid(), q));
}

Marginals make_marginals(const JointSpectralAmplitude& jsa) {
  return {jsa.grid().signal, jsa.grid().idler,
          marginal_spectrum(jsa, Photon::Signal),
          marginal_spectrum(jsa, Photon::Idler)};
}

double fringe_closed_form(const Marginals& m, double beta, const FrequencyQuad& q) {
  const double ps = m.signal[m.signal_axis.index_of(q.signal)] *
                    m.signal[m.signal_axis.index_of(q.signal2)];
  const double pi = m.idler[m.idler_axis.index_of(q.idler)] *
                    m.idler[m.idler_axis.index_of(q.idler2)];
  const double c = std::cos(0.5 * beta * (q.signal - q.signal2) * (q.idler - q.idler2));
  return 4.0 * ps * pi * c * c;
}

std::string to_string(FourfoldRepresentation r) {
  switch (r) {
    case FourfoldRepresentation::FullTensor: return "full_tensor";
    case FourfoldRepresentation::DifferenceProjection: return "difference";
    case FourfoldRepresentation::ProductProjection: return "product";
  }
  return "?";
}

std::string to_string(DifferenceCoordinate c) {
  return c == DifferenceCoordinate::Frequency ? "frequency" : "wavelength";
}

double FourfoldDistribution::sum() const {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

FourfoldBinning FourfoldBinning::defaults(const JointSpectralAmplitude& jsa,
                                          DifferenceCoordinate coordinate) {
  const FrequencyGrid& g = jsa.grid();
  const bool freq = coordinate == DifferenceCoordinate::Frequency;
  const double ws = freq ? g.signal.step() : g.signal.step() * nm_per_rad_per_ps(g.signal);
  const double wi = freq ? g.idler.step() : g.idler.step() * nm_per_rad_per_ps(g.idler);
  constexpr std::size_t kLagBins = 64;
  FourfoldBinning out;
  out.coordinate = coordinate;
  out.signal = {kLagBins, -0.5 * ws, (double(kLagBins) - 0.5) * ws};
  out.idler = {kLagBins, -0.5 * wi, (double(kLagBins) - 0.5) * wi};

  const auto m = make_marginals(jsa);
  // The difference of two independent draws has sqrt(2) x the single RMS.
  const double ds = std::sqrt(2.0) * rms_width(g.signal, m.signal) * (ws / g.signal.step());
  const double di = std::sqrt(2.0) * rms_width(g.idler, m.idler) * (wi / g.idler.step());
  out.product = {600, 0.0, 2.5 * ds * 2.5 * di};
  return out;
}

FourfoldDistribution project_fourfold(const JointSpectralAmplitude& jsa,
                                      FourfoldRepresentation target,
                                      const FourfoldBinning& binning,
                                      const ProjectionOptions& options) {
  if (target == FourfoldRepresentation::FullTensor) return full_tensor(jsa, options);
  if (options.block_size == 0) throw std::invalid_argument("block size must be positive");

  const bool product = target == FourfoldRepresentation::ProductProjection;
  if (product) {
    binning.product.validate();
  } else {
    binning.signal.validate();
    binning.idler.validate();
  }

  const std::size_t ns = jsa.n_signal();
  const std::size_t ni = jsa.n_idler();
  const ComplexMatrix& psi = jsa.amplitude();
  const double peak = psi.cwiseAbs2().maxCoeff();
  const double bound = 4.0 * peak * peak;  // max of |A + B|^2
  const double to_quanta = kQuantum / bound;

  const auto ds = pair_differences(jsa.grid().signal, binning.coordinate);
  const auto di = pair_differences(jsa.grid().idler, binning.coordinate);
  const std::vector<int> sbin = product ? std::vector<int>{} : bin_table(ds, binning.signal);
  const std::vector<int> ibin = product ? std::vector<int>{} : bin_table(di, binning.idler);
  const std::size_t n_bins =
      product ? binning.product.count : binning.signal.count * binning.idler.count;

  const std::size_t row_len = ni * ni;
  const std::size_t n_outcomes = ns * ns * row_len;
  const std::size_t n_blocks = (n_outcomes + options.block_size - 1) / options.block_size;
  const std::size_t workers = std::min(resolve_threads(options.threads), std::max<std::size_t>(n_blocks, 1));

  // Per-worker histograms plus an overflow slot at index n_bins.
  std::vector<std::vector<Accumulator>> partial(workers, std::vector<Accumulator>(n_bins + 1, 0));
  // Product projections also track the mass-weighted coordinate per bin, with
  // the coordinate quantised to 2^-24 of the axis end.
  const double to_coord = product ? kCoordQuantum / binning.product.hi : 0.0;
  std::vector<std::vector<Accumulator>> partial_moment(
      workers, std::vector<Accumulator>(product ? n_bins + 1 : 0, 0));

  parallel_for(n_blocks, workers, [&](std::size_t block, std::size_t worker) {
    Accumulator* hist = partial[worker].data();
    Accumulator* moment = partial_moment[worker].data();
    const std::size_t lo = block * options.block_size;
    const std::size_t hi = std::min(n_outcomes, lo + options.block_size);
    for (std::size_t row = lo / row_len; row * row_len < hi; ++row) {
      const std::size_t a = row / ns;
      const std::size_t c = row % ns;
      const Complex* r1 = psi.data() + a * ni;
      const std::size_t j0 = std::max(lo, row * row_len) - row * row_len;
      const std::size_t j1 = std::min(hi, (row + 1) * row_len) - row * row_len;
      const Complex* r2 = psi.data() + c * ni;
      const int srow = product ? 0 : sbin[a * ns + c];
      const double drow = ds[a * ns + c];
      for (std::size_t j = j0; j < j1;) {
        const std::size_t b = j / ni;
        const std::size_t d_end = std::min(ni, b * ni + ni <= j1 ? ni : j1 - b * ni);
        const Complex x1 = r1[b];
        const Complex x2 = r2[b];
        for (std::size_t d = j - b * ni; d < d_end; ++d) {
          const Complex t = x1 * r2[d] + r1[d] * x2;
          const auto q = static_cast<std::uint64_t>(std::norm(t) * to_quanta + 0.5);
          std::size_t slot = n_bins;
          if (product) {
            const double u = drow * di[b * ni + d];
            if (auto k = binning.product.bin(u)) {
              slot = *k;
              moment[slot] += Accumulator(q) * static_cast<std::uint64_t>(u * to_coord + 0.5);
            }
          } else {
            const int ib = ibin[b * ni + d];
            if (srow >= 0 && ib >= 0)
              slot = std::size_t(srow) * binning.idler.count + std::size_t(ib);
          }
          hist[slot] += q;
        }
        j = b * ni + d_end;
      }
    }
  });

  std::vector<Accumulator> total(n_bins + 1, 0);
  for (const auto& p : partial)
    for (std::size_t k = 0; k <= n_bins; ++k) total[k] += p[k];

  const double weight = jsa.gamma() * std::pow(jsa.grid().cell_area(), 2) * bound / kQuantum;
  FourfoldDistribution out;
  out.representation = target;
  out.coordinate = binning.coordinate;
  if (product) {
    out.axes = {binning.product};
    out.shape = {binning.product.count};
  } else {
    out.axes = {binning.signal, binning.idler};
    out.shape = {binning.signal.count, binning.idler.count};
  }
  out.values.resize(n_bins);
  if (product) {
    out.bin_mean.resize(n_bins);
    for (std::size_t k = 0; k < n_bins; ++k) {
      Accumulator m = 0;
      for (const auto& p : partial_moment) m += p[k];
      out.bin_mean[k] = total[k] > 0 ? double(m) / double(total[k]) / to_coord
                                     : binning.product.center(k);
    }
  }
  Accumulator all = 0;
  for (std::size_t k = 0; k <= n_bins; ++k) all += total[k];
  for (std::size_t k = 0; k < n_bins; ++k) out.values[k] = double(total[k]) * weight;
  out.total_mass = double(all) * weight;
  out.overflow_fraction = all > 0 ? double(total[n_bins]) / double(all) : 0.0;
  if (options.normalize) {
    Accumulator in_range = all - total[n_bins];
    if (in_range == 0) throw std::runtime_error("fourfold projection has no mass inside the bins");
    const double inv = 1.0 / double(in_range);
    for (std::size_t k = 0; k < n_bins; ++k) out.values[k] = double(total[k]) * inv;
    out.normalized = true;
  }
  return out;
}

double signal_signal_probability(const JointSpectralAmplitude& jsa,
                                 double omega_s, double omega_s2) {
  const auto a = jsa.grid().signal.index_of(omega_s);
  const auto c = jsa.grid().signal.index_of(omega_s2);
  const auto psi_s = marginal_spectrum(jsa, Photon::Signal);
  const ComplexMatrix& psi = jsa.amplitude();
  const Complex rho = psi.row(Eigen::Index(a)).dot(psi.row(Eigen::Index(c))) *
                      jsa.grid().idler.step();
  // Eigen's dot conjugates its first argument: rho = sum conj(psi_a) psi_c,
  // whose modulus equals |rho_s(a, c)|.
  return 2.0 * jsa.gamma() * (psi_s[a] * psi_s[c] + std::norm(rho));
}

SignalSignalTerms signal_signal_terms(const JointSpectralAmplitude& jsa) {
  const auto psi_s = marginal_spectrum(jsa, Photon::Signal);
  const auto rho = reduced_density(jsa);
  const Eigen::Index n = Eigen::Index(psi_s.size());
  Eigen::Map<const Eigen::VectorXd> m(psi_s.data(), n);
  SignalSignalTerms out{jsa.grid().signal, RealMatrix(n, n), RealMatrix(n, n)};
  out.non_interfering = 2.0 * jsa.gamma() * (m * m.transpose());
  out.interfering = 2.0 * jsa.gamma() * rho.matrix().cwiseAbs2();
  return out;
}

double unheralded_g2(const SchmidtDecomposition& decomp) {
  return 1.0 + purity(decomp);
}

}  // namespace jsaphase
