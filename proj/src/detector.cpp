#include "jsaphase/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "jsaphase/parallel.hpp"

namespace jsaphase {

namespace {

constexpr std::uint64_t kSourceStream = 0;
constexpr std::uint64_t kDetectorStream = 1;
constexpr std::uint64_t kFourfoldStream = 2;
constexpr std::size_t kMaxPairsPerPulse = 64;
constexpr std::size_t kPulsesPerChunk = 8192;
constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)

double fourfold_ratio(const ComplexMatrix& psi, const std::vector<double>& ms,
                      const std::vector<double>& mi, std::size_t a, std::size_t b,
                      std::size_t c, std::size_t d, double& p) {
  const Complex t = psi(a, b) * psi(c, d) + psi(a, d) * psi(c, b);
  p = std::norm(t);
  return 4.0 * ms[a] * ms[c] * mi[b] * mi[d];
}

std::vector<double> flatten(const RealMatrix& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

}  // namespace

DiscreteSampler::DiscreteSampler(const std::vector<double>& weights)
    : cdf_(weights.size()) {
  double acc = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (!(weights[k] >= 0.0)) throw std::invalid_argument("negative sampling weight");
    acc += weights[k];
    cdf_[k] = acc;
  }
  if (!(acc > 0.0)) throw std::invalid_argument("sampling weights sum to zero");
}

std::size_t DiscreteSampler::operator()(CounterRng& rng) const {
  const double u = rng.uniform() * cdf_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return std::min<std::size_t>(std::size_t(it - cdf_.begin()), cdf_.size() - 1);
}

FourfoldSampler::FourfoldSampler(const JointSpectralAmplitude& jsa, std::size_t threads)
    : psi_(jsa.amplitude()),
      signal_(marginal_spectrum(jsa, Photon::Signal)),
      idler_(marginal_spectrum(jsa, Photon::Idler)),
      signal_sampler_(signal_),
      idler_sampler_(idler_) {
  const std::size_t ns = signal_.size();
  const std::size_t ni = idler_.size();
  const double peak = psi_.cwiseAbs2().maxCoeff();
  double worst = 0.0;
  for (std::size_t a = 0; a < ns; ++a)
    for (std::size_t b = 0; b < ni; ++b)
      worst = std::max(worst, std::abs(std::norm(psi_(a, b)) - signal_[a] * idler_[b]));
  separable_ = worst <= 1e-10 * peak;
  if (separable_) return;

  // General JSA: the envelope bound is the largest density ratio on the grid.
  std::vector<double> row_max(ns, 0.0);
  parallel_for(ns, threads, [&](std::size_t a, std::size_t) {
    double m = 0.0;
    for (std::size_t c = 0; c < ns; ++c)
      for (std::size_t b = 0; b < ni; ++b)
        for (std::size_t d = 0; d < ni; ++d) {
          double p;
          const double env = fourfold_ratio(psi_, signal_, idler_, a, b, c, d, p);
          if (env > 0.0) m = std::max(m, p / env);
        }
    row_max[a] = m;
  });
  bound_ = std::max(*std::max_element(row_max.begin(), row_max.end()), 1e-300);
}

IndexQuad FourfoldSampler::sample(CounterRng& rng, std::uint64_t* attempts) const {
  for (;;) {
    const std::size_t a = signal_sampler_(rng);
    const std::size_t c = signal_sampler_(rng);
    const std::size_t b = idler_sampler_(rng);
    const std::size_t d = idler_sampler_(rng);
    if (attempts) ++*attempts;
    double p;
    const double env = fourfold_ratio(psi_, signal_, idler_, a, b, c, d, p);
    const double ratio = p / (bound_ * env);
    if (ratio > 1.0 + 1e-9)
      throw std::logic_error("fourfold envelope bound violated (ratio " +
                             std::to_string(ratio) + ")");
    if (rng.uniform() < ratio) return {a, b, c, d};
  }
}

FourfoldSample sample_fourfold_events(const JointSpectralAmplitude& jsa,
                                      std::size_t n_events, std::uint64_t rng_seed,
                                      std::size_t threads) {
  const FourfoldSampler sampler(jsa, threads);
  FourfoldSample out;
  out.events.resize(n_events);
  constexpr std::size_t kChunk = 1024;
  const std::size_t n_chunks = (n_events + kChunk - 1) / kChunk;
  std::vector<std::uint64_t> attempts(n_chunks, 0);
  parallel_for(n_chunks, threads, [&](std::size_t chunk, std::size_t) {
    const std::size_t end = std::min(n_events, (chunk + 1) * kChunk);
    for (std::size_t k = chunk * kChunk; k < end; ++k) {
      CounterRng rng(rng_seed, k, kFourfoldStream);
      out.events[k] = to_frequencies(jsa.grid(), sampler.sample(rng, &attempts[chunk]));
    }
  });
  out.attempts = std::accumulate(attempts.begin(), attempts.end(), std::uint64_t{0});
  return out;
}

void SourceConfig::validate() const {
  if (!(mean_pairs_per_pulse >= 0.0) || !std::isfinite(mean_pairs_per_pulse))
    throw std::invalid_argument("mean pairs per pulse must be >= 0");
  if (mean_pairs_per_pulse > 5.0)
    throw std::invalid_argument("mean pairs per pulse above 5 is outside the modelled regime");
}

PairSource::PairSource(const JointSpectralAmplitude& jsa,
                       const SchmidtDecomposition& decomp, SourceConfig config,
                       std::size_t threads)
    : jsa_(jsa),
      config_(config),
      jsi_sampler_(flatten(jsa.intensity())),
      fourfold_(jsa, threads) {
  config_.validate();
  const std::size_t modes = std::max<std::size_t>(decomp.significant_modes(), 1);
  std::vector<double> xi2(modes);
  for (std::size_t j = 0; j < modes; ++j) xi2[j] = decomp.xi[j] * decomp.xi[j];

  // Solve sum l_j / (1 - l_j) = mu for l_j = s2 xi_j^2, 0 <= s2 < 1 / xi_0^2.
  const double mu = config_.mean_pairs_per_pulse;
  auto mean_for = [&](double s2) {
    double m = 0.0;
    for (double x : xi2) m += s2 * x / (1.0 - s2 * x);
    return m;
  };
  double lo = 0.0, hi = 1.0 / xi2.front();
  for (int it = 0; it < 200 && mu > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_for(mid) < mu ? lo : hi) = mid;
  }
  const double s2 = mu > 0.0 ? 0.5 * (lo + hi) : 0.0;
  lambda_.resize(modes);
  for (std::size_t j = 0; j < modes; ++j) lambda_[j] = s2 * xi2[j];

  const std::size_t nmax = kMaxPairsPerPulse;
  suffix_.assign(modes + 1, std::vector<double>(nmax + 1, 0.0));
  suffix_[modes][0] = 1.0;
  for (std::size_t j = modes; j-- > 0;) {
    const double l = lambda_[j];
    for (std::size_t r = 0; r <= nmax; ++r) {
      double acc = 0.0, g = 1.0 - l;
      for (std::size_t k = 0; k <= r; ++k, g *= l) acc += g * suffix_[j + 1][r - k];
      suffix_[j][r] = acc;
    }
  }
  total_pmf_ = suffix_[0];
  total_cdf_.resize(total_pmf_.size());
  std::partial_sum(total_pmf_.begin(), total_pmf_.end(), total_cdf_.begin());

  signal_modes_.reserve(modes);
  idler_modes_.reserve(modes);
  for (std::size_t j = 0; j < modes; ++j) {
    std::vector<double> ws(decomp.signal_modes.rows()), wi(decomp.idler_modes.rows());
    for (std::size_t a = 0; a < ws.size(); ++a)
      ws[a] = std::norm(decomp.signal_modes(Eigen::Index(a), Eigen::Index(j)));
    for (std::size_t b = 0; b < wi.size(); ++b)
      wi[b] = std::norm(decomp.idler_modes(Eigen::Index(b), Eigen::Index(j)));
    signal_modes_.emplace_back(ws);
    idler_modes_.emplace_back(wi);
  }
}

double PairSource::mean_pairs() const {
  double m = 0.0;
  for (double l : lambda_) m += l / (1.0 - l);
  return m;
}

std::vector<std::size_t> PairSource::assign_modes(std::size_t n_pairs,
                                                  CounterRng& rng) const {
  // Sequential draw of mode occupations conditioned on their total.
  std::vector<std::size_t> mode_of_pair;
  std::size_t remaining = n_pairs;
  for (std::size_t j = 0; j < lambda_.size() && remaining > 0; ++j) {
    const double l = lambda_[j];
    const double u = rng.uniform() * suffix_[j][remaining];
    double acc = 0.0, g = 1.0 - l;
    std::size_t k = 0;
    for (; k < remaining; ++k, g *= l) {
      acc += g * suffix_[j + 1][remaining - k];
      if (u < acc) break;
    }
    mode_of_pair.insert(mode_of_pair.end(), k, j);
    remaining -= k;
  }
  // Rounding can leave a remainder in the last mode.
  mode_of_pair.insert(mode_of_pair.end(), remaining, lambda_.size() - 1);
  return mode_of_pair;
}

std::vector<PhotonPair> PairSource::sample_pulse(std::uint64_t pulse_index) const {
  std::vector<PhotonPair> pairs;
  if (config_.mean_pairs_per_pulse <= 0.0) return pairs;
  CounterRng rng(config_.rng_seed, pulse_index, kSourceStream);
  const double u = rng.uniform() * total_cdf_.back();
  const auto n = std::size_t(std::upper_bound(total_cdf_.begin(), total_cdf_.end(), u) -
                             total_cdf_.begin());
  if (n == 0) return pairs;

  const FrequencyGrid& g = jsa_.grid();
  if (n == 1) {
    const std::size_t cell = jsi_sampler_(rng);
    pairs.push_back({g.signal[cell / g.idler.size()], g.idler[cell % g.idler.size()]});
  } else if (n == 2) {
    const IndexQuad q = fourfold_.sample(rng);
    pairs.push_back({g.signal[q.signal], g.idler[q.idler]});
    pairs.push_back({g.signal[q.signal2], g.idler[q.idler2]});
  } else {
    for (std::size_t j : assign_modes(n, rng))
      pairs.push_back({g.signal[signal_modes_[j](rng)], g.idler[idler_modes_[j](rng)]});
  }
  return pairs;
}

std::vector<PhotonPair> sample_pulse(const PairSource& source, std::uint64_t pulse_index) {
  return source.sample_pulse(pulse_index);
}

std::string to_string(Arm arm) { return arm == Arm::Signal ? "signal" : "idler"; }

void DetectorChainConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!(dispersion_ns_per_nm > 0.0)) throw std::invalid_argument("dispersion must be positive");
  if (!(timing_jitter_fwhm_ps >= 0.0)) throw std::invalid_argument("jitter must be >= 0");
  if (!prob(efficiency_signal) || !prob(efficiency_idler))
    throw std::invalid_argument("efficiencies must lie in [0, 1]");
  if (!prob(idler_leak_probability)) throw std::invalid_argument("leak probability must lie in [0, 1]");
  if (n_detectors_per_arm == 0) throw std::invalid_argument("need at least one detector per arm");
  if (!(dark_count_rate_per_pulse >= 0.0)) throw std::invalid_argument("dark count rate must be >= 0");
}

std::vector<DetectionRecord> detect(std::uint64_t pulse_index,
                                    const std::vector<PhotonPair>& pairs,
                                    const FrequencyGrid& grid,
                                    const DetectorChainConfig& chain, CounterRng& rng) {
  struct Photon {
    Arm arm;
    double wavelength_nm;
  };
  std::vector<Photon> photons;
  photons.reserve(2 * pairs.size());
  const double ws0 = grid.signal.center_frequency();
  const double wi0 = grid.idler.center_frequency();
  for (const auto& p : pairs) {
    photons.push_back({Arm::Signal, wavelength_of(ws0 + p.omega_s)});
    const Arm idler_arm = rng.uniform() < chain.idler_leak_probability ? Arm::Signal : Arm::Idler;
    photons.push_back({idler_arm, wavelength_of(wi0 + p.omega_i)});
  }
  if (chain.dark_count_rate_per_pulse > 0.0) {
    std::poisson_distribution<int> darks(chain.dark_count_rate_per_pulse);
    for (Arm arm : {Arm::Signal, Arm::Idler}) {
      const FrequencyAxis& ax = arm == Arm::Signal ? grid.signal : grid.idler;
      const double l_lo = ax.wavelength_nm(ax.size() - 1);
      const double l_hi = ax.wavelength_nm(0);
      for (int k = darks(rng); k > 0; --k)
        photons.push_back({arm, l_lo + (l_hi - l_lo) * rng.uniform()});
    }
  }

  const double sigma_t = chain.timing_jitter_fwhm_ps / kFwhmPerSigma;
  const double ps_per_nm = 1000.0 * chain.dispersion_ns_per_nm;
  const std::size_t n_det = chain.n_detectors_per_arm;
  // Earliest arrival per (arm, detector); arrival time in ps from arm centre.
  std::vector<double> first_time(2 * n_det, HUGE_VAL);
  std::vector<double> first_lambda(2 * n_det, 0.0);
  std::normal_distribution<double> jitter(0.0, 1.0);
  for (const auto& ph : photons) {
    const double eta = ph.arm == Arm::Signal ? chain.efficiency_signal : chain.efficiency_idler;
    if (!(rng.uniform() < eta)) continue;
    const auto det = std::min<std::size_t>(std::size_t(rng.uniform() * double(n_det)), n_det - 1);
    const double ref = (ph.arm == Arm::Signal ? grid.signal : grid.idler).center_wavelength_nm();
    double t = ps_per_nm * (ph.wavelength_nm - ref);
    double inferred = ph.wavelength_nm;
    if (sigma_t > 0.0) {
      t += sigma_t * jitter(rng);
      inferred = ref + t / ps_per_nm;
    }
    const std::size_t slot = std::size_t(ph.arm) * n_det + det;
    if (t < first_time[slot]) {
      first_time[slot] = t;
      first_lambda[slot] = inferred;
    }
  }

  std::vector<DetectionRecord> out;
  for (std::size_t slot = 0; slot < 2 * n_det; ++slot)
    if (first_time[slot] < HUGE_VAL)
      out.push_back({pulse_index, slot < n_det ? Arm::Signal : Arm::Idler,
                     std::uint32_t(slot % n_det), first_lambda[slot]});
  return out;
}

std::vector<DetectionRecord> simulate(const PairSource& source,
                                      const DetectorChainConfig& chain,
                                      std::size_t threads) {
  chain.validate();
  const std::size_t n_pulses = source.config().n_pulses;
  const std::size_t n_chunks = (n_pulses + kPulsesPerChunk - 1) / kPulsesPerChunk;
  std::vector<std::vector<DetectionRecord>> chunks(n_chunks);
  parallel_for(n_chunks, threads, [&](std::size_t chunk, std::size_t) {
    const std::size_t end = std::min(n_pulses, (chunk + 1) * kPulsesPerChunk);
    auto& out = chunks[chunk];
    for (std::size_t pulse = chunk * kPulsesPerChunk; pulse < end; ++pulse) {
      const auto pairs = source.sample_pulse(pulse);
      if (pairs.empty() && chain.dark_count_rate_per_pulse <= 0.0) continue;
      CounterRng rng(source.config().rng_seed, pulse, kDetectorStream);
      const auto recs = detect(pulse, pairs, source.jsa().grid(), chain, rng);
      out.insert(out.end(), recs.begin(), recs.end());
    }
  });
  std::vector<DetectionRecord> records;
  for (auto& c : chunks) records.insert(records.end(), c.begin(), c.end());
  return records;
}

std::string to_string(HistogramScheme scheme) {
  switch (scheme) {
    case HistogramScheme::TwofoldJsi: return "twofold_jsi";
    case HistogramScheme::SignalSignal: return "signal_signal";
    case HistogramScheme::FourfoldDifference: return "fourfold_difference";
    case HistogramScheme::CrossPulseAccidentals: return "cross_pulse_accidentals";
  }
  return "?";
}

std::uint64_t CoincidenceHistogram::in_range() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

void CoincidenceHistogram::merge(const CoincidenceHistogram& other) {
  if (other.scheme != scheme || !(other.x == x) || !(other.y == y))
    throw std::invalid_argument("cannot merge histograms with different binning");
  for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += other.counts[k];
  total += other.total;
}

HistogramAxis grid_axis(const FrequencyAxis& axis) {
  return {axis.size(), axis.min() - 0.5 * axis.step(), axis.max() + 0.5 * axis.step()};
}

HistogramAxis lag_axis(const FrequencyAxis& axis, std::size_t n_lags) {
  return {n_lags, -0.5 * axis.step(), (double(n_lags) - 0.5) * axis.step()};
}

CoincidenceHistogram accumulate(const std::vector<DetectionRecord>& records,
                                HistogramScheme scheme, const HistogramAxis& x,
                                const HistogramAxis& y, const FrequencyGrid& grid) {
  x.validate();
  y.validate();
  for (std::size_t k = 1; k < records.size(); ++k)
    if (records[k].pulse_index < records[k - 1].pulse_index)
      throw std::invalid_argument("detection records must be sorted by pulse index");

  CoincidenceHistogram h{scheme, x, y, std::vector<std::uint64_t>(x.count * y.count, 0), 0};
  auto add = [&](double vx, double vy) {
    ++h.total;
    const auto bx = x.bin(vx);
    const auto by = y.bin(vy);
    if (bx && by) ++h.counts[*bx * y.count + *by];
  };

  struct Click {
    std::uint32_t detector;
    double omega;
  };
  const double ws0 = grid.signal.center_frequency();
  const double wi0 = grid.idler.center_frequency();
  std::vector<Click> sig, idl, prev_sig;
  std::uint64_t prev_pulse = 0;
  bool have_prev = false;

  std::size_t k = 0;
  while (k < records.size()) {
    const std::uint64_t pulse = records[k].pulse_index;
    sig.clear();
    idl.clear();
    for (; k < records.size() && records[k].pulse_index == pulse; ++k) {
      const auto& r = records[k];
      if (r.arm == Arm::Signal)
        sig.push_back({r.detector_index, angular_frequency(r.inferred_wavelength_nm) - ws0});
      else
        idl.push_back({r.detector_index, angular_frequency(r.inferred_wavelength_nm) - wi0});
    }
    auto by_detector = [](const Click& a, const Click& b) { return a.detector < b.detector; };
    std::stable_sort(sig.begin(), sig.end(), by_detector);
    std::stable_sort(idl.begin(), idl.end(), by_detector);

    switch (scheme) {
      case HistogramScheme::TwofoldJsi:
        for (const auto& s : sig)
          for (const auto& i : idl) add(s.omega, i.omega);
        break;
      case HistogramScheme::SignalSignal:
        for (std::size_t p = 0; p < sig.size(); ++p)
          for (std::size_t q = p + 1; q < sig.size(); ++q) add(sig[p].omega, sig[q].omega);
        break;
      case HistogramScheme::FourfoldDifference:
        if (sig.size() == 2 && idl.size() == 2)
          add(std::abs(sig[0].omega - sig[1].omega), std::abs(idl[0].omega - idl[1].omega));
        break;
      case HistogramScheme::CrossPulseAccidentals:
        if (have_prev && prev_pulse + 1 == pulse)
          for (const auto& s0 : prev_sig)
            for (const auto& s1 : sig)
              if (s0.detector < s1.detector) add(s0.omega, s1.omega);
        break;
    }
    prev_sig.swap(sig);
    prev_pulse = pulse;
    have_prev = true;
  }
  return h;
}

SignalArmCounts count_signal_arm(const std::vector<DetectionRecord>& records,
                                 std::uint64_t n_pulses) {
  SignalArmCounts c;
  c.n_pulses = n_pulses;
  std::size_t k = 0;
  while (k < records.size()) {
    const auto pulse = records[k].pulse_index;
    std::uint64_t m = 0;
    for (; k < records.size() && records[k].pulse_index == pulse; ++k)
      if (records[k].arm == Arm::Signal) ++m;
    c.singles += m;
    c.doubles += m * (m - (m > 0 ? 1 : 0)) / 2;
  }
  return c;
}

}  // namespace jsaphase
