#include "jsaphase/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <Eigen/LU>
#include <boost/math/special_functions/gamma.hpp>
#include <unsupported/Eigen/LevenbergMarquardt>

namespace jsaphase {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

template <class F>
double golden_max(F&& f, double a, double b, int iterations = 80) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < iterations && b - a > 1e-13 * (1.0 + std::abs(a)); ++it) {
    if (fc >= fd) {
      b = d, d = c, fd = fc;
      c = b - g * (b - a), fc = f(c);
    } else {
      a = c, c = d, fc = fd;
      d = a + g * (b - a), fd = f(d);
    }
  }
  return fc >= fd ? c : d;
}

}  // namespace

std::string to_string(EstimationMethod m) {
  switch (m) {
    case EstimationMethod::CountRatio: return "count_ratio";
    case EstimationMethod::WidthRatio: return "width_ratio";
    case EstimationMethod::G2: return "g2";
    case EstimationMethod::FringePeriod: return "fringe_period";
    case EstimationMethod::MLE: return "mle";
  }
  return "?";
}

EstimationMethod estimation_method_from_string(const std::string& name) {
  for (auto m : {EstimationMethod::CountRatio, EstimationMethod::WidthRatio,
                 EstimationMethod::G2, EstimationMethod::FringePeriod, EstimationMethod::MLE})
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown estimation method '" + name + "'");
}

InterferenceTerm extract_interference_term(const CoincidenceHistogram& signal_signal,
                                           const CoincidenceHistogram& accidentals,
                                           double scale) {
  if (!(signal_signal.x == accidentals.x) || !(signal_signal.y == accidentals.y))
    throw std::invalid_argument("signal-signal and accidental histograms use different binning");
  if (!(scale >= 0.0)) throw std::invalid_argument("accidental scale must be >= 0");
  InterferenceTerm t;
  t.x = signal_signal.x;
  t.y = signal_signal.y;
  t.values.resize(Eigen::Index(t.x.count), Eigen::Index(t.y.count));
  t.variances.resizeLike(t.values);
  for (std::size_t i = 0; i < t.x.count; ++i)
    for (std::size_t j = 0; j < t.y.count; ++j) {
      const double s = double(signal_signal.at(i, j));
      const double a = double(accidentals.at(i, j));
      const double v = s - scale * a;
      t.values(Eigen::Index(i), Eigen::Index(j)) = v;
      t.variances(Eigen::Index(i), Eigen::Index(j)) = s + scale * scale * a;
      if (v < 0.0) ++t.n_negative_bins;
    }
  t.signal_signal_total = double(signal_signal.total);
  t.accidental_total = scale * double(accidentals.total);
  return t;
}

InterferenceTerm interference_term(const SignalSignalTerms& terms) {
  InterferenceTerm t;
  t.x = grid_axis(terms.axis);
  t.y = t.x;
  t.values = terms.interfering;
  t.variances = RealMatrix::Zero(t.values.rows(), t.values.cols());
  t.signal_signal_total = terms.total().sum();
  t.accidental_total = terms.non_interfering.sum();
  return t;
}

EstimationResult purity_from_count_ratio(const CoincidenceHistogram& signal_signal,
                                         const CoincidenceHistogram& accidentals) {
  if (!(signal_signal.x == accidentals.x) || !(signal_signal.y == accidentals.y))
    throw std::invalid_argument("signal-signal and accidental histograms use different binning");
  const double s = double(signal_signal.total);
  const double a = double(accidentals.total);
  if (a <= 0.0) throw InsufficientDataError("no accidental coincidences recorded");
  EstimationResult r;
  r.method = EstimationMethod::CountRatio;
  r.value = s / a - 1.0;
  r.std_error = std::sqrt(s / (a * a) + s * s / (a * a * a));
  r.n_events_used = signal_signal.total + accidentals.total;
  r.diagnostics["signal_signal_total"] = s;
  r.diagnostics["accidental_total"] = a;
  return r;
}

EstimationResult purity_from_count_ratio(const SignalSignalTerms& terms) {
  const double a = terms.non_interfering.sum();
  if (!(a > 0.0)) throw InsufficientDataError("non-interfering term is empty");
  EstimationResult r;
  r.method = EstimationMethod::CountRatio;
  r.value = terms.interfering.sum() / a;
  r.diagnostics["interfering_total"] = terms.interfering.sum();
  r.diagnostics["non_interfering_total"] = a;
  return r;
}

namespace {

// Gaussian plus optional constant on a 1-D profile:
// p = (amplitude, centre, sigma[, offset]).
struct GaussianOffset : Eigen::DenseFunctor<double> {
  const std::vector<double>& t;
  const std::vector<double>& y;
  const std::vector<double>& sw;  // sqrt of weights
  GaussianOffset(const std::vector<double>& t_, const std::vector<double>& y_,
                 const std::vector<double>& sw_, bool offset)
      : DenseFunctor<double>(offset ? 4 : 3, int(t_.size())), t(t_), y(y_), sw(sw_) {}
  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& f) const {
    const double c = p.size() > 3 ? p[3] : 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
      const double z = (t[k] - p[1]) / p[2];
      f[Eigen::Index(k)] = sw[k] * (p[0] * std::exp(-0.5 * z * z) + c - y[k]);
    }
    return 0;
  }
  int df(const Eigen::VectorXd& p, Eigen::MatrixXd& j) const {
    for (std::size_t k = 0; k < t.size(); ++k) {
      const double z = (t[k] - p[1]) / p[2], g = std::exp(-0.5 * z * z);
      const Eigen::Index r = Eigen::Index(k);
      j(r, 0) = sw[k] * g;
      j(r, 1) = sw[k] * p[0] * g * z / p[2];
      j(r, 2) = sw[k] * p[0] * g * z * z / p[2];
      if (p.size() > 3) j(r, 3) = sw[k];
    }
    return 0;
  }
};

struct ProfileFit {
  double sigma = 0, sigma_error = 0, offset = 0, reduced_chi2 = 0;
  int iterations = 0;
  std::size_t points = 0;
};

// One weighted fit on points [lo, hi]. The constant is dropped when it would
// go negative: a background cannot take counts away.
ProfileFit fit_window(const std::vector<double>& t, const std::vector<double>& y,
                      const std::vector<double>& sw, std::size_t lo, std::size_t hi,
                      Eigen::VectorXd& p, bool counts, bool weighted) {
  const std::vector<double> ts(t.begin() + long(lo), t.begin() + long(hi) + 1);
  const std::vector<double> ys(y.begin() + long(lo), y.begin() + long(hi) + 1);
  const std::vector<double> ws(sw.begin() + long(lo), sw.begin() + long(hi) + 1);
  auto run = [&](Eigen::VectorXd& q) {
    GaussianOffset f(ts, ys, ws, q.size() > 3);
    Eigen::LevenbergMarquardt<GaussianOffset> lm(f);
    lm.setMaxfev(2000);
    lm.minimize(q);
    q[2] = std::abs(q[2]);
  };
  Eigen::VectorXd q = p;
  run(q);
  if (q.size() > 3 && q[3] < 0.0) {
    q.conservativeResize(3);
    run(q);
  }
  if (!q.allFinite() || !(q[0] > 0.0) || !(q[2] > 0.0)) throw FitError("width profile fit failed");

  const Eigen::Index np = q.size();
  const GaussianOffset f(ts, ys, ws, np > 3);
  Eigen::VectorXd fv(Eigen::Index(ts.size()));
  Eigen::MatrixXd jac(Eigen::Index(ts.size()), np);
  f(q, fv);
  f.df(q, jac);
  ProfileFit out;
  out.points = ts.size();
  out.reduced_chi2 = fv.squaredNorm() / double(ts.size() - std::size_t(np));
  const Eigen::MatrixXd cov = (jac.transpose() * jac).inverse();
  double scale = 1.0;
  if (!weighted) scale = out.reduced_chi2;
  else if (counts) scale = std::max(1.0, out.reduced_chi2);
  out.sigma = q[2];
  out.sigma_error = std::sqrt(std::max(cov(2, 2), 0.0) * scale);
  out.offset = np > 3 ? q[3] : 0.0;
  p = q;
  return out;
}

// Fits the profile inside +-k sigma of the fitted centre, re-windowing until
// the window repeats. On a cycle the widest window of the cycle wins. At
// least 3 points either side are kept.
ProfileFit fit_profile(const std::vector<double>& t, const std::vector<double>& y,
                       const std::vector<double>& var, double k, int max_iterations,
                       bool counts, bool pedestal) {
  const double spacing = t[1] - t[0];
  double floor = std::numeric_limits<double>::infinity();
  for (double v : var)
    if (v > 0.0) floor = std::min(floor, v);
  const bool weighted = std::isfinite(floor);
  std::vector<double> sw(t.size(), 1.0);
  if (weighted)
    for (std::size_t i = 0; i < t.size(); ++i) sw[i] = 1.0 / std::sqrt(std::max(var[i], floor));

  // Seed from the half-maximum width around the peak of the 3-point smoothed
  // profile, so the fit starts on the peak rather than on a broad pedestal.
  const std::size_t n = t.size();
  std::vector<double> smooth(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = i > 0 ? i - 1 : i, b = i + 1 < n ? i + 1 : i;
    smooth[i] = (y[a] + y[i] + y[b]) / double(b - a + 1);
  }
  const std::size_t top = std::size_t(std::max_element(smooth.begin(), smooth.end()) - smooth.begin());
  if (!(smooth[top] > 0.0)) throw InsufficientDataError("interference term has no positive weight");
  std::size_t left = top, right = top;
  while (left > 0 && smooth[left - 1] > 0.5 * smooth[top]) --left;
  while (right + 1 < n && smooth[right + 1] > 0.5 * smooth[top]) ++right;
  const double fwhm = double(right - left + 2) * spacing;
  Eigen::VectorXd p(4);
  p << smooth[top], t[top], std::max(fwhm / 2.3548200450309493, spacing), 0.0;
  if (!pedestal) {
    // Plain Gaussian over the whole profile, seeded from positive moments.
    double w = 0, m1 = 0, m2 = 0;
    for (std::size_t i = 0; i < n; ++i) w += std::max(y[i], 0.0), m1 += std::max(y[i], 0.0) * t[i];
    m1 /= w;
    for (std::size_t i = 0; i < n; ++i) m2 += std::max(y[i], 0.0) * (t[i] - m1) * (t[i] - m1);
    Eigen::VectorXd q(3);
    q << smooth[top], m1, std::max(std::sqrt(m2 / w), spacing);
    ProfileFit f = fit_window(t, y, sw, 0, n - 1, q, counts, weighted);
    f.iterations = 1;
    return f;
  }

  std::vector<std::pair<std::size_t, std::size_t>> seen;
  std::vector<ProfileFit> fits;
  for (int it = 0; it < max_iterations; ++it) {
    const double half = std::max(k * p[2], 3.5 * spacing);
    std::size_t lo = n, hi = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (std::abs(t[i] - p[1]) <= half) lo = std::min(lo, i), hi = std::max(hi, i);
    if (lo > hi || hi - lo + 1 < 7) throw InsufficientDataError("interference term too sparse for widths");
    const auto window = std::make_pair(lo, hi);
    const auto again = std::find(seen.begin(), seen.end(), window);
    if (again != seen.end()) {
      std::size_t best = std::size_t(again - seen.begin());
      for (std::size_t c = best; c < seen.size(); ++c)
        if (seen[c].second - seen[c].first > seen[best].second - seen[best].first) best = c;
      fits[best].iterations = it;
      return fits[best];
    }
    seen.push_back(window);
    if (p.size() == 3) p.conservativeResize(4), p[3] = 0.0;
    fits.push_back(fit_window(t, y, sw, lo, hi, p, counts, weighted));
  }
  throw FitError("windowed width iteration did not converge");
}

}  // namespace

namespace {

// Full second moments along u = (x + y)/sqrt2 and v = (x - y)/sqrt2.
EstimationResult width_ratio_moments(const InterferenceTerm& term) {
  const Eigen::Index nx = term.values.rows(), ny = term.values.cols();
  double w = 0, su = 0, sv = 0;
  std::size_t bins = 0;
  for (Eigen::Index i = 0; i < nx; ++i)
    for (Eigen::Index j = 0; j < ny; ++j) {
      const double x = term.x.center(std::size_t(i)), y = term.y.center(std::size_t(j));
      const double c = term.values(i, j);
      if (c == 0.0) continue;
      w += c, su += c * (x + y) * kInvSqrt2, sv += c * (x - y) * kInvSqrt2, ++bins;
    }
  if (bins < 9) throw InsufficientDataError("interference term too sparse for widths");
  if (!(w > 0.0)) throw InsufficientDataError("interference term has non-positive weight");
  const double mu = su / w, mv = sv / w;
  double vu = 0, vv = 0;
  for (Eigen::Index i = 0; i < nx; ++i)
    for (Eigen::Index j = 0; j < ny; ++j) {
      const double x = term.x.center(std::size_t(i)), y = term.y.center(std::size_t(j));
      const double c = term.values(i, j);
      const double du = (x + y) * kInvSqrt2 - mu, dv = (x - y) * kInvSqrt2 - mv;
      vu += c * du * du, vv += c * dv * dv;
    }
  vu /= w, vv /= w;
  if (!(vu > 0.0) || !(vv > 0.0)) throw InsufficientDataError("interference term has non-positive width");

  EstimationResult r;
  r.method = EstimationMethod::WidthRatio;
  r.value = std::sqrt(vv / vu);
  // Linearised propagation of the per-bin variances.
  double err2 = 0.0;
  for (Eigen::Index i = 0; i < nx; ++i)
    for (Eigen::Index j = 0; j < ny; ++j) {
      const double var = term.variances(i, j);
      if (var <= 0.0) continue;
      const double x = term.x.center(std::size_t(i)), y = term.y.center(std::size_t(j));
      const double du = (x + y) * kInvSqrt2 - mu, dv = (x - y) * kInvSqrt2 - mv;
      const double g = 0.5 * r.value * ((dv * dv - vv) / (w * vv) - (du * du - vu) / (w * vu));
      err2 += g * g * var;
    }
  r.std_error = std::sqrt(err2);
  r.n_events_used = std::uint64_t(std::max(0.0, std::round(w)));
  r.diagnostics["width_diagonal"] = std::sqrt(vu);
  r.diagnostics["width_antidiagonal"] = std::sqrt(vv);
  return r;
}

// Sums along anti-diagonals (i + j fixed) give the profile in u, sums along
// diagonals (i - j fixed) the profile in v. Both axes must share one step.
EstimationResult width_ratio_profiles(const InterferenceTerm& term, const WidthRatioOptions& options) {
  const Eigen::Index nx = term.values.rows(), ny = term.values.cols();
  const double h = term.x.width();
  if (std::abs(term.y.width() - h) > 1e-9 * h)
    throw std::invalid_argument("width ratio needs equal bin widths on both axes");
  const std::size_t np = std::size_t(nx + ny - 1);
  std::vector<double> tu(np), tv(np), yu(np, 0.0), yv(np, 0.0), eu(np, 0.0), ev(np, 0.0);
  const double x0 = term.x.center(0), y0 = term.y.center(0);
  for (std::size_t k = 0; k < np; ++k) {
    tu[k] = (x0 + y0 + double(k) * h) * kInvSqrt2;
    tv[k] = (x0 - y0 + (double(k) - double(ny - 1)) * h) * kInvSqrt2;
  }
  bool counts = false;
  double total = 0.0;
  for (Eigen::Index i = 0; i < nx; ++i)
    for (Eigen::Index j = 0; j < ny; ++j) {
      const std::size_t ku = std::size_t(i + j), kv = std::size_t(i - j + ny - 1);
      const double c = term.values(i, j), var = term.variances(i, j);
      yu[ku] += c, yv[kv] += c, eu[ku] += var, ev[kv] += var;
      counts = counts || var > 0.0;
      total += c;
    }
  const ProfileFit fu = fit_profile(tu, yu, eu, options.window_sigmas, options.max_iterations, counts, false);
  const ProfileFit fv = fit_profile(tv, yv, ev, options.window_sigmas, options.max_iterations, counts, true);

  EstimationResult r;
  r.method = EstimationMethod::WidthRatio;
  r.value = fv.sigma / fu.sigma;
  // The two profiles share every count, but their widths probe orthogonal
  // directions; the errors are combined as independent.
  r.std_error = r.value * std::hypot(fv.sigma_error / fv.sigma, fu.sigma_error / fu.sigma);
  r.n_events_used = std::uint64_t(std::max(0.0, std::round(total)));
  r.diagnostics["width_diagonal"] = fu.sigma;
  r.diagnostics["width_antidiagonal"] = fv.sigma;
  r.diagnostics["offset_diagonal"] = fu.offset;
  r.diagnostics["offset_antidiagonal"] = fv.offset;
  r.diagnostics["reduced_chi2_diagonal"] = fu.reduced_chi2;
  r.diagnostics["reduced_chi2_antidiagonal"] = fv.reduced_chi2;
  r.diagnostics["window_sigmas"] = options.window_sigmas;
  r.diagnostics["window_iterations"] = std::max(fu.iterations, fv.iterations);
  return r;
}

}  // namespace

EstimationResult purity_from_width_ratio(const InterferenceTerm& term,
                                         const WidthRatioOptions& options) {
  if (term.values.rows() == 0 || term.values.cols() == 0)
    throw InsufficientDataError("empty interference term");
  EstimationResult r = options.window_sigmas > 0.0 ? width_ratio_profiles(term, options)
                                                   : width_ratio_moments(term);
  r.diagnostics["negative_bins"] = double(term.n_negative_bins);
  return r;
}

FourfoldDistribution histogram_products(const std::vector<FrequencyQuad>& events,
                                        const HistogramAxis& axis) {
  axis.validate();
  FourfoldDistribution d;
  d.representation = FourfoldRepresentation::ProductProjection;
  d.axes = {axis};
  d.shape = {axis.count};
  d.values.assign(axis.count, 0.0);
  d.bin_mean.assign(axis.count, 0.0);
  std::size_t outside = 0;
  for (const auto& q : events) {
    const double u = std::abs(q.signal - q.signal2) * std::abs(q.idler - q.idler2);
    if (const auto b = axis.bin(u)) {
      d.values[*b] += 1.0;
      d.bin_mean[*b] += u;
    } else {
      ++outside;
    }
  }
  for (std::size_t k = 0; k < axis.count; ++k)
    d.bin_mean[k] = d.values[k] > 0 ? d.bin_mean[k] / d.values[k] : axis.center(k);
  d.total_mass = double(events.size());
  d.overflow_fraction = events.empty() ? 0.0 : double(outside) / double(events.size());
  return d;
}

FourfoldDistribution histogram_differences(const std::vector<FrequencyQuad>& events,
                                           const HistogramAxis& signal,
                                           const HistogramAxis& idler) {
  signal.validate();
  idler.validate();
  FourfoldDistribution d;
  d.representation = FourfoldRepresentation::DifferenceProjection;
  d.axes = {signal, idler};
  d.shape = {signal.count, idler.count};
  d.values.assign(signal.count * idler.count, 0.0);
  std::size_t outside = 0;
  for (const auto& q : events) {
    const auto a = signal.bin(std::abs(q.signal - q.signal2));
    const auto b = idler.bin(std::abs(q.idler - q.idler2));
    if (a && b)
      d.values[*a * idler.count + *b] += 1.0;
    else
      ++outside;
  }
  d.total_mass = double(events.size());
  d.overflow_fraction = events.empty() ? 0.0 : double(outside) / double(events.size());
  return d;
}

EstimationResult fringe_period_fit(const FourfoldDistribution& product,
                                   const FourfoldDistribution& envelope,
                                   const FringeFitOptions& options) {
  if (product.representation != FourfoldRepresentation::ProductProjection ||
      envelope.representation != FourfoldRepresentation::ProductProjection)
    throw std::invalid_argument("fringe fit needs product projections");
  if (!(product.axes.at(0) == envelope.axes.at(0)))
    throw std::invalid_argument("data and envelope use different product binning");
  const HistogramAxis& axis = product.axes[0];
  const bool counts = !product.normalized;

  const double e_peak = *std::max_element(envelope.values.begin(), envelope.values.end());
  if (!(e_peak > 0.0)) throw InsufficientDataError("empty envelope");
  std::vector<double> u, y, e, inv_var;
  double n_used = 0.0;
  for (std::size_t k = 0; k < axis.count; ++k) {
    if (envelope.values[k] < options.envelope_floor * e_peak) continue;
    u.push_back(envelope.bin_mean.size() == axis.count ? envelope.bin_mean[k] : axis.center(k));
    y.push_back(product.values[k]);
    e.push_back(envelope.values[k]);
    inv_var.push_back(1.0 / (counts ? std::max(product.values[k], 1.0) : envelope.values[k]));
    n_used += product.values[k];
  }
  if (u.size() < 8) throw InsufficientDataError("too few populated product bins");
  if (counts && n_used < 50) throw InsufficientDataError("too few events for a fringe fit");

  struct Fit {
    double chi2, a, c, var_a;
  };
  auto solve = [&](double beta) {
    double s11 = 0, s12 = 0, s22 = 0, b1 = 0, b2 = 0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      const double cs = std::cos(0.5 * beta * u[k]);
      const double f1 = e[k] * cs * cs, f2 = e[k], w = inv_var[k];
      s11 += w * f1 * f1, s12 += w * f1 * f2, s22 += w * f2 * f2;
      b1 += w * f1 * y[k], b2 += w * f2 * y[k];
    }
    const double det = s11 * s22 - s12 * s12;
    Fit f{0, 0, 0, 0};
    if (!(det > 1e-14 * s11 * s22)) {
      f.c = b2 / s22;
      f.var_a = std::numeric_limits<double>::infinity();
    } else {
      f.a = (s22 * b1 - s12 * b2) / det;
      f.c = (s11 * b2 - s12 * b1) / det;
      f.var_a = s22 / det;
    }
    for (std::size_t k = 0; k < u.size(); ++k) {
      const double cs = std::cos(0.5 * beta * u[k]);
      const double r = y[k] - e[k] * (f.a * cs * cs + f.c);
      f.chi2 += r * r * inv_var[k];
    }
    return f;
  };

  const double u_max = axis.hi;
  const double beta_lo = 2.0 * std::numbers::pi / u_max;
  const double beta_hi = std::numbers::pi / axis.width();
  if (!(beta_lo < beta_hi))
    throw FitError("product axis cannot hold a full fringe; use a larger chirp or wider grid");

  const std::size_t n_scan = std::max<std::size_t>(options.scan_points, 16);
  const double step = (beta_hi - beta_lo) / double(n_scan - 1);
  EstimationResult r;
  r.method = EstimationMethod::FringePeriod;
  std::size_t best = 0;
  double best_chi2 = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < n_scan; ++s) {
    const double beta = beta_lo + step * double(s);
    const Fit f = solve(beta);
    r.profile.emplace_back(beta, f.chi2);
    if (f.a > 0.0 && f.chi2 < best_chi2) best_chi2 = f.chi2, best = s;
  }
  if (!std::isfinite(best_chi2))
    throw FitError("no positive fringe amplitude found", r.profile);
  if (best == 0)
    throw FitError("fewer than one fringe in the product support; use a larger chirp or wider grid",
                   r.profile);
  if (best == n_scan - 1)
    throw FitError("fringe period at the bin-width limit; use finer product bins", r.profile);

  const double lo = beta_lo + step * double(best - 1), hi = beta_lo + step * double(best + 1);
  double beta = golden_max([&](double b) { return -solve(b).chi2; }, lo, hi);
  if (counts) {
    // Reweight with variances from the fitted model rather than the data;
    // the fixed point is the Poisson maximum-likelihood fit, free of the
    // low-count bias of data-weighted chi-square.
    for (int pass = 0; pass < 6; ++pass) {
      const Fit f0 = solve(beta);
      for (std::size_t k = 0; k < u.size(); ++k) {
        const double cs = std::cos(0.5 * beta * u[k]);
        inv_var[k] = 1.0 / std::max(e[k] * (f0.a * cs * cs + f0.c), 0.5);
      }
      beta = golden_max([&](double b) { return -solve(b).chi2; }, beta - step, beta + step);
    }
  }
  const Fit f = solve(beta);
  const double dof = double(u.size()) - 3.0;
  const double chi2_red = dof > 0 ? f.chi2 / dof : 0.0;
  const double scale = counts ? std::max(1.0, chi2_red) : chi2_red;
  if (!(f.a > 0.0) || f.a < 1e-3 * (std::abs(f.a) + std::abs(f.c)))
    throw FitError("fringe modulation not significant (degenerate fit)", r.profile);
  double delta_chi2 = 0.0, threshold = 0.0;
  if (counts) {
    // Likelihood-ratio test against a fringe-free envelope, with the
    // threshold raised for the number of independent periods scanned
    // (global false-alarm probability 1e-3).
    double see = 0, sey = 0;
    for (std::size_t k = 0; k < u.size(); ++k) see += inv_var[k] * e[k] * e[k], sey += inv_var[k] * e[k] * y[k];
    double chi2_flat = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      const double res = y[k] - e[k] * sey / see;
      chi2_flat += res * res * inv_var[k];
    }
    delta_chi2 = (chi2_flat - f.chi2) / scale;
    const double trials = std::max(1.0, (beta_hi - beta_lo) * u_max / (2.0 * std::numbers::pi));
    threshold = 2.0 * boost::math::gamma_q_inv(0.5, 1e-3 / trials);
    if (delta_chi2 < threshold)
      throw FitError("fringe modulation not significant (degenerate fit)", r.profile);
  }

  const double h = std::max(1e-6 * beta, 0.05 * step);
  const double curv = (solve(beta + h).chi2 - 2.0 * f.chi2 + solve(beta - h).chi2) / (h * h);
  r.value = beta;
  r.std_error = curv > 0.0 ? std::sqrt(2.0 / curv * scale) : std::numeric_limits<double>::infinity();
  if (!std::isfinite(r.std_error))
    throw FitError("fringe fit curvature is not positive", r.profile);
  r.n_events_used = std::uint64_t(std::round(counts ? n_used : 0.0));
  r.diagnostics["amplitude"] = f.a;
  r.diagnostics["offset"] = f.c;
  r.diagnostics["chi2"] = f.chi2;
  r.diagnostics["reduced_chi2"] = chi2_red;
  if (counts) r.diagnostics["delta_chi2"] = delta_chi2, r.diagnostics["delta_chi2_threshold"] = threshold;
  r.diagnostics["fringes_in_support"] = beta * u_max / (2.0 * std::numbers::pi);
  return r;
}

namespace {

// Z(beta) = 2 (1 + sum_m c_m cos(beta m H)) with c_m the lag-product weights.
struct Normaliser {
  std::vector<double> x;  // m H
  std::vector<double> c;

  explicit Normaliser(const Marginals& mg) {
    auto lags = [](const std::vector<double>& p, double h) {
      const std::ptrdiff_t n = std::ptrdiff_t(p.size());
      std::vector<double> a(std::size_t(2 * n - 1), 0.0);
      for (std::ptrdiff_t k = -(n - 1); k < n; ++k) {
        double s = 0.0;
        for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, -k); i < std::min(n, n - k); ++i)
          s += p[std::size_t(i)] * p[std::size_t(i + k)];
        a[std::size_t(k + n - 1)] = s * h * h;
      }
      return a;
    };
    const auto as = lags(mg.signal, mg.signal_axis.step());
    const auto ai = lags(mg.idler, mg.idler_axis.step());
    const std::ptrdiff_t ns = std::ptrdiff_t(mg.signal.size()), ni = std::ptrdiff_t(mg.idler.size());
    std::vector<double> by_m(std::size_t((ns - 1) * (ni - 1) + 1), 0.0);
    for (std::ptrdiff_t k = -(ns - 1); k < ns; ++k)
      for (std::ptrdiff_t l = -(ni - 1); l < ni; ++l)
        by_m[std::size_t(std::abs(k * l))] += as[std::size_t(k + ns - 1)] * ai[std::size_t(l + ni - 1)];
    const double hh = mg.signal_axis.step() * mg.idler_axis.step();
    const double total = std::accumulate(by_m.begin(), by_m.end(), 0.0);
    for (std::size_t m = 0; m < by_m.size(); ++m)
      if (by_m[m] > 1e-300) {
        x.push_back(double(m) * hh);
        c.push_back(by_m[m] / total);
      }
  }

  double z(double beta) const {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += c[k] * std::cos(beta * x[k]);
    return 2.0 * (1.0 + s);
  }

  // Fisher information per event, from the distribution of lag products.
  double fisher(double beta) const {
    double z = 0.0, dz = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      z += 2.0 * c[k] * (1.0 + std::cos(beta * x[k]));
      dz -= 2.0 * c[k] * x[k] * std::sin(beta * x[k]);
    }
    const double g = dz / z;
    double info = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double th = 0.5 * beta * x[k];
      const double t = x[k] * std::sin(th) + g * std::cos(th);
      info += 4.0 * c[k] * t * t / z;
    }
    return info;
  }
};

// Distinct |dws dwi| values with multiplicities; lattice events repeat a lot.
struct ProductCounts {
  std::vector<double> x;
  std::vector<double> n;
};

double events_term(const ProductCounts& p, double beta) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.x.size(); ++k) {
    const double cs = std::cos(0.5 * beta * p.x[k]);
    s += p.n[k] * std::log(std::max(cs * cs, 1e-300));
  }
  return s;
}

ProductCounts event_products(const std::vector<FrequencyQuad>& events) {
  std::vector<double> v(events.size());
  for (std::size_t k = 0; k < events.size(); ++k)
    v[k] = std::abs((events[k].signal - events[k].signal2) * (events[k].idler - events[k].idler2));
  std::sort(v.begin(), v.end());
  ProductCounts p;
  const double tol = 1e-12 * (v.empty() ? 0.0 : v.back());
  for (double x : v) {
    if (!p.x.empty() && x - p.x.back() <= tol) {
      p.n.back() += 1.0;
    } else {
      p.x.push_back(x);
      p.n.push_back(1.0);
    }
  }
  return p;
}

}  // namespace

double mle_log_likelihood(const std::vector<FrequencyQuad>& events,
                          const Marginals& marginals, double beta) {
  const Normaliser norm(marginals);
  return events_term(event_products(events), beta) -
         double(events.size()) * std::log(norm.z(beta));
}

EstimationResult fit_beta_mle(const std::vector<FrequencyQuad>& events,
                              const Marginals& marginals, const MleOptions& options) {
  if (events.size() < 100)
    throw InsufficientDataError("maximum likelihood needs at least 100 quadruples, got " +
                                std::to_string(events.size()));
  if (!(options.scan_step > 0.0)) throw std::invalid_argument("scan step must be positive");
  const Normaliser norm(marginals);
  const auto products = event_products(events);
  const double n = double(events.size());
  auto loglik = [&](double beta) { return events_term(products, beta) - n * std::log(norm.z(beta)); };

  const double hh = marginals.signal_axis.step() * marginals.idler_axis.step();
  const double beta_max = options.beta_max > 0.0 ? options.beta_max : std::numbers::pi / hh;
  const std::size_t n_scan = std::size_t(std::ceil(beta_max / options.scan_step)) + 1;
  const double step = beta_max / double(n_scan - 1);

  EstimationResult r;
  r.method = EstimationMethod::MLE;
  r.n_events_used = events.size();
  std::vector<double> ll(n_scan);
  std::size_t best = 0;
  for (std::size_t s = 0; s < n_scan; ++s) {
    ll[s] = loglik(step * double(s));
    if (ll[s] > ll[best] || !std::isfinite(ll[best])) best = s;
  }
  const std::size_t stride = std::max<std::size_t>(1, n_scan / std::max<std::size_t>(options.profile_points, 1));
  for (std::size_t s = 0; s < n_scan; s += stride) r.profile.emplace_back(step * double(s), ll[s]);
  if (!std::isfinite(ll[best])) throw FitError("log-likelihood is not finite anywhere", r.profile);
  if (best == n_scan - 1)
    throw FitError("likelihood maximum at the upper search bound", r.profile);

  const double lo = best == 0 ? 0.0 : step * double(best - 1);
  const double beta = golden_max(loglik, lo, step * double(best + 1));
  const double l_max = loglik(beta);
  r.value = beta;
  r.diagnostics["log_likelihood"] = l_max;
  r.diagnostics["search_max"] = beta_max;

  // 95% one-sided bound: first scan point where the profile drops by 1.92.
  double upper = beta_max;
  for (std::size_t s = best; s < n_scan; ++s)
    if (ll[s] < l_max - 1.92) {
      upper = step * double(s);
      break;
    }
  const double info = n * norm.fisher(beta);
  if (beta < step || !(info > 0.0)) {
    r.diagnostics["at_boundary"] = 1.0;
    r.diagnostics["upper_bound_95"] = upper;
    r.std_error = upper / 1.645;
  } else {
    r.diagnostics["at_boundary"] = 0.0;
    r.std_error = 1.0 / std::sqrt(info);
  }
  return r;
}

EstimationResult g2_from_counts(std::uint64_t n_pulses, std::uint64_t signal_singles,
                                std::uint64_t signal_doubles, std::size_t n_detectors) {
  if (n_detectors < 2) throw ConfigError("g2 needs at least two detectors in the signal arm");
  if (signal_singles == 0) throw InsufficientDataError("no signal-arm singles recorded");
  const double s = double(signal_singles), d = double(signal_doubles);
  const double nd = double(n_detectors);
  EstimationResult r;
  r.method = EstimationMethod::G2;
  r.value = 2.0 * d * double(n_pulses) * nd / ((nd - 1.0) * s * s);
  r.std_error = r.value * std::sqrt((d > 0 ? 1.0 / d : 1.0) + 4.0 / s);
  r.n_events_used = signal_singles;
  r.diagnostics["purity"] = r.value - 1.0;
  r.diagnostics["singles"] = s;
  r.diagnostics["doubles"] = d;
  return r;
}

EstimationResult g2_from_counts(const SignalArmCounts& counts, std::size_t n_detectors) {
  return g2_from_counts(counts.n_pulses, counts.singles, counts.doubles, n_detectors);
}

}  // namespace jsaphase
