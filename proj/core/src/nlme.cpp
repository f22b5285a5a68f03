#include "titrate/nlme.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <ostream>

#include "titrate/dataset_io.hpp"
#include "titrate/errors.hpp"
#include "titrate/jet.hpp"
#include "titrate/optimize.hpp"
#include "titrate/parallel.hpp"
#include "titrate/rng.hpp"
#include "titrate/stats.hpp"

namespace titrate {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kLog4Pi = 2.5310242469692907930;
constexpr double kInf = std::numeric_limits<double>::infinity();

using Mat2 = std::array<std::array<double, 2>, 2>;

// A = sum_j 2 u_j and B = sum_j (y_j e^{-u_j} - 1)^2 with u_j = log f_j(a, b),
// where a = log cl and b = log v.
template <typename T>
void obs_terms(const SubjectData& s, const T& a, const T& b, T& A, T& B) {
  using std::exp;
  using std::log;
  const T k = exp(a - b);
  A = T(0.0);
  B = T(0.0);
  for (std::size_t j = 0; j < s.y.size(); ++j) {
    T sum(0.0);
    for (int d = s.offsets[j]; d < s.offsets[j + 1]; ++d) sum += s.amount[d] * exp(-s.lag[d] * k);
    const T u = log(sum) - b;
    A += 2.0 * u;
    const T w = exp(-u) * s.y[j] - 1.0;
    B += w * w;
  }
}

double prior_term(double eta, double log_omega) {
  return kLog2Pi + 2.0 * log_omega + eta * eta * std::exp(-2.0 * log_omega);
}

double joint_value(const LogParams& lp, const SubjectData& s, double e1, double e2) {
  double A = 0.0;
  double B = 0.0;
  obs_terms(s, lp[0] + e1, lp[1] + e2, A, B);
  const auto n = static_cast<double>(s.y.size());
  return n * (kLog2Pi + 2.0 * lp[4]) + A + std::exp(-2.0 * lp[4]) * B + prior_term(e1, lp[2]) +
         prior_term(e2, lp[3]);
}

JointDerivatives joint_derivs(const LogParams& lp, const SubjectData& s, double e1, double e2) {
  using J2 = Jet<2>;
  J2 A;
  J2 B;
  obs_terms(s, J2::variable(lp[0] + e1, 0), J2::variable(lp[1] + e2, 1), A, B);
  const double sc = std::exp(-2.0 * lp[4]);
  const J2 C = A + sc * B;
  const double p1 = std::exp(-2.0 * lp[2]);
  const double p2 = std::exp(-2.0 * lp[3]);
  const auto n = static_cast<double>(s.y.size());
  JointDerivatives d;
  d.value = n * (kLog2Pi + 2.0 * lp[4]) + C.value() + prior_term(e1, lp[2]) + prior_term(e2, lp[3]);
  d.grad = {C.deriv(1, 0) + 2.0 * p1 * e1, C.deriv(0, 1) + 2.0 * p2 * e2};
  d.hess = {{{C.deriv(2, 0) + 2.0 * p1, C.deriv(1, 1)}, {C.deriv(1, 1), C.deriv(0, 2) + 2.0 * p2}}};
  return d;
}

bool invert(const Mat2& h, Mat2& inv, double& det) {
  det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
  if (!(det > 0.0) || !(h[0][0] > 0.0)) return false;
  inv = {{{h[1][1] / det, -h[0][1] / det}, {-h[1][0] / det, h[0][0] / det}}};
  return true;
}

// Partial derivative of a jet by the number of differentiations in each variable.
template <int N>
double d3(const Jet<N>& c, int i, int j, int k) {
  const int nx = (i == 0) + (j == 0) + (k == 0);
  return c.deriv(nx, 3 - nx);
}

// Exact d L / d log-params at the mode (e1, e2), with L = J(eta_hat) + log det H.
LogParams laplace_gradient(const LogParams& lp, const SubjectData& s, double e1, double e2) {
  using J3 = Jet<3>;
  J3 A;
  J3 B;
  obs_terms(s, J3::variable(lp[0] + e1, 0), J3::variable(lp[1] + e2, 1), A, B);
  const double sc = std::exp(-2.0 * lp[4]);
  const J3 C = A + sc * B;
  const double p[2] = {std::exp(-2.0 * lp[2]), std::exp(-2.0 * lp[3])};
  const double eta[2] = {e1, e2};
  const auto n = static_cast<double>(s.y.size());

  const double gc[2] = {C.deriv(1, 0), C.deriv(0, 1)};
  const Mat2 hc{{{C.deriv(2, 0), C.deriv(1, 1)}, {C.deriv(1, 1), C.deriv(0, 2)}}};
  const double gb[2] = {B.deriv(1, 0), B.deriv(0, 1)};
  const Mat2 hb{{{B.deriv(2, 0), B.deriv(1, 1)}, {B.deriv(1, 1), B.deriv(0, 2)}}};
  Mat2 t[2];  // t[k][i][j] = d^3 C / d eta_i d eta_j d eta_k
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) t[k][i][j] = d3(C, i, j, k);

  Mat2 h = hc;
  h[0][0] += 2.0 * p[0];
  h[1][1] += 2.0 * p[1];
  Mat2 hinv;
  double det = 0.0;
  if (!invert(h, hinv, det)) throw EstimationError("Hessian at the posterior mode is not positive definite");

  const double gj[2] = {gc[0] + 2.0 * p[0] * e1, gc[1] + 2.0 * p[1] * e2};

  double dj[5];
  double m[2][5] = {};
  Mat2 dh[5] = {};
  for (int q = 0; q < 2; ++q) {
    dj[q] = gc[q];
    for (int i = 0; i < 2; ++i) m[i][q] = hc[i][q];
    dh[q] = t[q];
  }
  for (int q = 0; q < 2; ++q) {
    dj[2 + q] = 2.0 - 2.0 * eta[q] * eta[q] * p[q];
    m[q][2 + q] = -4.0 * eta[q] * p[q];
    dh[2 + q][q][q] = -4.0 * p[q];
  }
  dj[4] = 2.0 * n - 2.0 * sc * B.value();
  for (int i = 0; i < 2; ++i) {
    m[i][4] = -2.0 * sc * gb[i];
    for (int j = 0; j < 2; ++j) dh[4][i][j] = -2.0 * sc * hb[i][j];
  }

  LogParams grad{};
  for (int q = 0; q < 5; ++q) {
    double deta[2];
    for (int k = 0; k < 2; ++k) deta[k] = -(hinv[k][0] * m[0][q] + hinv[k][1] * m[1][q]);
    Mat2 total = dh[q];
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) total[i][j] += t[k][i][j] * deta[k];
    double tr = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) tr += hinv[i][j] * total[j][i];
    grad[q] = dj[q] + gj[0] * deta[0] + gj[1] * deta[1] + tr;
  }
  return grad;
}

struct Mode {
  double e1 = 0.0;
  double e2 = 0.0;
  JointDerivatives d;
  bool converged = false;
  int iterations = 0;
};

// Damped Newton search for the posterior mode of eta from `start`.
Mode find_mode(const LogParams& lp, const SubjectData& s, const LaplaceConfig& cfg, std::array<double, 2> start) {
  Mode out;
  double e1 = start[0];
  double e2 = start[1];
  JointDerivatives d = joint_derivs(lp, s, e1, e2);

  for (out.iterations = 0; out.iterations < cfg.max_inner_iters; ++out.iterations) {
    const double gmax = std::max(std::abs(d.grad[0]), std::abs(d.grad[1]));
    if (gmax < cfg.inner_tol) {
      out.converged = true;
      break;
    }
    // Newton direction with each Hessian eigenvalue replaced by its magnitude,
    // so negative curvature is followed downhill.
    const Mat2& h = d.hess;
    const double tr = h[0][0] + h[1][1];
    const double disc = std::hypot(h[0][0] - h[1][1], 2.0 * h[0][1]);
    const double lam[2] = {0.5 * (tr + disc), 0.5 * (tr - disc)};
    const double floor = 1e-6 * std::max({1.0, std::abs(lam[0]), std::abs(lam[1])});
    double v[2][2];
    if (std::abs(h[0][1]) > 1e-300) {
      const double n0 = std::hypot(lam[0] - h[1][1], h[0][1]);
      v[0][0] = (lam[0] - h[1][1]) / n0;
      v[0][1] = h[0][1] / n0;
    } else {
      v[0][0] = h[0][0] >= h[1][1] ? 1.0 : 0.0;
      v[0][1] = 1.0 - v[0][0];
    }
    v[1][0] = -v[0][1];
    v[1][1] = v[0][0];
    double step[2] = {0.0, 0.0};
    for (int i = 0; i < 2; ++i) {
      const double c = (v[i][0] * d.grad[0] + v[i][1] * d.grad[1]) / std::max(std::abs(lam[i]), floor);
      step[0] -= c * v[i][0];
      step[1] -= c * v[i][1];
    }
    const bool convex = lam[1] >= floor;
    const double len = std::hypot(step[0], step[1]);
    if (len > 2.0) {
      step[0] *= 2.0 / len;
      step[1] *= 2.0 / len;
    }
    const double step_max = std::max(std::abs(step[0]), std::abs(step[1]));
    if (step_max < 1e-3 && convex) {
      // Inside the quadratic basin the decrease soon drops below the rounding of
      // J, so take full Newton steps without a line search.
      e1 += step[0];
      e2 += step[1];
      d = joint_derivs(lp, s, e1, e2);
      if (step_max < 1e-12) {
        out.converged = true;
        ++out.iterations;
        break;
      }
      continue;
    }
    const double slope = d.grad[0] * step[0] + d.grad[1] * step[1];

    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k < 50; ++k) {
      const double v = joint_value(lp, s, e1 + t * step[0], e2 + t * step[1]);
      if (std::isfinite(v) && v <= d.value + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      out.converged = std::max(std::abs(step[0]), std::abs(step[1])) < 1e-6;
      break;
    }
    e1 += t * step[0];
    e2 += t * step[1];
    d = joint_derivs(lp, s, e1, e2);
    if (t * std::max(std::abs(step[0]), std::abs(step[1])) < 1e-12) {
      out.converged = true;
      ++out.iterations;
      break;
    }
  }

  out.e1 = e1;
  out.e2 = e2;
  out.d = d;
  return out;
}

// The joint density can have several local modes; the search runs from the warm
// start and from zero and keeps the lower one.
SubjectLaplace laplace_impl(const LogParams& lp, const SubjectData& s, const LaplaceConfig& cfg,
                            bool with_gradient, std::array<double, 2> warm) {
  if (!std::isfinite(warm[0]) || !std::isfinite(warm[1])) warm = {0.0, 0.0};
  Mode m = find_mode(lp, s, cfg, warm);
  if (warm[0] != 0.0 || warm[1] != 0.0) {
    Mode z = find_mode(lp, s, cfg, {0.0, 0.0});
    if (!std::isfinite(m.d.value) || z.d.value < m.d.value) m = z;
  }

  SubjectLaplace out;
  out.eta_cl = m.e1;
  out.eta_v = m.e2;
  out.converged = m.converged;
  out.iterations = m.iterations;
  Mat2 hinv;
  double det = 0.0;
  if (!std::isfinite(m.d.value) || !invert(m.d.hess, hinv, det)) {
    out.neg2ll = kInf;
    out.converged = false;
    return out;
  }
  out.neg2ll = m.d.value + std::log(det) - 2.0 * kLog4Pi;
  if (with_gradient) out.grad = laplace_gradient(lp, s, m.e1, m.e2);
  return out;
}

}  // namespace

void validate(const LaplaceConfig& cfg) {
  if (!(cfg.outer_tol > 0.0) || !(cfg.inner_tol > 0.0) || !(cfg.fd_step > 0.0)) {
    throw InvalidArgument("tolerances and finite-difference step must be positive");
  }
  if (cfg.max_outer_iters < 1 || cfg.max_inner_iters < 1) {
    throw InvalidArgument("iteration limits must be at least 1");
  }
}

LogParams to_log(const PopulationParams& p) {
  validate(p);
  return {std::log(p.mu_cl), std::log(p.mu_v), std::log(p.omega_cl), std::log(p.omega_v), std::log(p.xi)};
}

PopulationParams from_log(const LogParams& lp) {
  return {std::exp(lp[0]), std::exp(lp[1]), std::exp(lp[2]), std::exp(lp[3]), std::exp(lp[4])};
}

SubjectData make_subject_data(std::int64_t id, std::span<const DoseEvent> doses,
                              std::span<const double> obs_times, std::span<const double> obs) {
  if (obs_times.size() != obs.size()) throw InvalidArgument("observation times and values differ in length");
  if (obs.empty()) throw InvalidArgument("subject has no observations");
  validate_schedule(doses);
  SubjectData s;
  s.id = id;
  for (std::size_t j = 0; j < obs.size(); ++j) {
    if (!std::isfinite(obs[j])) throw InvalidArgument("observation is not finite");
    bool any = false;
    for (const auto& d : doses) {
      if (d.time >= obs_times[j]) break;
      if (d.amount <= 0.0) continue;
      s.lag.push_back(obs_times[j] - d.time);
      s.amount.push_back(d.amount);
      any = true;
    }
    if (!any) throw InvalidArgument("observation without a preceding dose");
    s.y.push_back(obs[j]);
    s.offsets.push_back(static_cast<int>(s.lag.size()));
  }
  return s;
}

SubjectData make_subject_data(const SubjectRecord& r) {
  std::vector<double> times;
  std::vector<double> obs;
  for (std::size_t j = 0; j < r.troughs.size(); ++j) {
    if (r.troughs[j] <= kExposureFloor) continue;  // below quantification
    times.push_back(kObsTimes[j]);
    obs.push_back(r.troughs[j]);
  }
  return make_subject_data(r.subject_id, r.doses, times, obs);
}

JointTerms joint_terms(const PopulationParams& pop, const SubjectData& s, double eta_cl, double eta_v) {
  const LogParams lp = to_log(pop);
  double A = 0.0;
  double B = 0.0;
  obs_terms(s, lp[0] + eta_cl, lp[1] + eta_v, A, B);
  const auto n = static_cast<double>(s.y.size());
  return {n * (kLog2Pi + 2.0 * lp[4]) + A + std::exp(-2.0 * lp[4]) * B,
          prior_term(eta_cl, lp[2]) + prior_term(eta_v, lp[3])};
}

JointDerivatives joint_derivatives(const PopulationParams& pop, const SubjectData& s, double eta_cl,
                                   double eta_v) {
  return joint_derivs(to_log(pop), s, eta_cl, eta_v);
}

std::array<std::array<double, 2>, 2> joint_hessian_fd(const PopulationParams& pop, const SubjectData& s,
                                                      double eta_cl, double eta_v, double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  const LogParams lp = to_log(pop);
  auto f = [&](double a, double b) { return joint_value(lp, s, eta_cl + a, eta_v + b); };
  const double f0 = f(0.0, 0.0);
  Mat2 out;
  out[0][0] = (f(h, 0.0) - 2.0 * f0 + f(-h, 0.0)) / (h * h);
  out[1][1] = (f(0.0, h) - 2.0 * f0 + f(0.0, -h)) / (h * h);
  out[0][1] = out[1][0] = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
  return out;
}

SubjectLaplace subject_laplace(const PopulationParams& pop, const SubjectData& s, const LaplaceConfig& cfg,
                               bool with_gradient, std::array<double, 2> warm) {
  validate(cfg);
  return laplace_impl(to_log(pop), s, cfg, with_gradient, warm);
}

double subject_neg2ll_laplace(const PopulationParams& pop, const SubjectRecord& subject,
                              const LaplaceConfig& cfg) {
  return subject_laplace(pop, make_subject_data(subject), cfg, false).neg2ll;
}

LaplaceObjective::LaplaceObjective(const TrialDataset& ds, LaplaceConfig cfg) : cfg_(cfg) {
  validate(cfg_);
  subjects_.reserve(ds.subjects.size());
  for (const auto& r : ds.subjects) {
    const bool any = std::any_of(r.troughs.begin(), r.troughs.end(), [](double y) { return y > kExposureFloor; });
    if (any) subjects_.push_back(make_subject_data(r));
  }
  modes_.assign(subjects_.size(), {0.0, 0.0});
}

LaplaceObjective::LaplaceObjective(std::vector<SubjectData> subjects, LaplaceConfig cfg)
    : subjects_(std::move(subjects)), cfg_(cfg) {
  validate(cfg_);
  modes_.assign(subjects_.size(), {0.0, 0.0});
}

double LaplaceObjective::value(const LogParams& lp) { return evaluate(lp, nullptr); }

double LaplaceObjective::value_and_gradient(const LogParams& lp, LogParams& grad) {
  return evaluate(lp, &grad);
}

double LaplaceObjective::evaluate(const LogParams& lp, LogParams* grad) {
  for (double v : lp) {
    if (!std::isfinite(v) || std::abs(v) > 50.0) {
      if (grad) grad->fill(0.0);
      return kInf;
    }
  }
  std::vector<SubjectLaplace> res(subjects_.size());
  parallel_for(subjects_.size(), [&](std::size_t i) {
    res[i] = laplace_impl(lp, subjects_[i], cfg_, grad != nullptr, modes_[i]);
  });
  double total = 0.0;
  LogParams g{};
  int failures = 0;
  for (const auto& r : res) {
    total += r.neg2ll;
    for (int q = 0; q < 5; ++q) g[q] += r.grad[q];
    if (!r.converged) ++failures;
  }
  inner_failures_ = failures;
  if (!std::isfinite(total)) {
    if (grad) grad->fill(0.0);
    return kInf;
  }
  if (total < best_) {
    best_ = total;
    for (std::size_t i = 0; i < res.size(); ++i) modes_[i] = {res[i].eta_cl, res[i].eta_v};
  }
  if (grad) *grad = g;
  return total;
}

LogParams LaplaceObjective::fd_gradient(const LogParams& lp) {
  LogParams g{};
  for (int q = 0; q < 5; ++q) {
    LogParams hi = lp;
    LogParams lo = lp;
    hi[q] += cfg_.fd_step;
    lo[q] -= cfg_.fd_step;
    g[q] = (value(hi) - value(lo)) / (2.0 * cfg_.fd_step);
  }
  return g;
}

PopulationParams two_stage_init(const TrialDataset& ds) {
  struct Individual {
    double log_cl = 0.0;
    double log_v = 0.0;
    double rss = 0.0;
    std::size_t n = 0;
    bool ok = false;
  };
  std::vector<Individual> fits(ds.subjects.size());
  parallel_for(ds.subjects.size(), [&](std::size_t i) {
    const auto& r = ds.subjects[i];
    if (std::any_of(r.troughs.begin(), r.troughs.end(), [](double y) { return !(y > 0.0); })) return;
    const SubjectData s = make_subject_data(r);
    const std::size_t n = s.y.size();
    // For a fixed elimination rate the best log v is closed-form, so profile it out.
    auto profile = [&](double log_k, double* log_v) {
      const double k = std::exp(log_k);
      std::vector<double> r0(n);
      for (std::size_t j = 0; j < n; ++j) {
        double sum = 0.0;
        for (int d = s.offsets[j]; d < s.offsets[j + 1]; ++d) sum += s.amount[d] * std::exp(-s.lag[d] * k);
        r0[j] = std::log(sum) - std::log(s.y[j]);
      }
      const double b = stats::mean(r0);
      if (log_v) *log_v = b;
      double rss = 0.0;
      for (double v : r0) rss += (v - b) * (v - b);
      return rss;
    };
    constexpr int kGrid = 61;
    const double lo = std::log(1e-6);
    const double hi = std::log(1.0);
    int best = 0;
    double best_rss = kInf;
    for (int g = 0; g < kGrid; ++g) {
      const double rss = profile(lo + (hi - lo) * g / (kGrid - 1), nullptr);
      if (rss < best_rss) {
        best_rss = rss;
        best = g;
      }
    }
    const double step = (hi - lo) / (kGrid - 1);
    const auto [log_k, rss] = boost::math::tools::brent_find_minima(
        [&](double x) { return profile(x, nullptr); }, lo + step * std::max(0, best - 1),
        lo + step * std::min(kGrid - 1, best + 1), 40);
    Individual& f = fits[i];
    profile(log_k, &f.log_v);
    f.log_cl = log_k + f.log_v;
    f.rss = rss;
    f.n = n;
    f.ok = std::isfinite(f.log_cl) && std::isfinite(f.log_v);
  });

  std::vector<double> a;
  std::vector<double> b;
  double rss = 0.0;
  std::size_t n_obs = 0;
  for (const auto& f : fits) {
    if (!f.ok || f.n < 3) continue;
    a.push_back(f.log_cl);
    b.push_back(f.log_v);
    rss += f.rss;
    n_obs += f.n;
  }
  if (a.size() < 2) {
    const PopulationParams d{};
    return {0.5 * d.mu_cl, 0.5 * d.mu_v, 0.5 * d.omega_cl, 0.5 * d.omega_v, 0.5 * d.xi};
  }
  // Individual fits on few noisy points have heavy tails; use median and MAD.
  auto mad_sd = [](const std::vector<double>& x, double med) {
    std::vector<double> dev(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) dev[i] = std::abs(x[i] - med);
    return 1.4826 * stats::quantile(dev, 0.5);
  };
  const double med_a = stats::quantile(a, 0.5);
  const double med_b = stats::quantile(b, 0.5);
  PopulationParams p;
  p.mu_cl = std::exp(med_a);
  p.mu_v = std::exp(med_b);
  p.omega_cl = std::clamp(mad_sd(a, med_a), 0.01, 5.0);
  p.omega_v = std::clamp(mad_sd(b, med_b), 0.01, 5.0);
  p.xi = std::clamp(std::sqrt(rss / static_cast<double>(n_obs - 2 * a.size())), 1e-3, 1.0);
  return p;
}

NLMEFit fit_nlme(const TrialDataset& ds, const PopulationParams& init, const LaplaceConfig& cfg) {
  if (ds.regime != Regime::kObserved) {
    throw InvalidArgument("model fitting requires an observed-regime dataset");
  }
  if (ds.subjects.empty()) throw InvalidArgument("dataset has no subjects");
  validate(init);
  validate(cfg);

  LaplaceObjective obj(ds, cfg);
  const optim::Objective f = [&](const optim::Vector& x, optim::Vector& g) {
    LogParams lp;
    std::copy(x.begin(), x.end(), lp.begin());
    LogParams grad{};
    const double v = obj.value_and_gradient(lp, grad);
    std::copy(grad.begin(), grad.end(), g.begin());
    return v;
  };
  optim::BfgsOptions opts;
  opts.grad_tol = cfg.outer_tol;
  opts.max_iters = cfg.max_outer_iters;
  const LogParams start = to_log(init);
  const auto res = minimize_bfgs(f, optim::Vector(start.begin(), start.end()), opts);

  LogParams best;
  std::copy(res.x.begin(), res.x.end(), best.begin());
  NLMEFit fit;
  fit.est = from_log(best);
  fit.neg2ll = obj.value(best);
  fit.converged = res.converged && obj.inner_failures() == 0;
  fit.iterations = res.iterations;
  fit.evaluations = res.evaluations + 1;
  fit.inner_failures = obj.inner_failures();
  fit.trace = res.trace;
  fit.subject_ids.reserve(obj.size());
  for (const auto& s : obj.subjects()) fit.subject_ids.push_back(s.id);
  fit.eb = obj.modes();
  return fit;
}

std::array<double, 2> eb_estimates(const NLMEFit& fit, std::int64_t subject_id) {
  const auto it = std::find(fit.subject_ids.begin(), fit.subject_ids.end(), subject_id);
  if (it == fit.subject_ids.end()) {
    throw InvalidArgument("unknown subject id " + std::to_string(subject_id));
  }
  return fit.eb[static_cast<std::size_t>(it - fit.subject_ids.begin())];
}

std::vector<double> simulate_counterfactual_nlme(const PopulationParams& est, const Arm& arm,
                                                 std::size_t n_draws, std::uint64_t seed) {
  if (!(est.mu_cl > 0.0) || !(est.mu_v > 0.0) || !(est.omega_cl >= 0.0) || !(est.omega_v >= 0.0) ||
      !(est.xi >= 0.0)) {
    throw InvalidArgument("typical values must be positive and spreads non-negative");
  }
  const auto schedule = planned_schedule(arm);
  std::vector<double> out(n_draws);
  parallel_for(n_draws, [&](std::size_t i) {
    auto rs = rng::make_stream(seed, rng::Domain::kNlmeCounterfactual, arm.id, 1,
                               static_cast<std::uint32_t>(i));
    const double z_cl = rs.normal();
    const double z_v = rs.normal();
    const double eps = rs.normal();
    const PKParams p = individual_params(est, est.omega_cl * z_cl, est.omega_v * z_v);
    out[i] = apply_residual(conc_linear(p, schedule, kObsTimes.back()), est.xi, eps);
  });
  return out;
}

void write_fit_report(const NLMEFit& fit, std::ostream& out) {
  nlohmann::ordered_json j;
  j["estimates"] = {{"mu_cl", fit.est.mu_cl},
                    {"mu_v", fit.est.mu_v},
                    {"omega_cl", fit.est.omega_cl},
                    {"omega_v", fit.est.omega_v},
                    {"xi", fit.est.xi}};
  j["neg2ll"] = fit.neg2ll;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["evaluations"] = fit.evaluations;
  j["inner_failures"] = fit.inner_failures;
  j["n_subjects"] = fit.subject_ids.size();
  j["trace"] = fit.trace;
  out << j.dump(2) << '\n';
}

void write_eb_csv(const NLMEFit& fit, std::ostream& out) {
  out << "subject_id,eta_cl_hat,eta_v_hat\n";
  for (std::size_t i = 0; i < fit.subject_ids.size(); ++i) {
    out << fit.subject_ids[i] << ',' << format_real(fit.eb[i][0]) << ',' << format_real(fit.eb[i][1]) << '\n';
  }
}

}  // namespace titrate
