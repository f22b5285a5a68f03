#include "titrate/ipw.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "titrate/dataset_io.hpp"
#include "titrate/errors.hpp"
#include "titrate/stats.hpp"

namespace titrate {

namespace {

// log(1 + e^x) without overflow.
double log1p_exp(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

std::string_view to_string(IEModelSource s) { return s == IEModelSource::kTrue ? "true" : "fitted"; }

std::array<double, kNumDecisions> IEModel::alphas() const {
  std::array<double, kNumDecisions> a{};
  for (int t = 0; t < kNumDecisions; ++t) {
    a[t] = beta != 0.0 ? std::exp(-intercepts[t] / beta) : std::numeric_limits<double>::quiet_NaN();
  }
  return a;
}

double IEModel::log_odds(int t, double e) const {
  if (!(e > 0.0)) throw InvalidArgument("exposure must be positive");
  return intercepts[t] + beta * std::log(e);
}

IEModel make_ie_model(double beta, const std::array<double, kNumDecisions>& alphas) {
  if (!std::isfinite(beta)) throw InvalidArgument("slope must be finite");
  IEModel m;
  m.beta = beta;
  for (int t = 0; t < kNumDecisions; ++t) {
    if (!(alphas[t] > 0.0)) throw InvalidArgument("thresholds must be positive");
    m.intercepts[t] = -beta * std::log(alphas[t]);
  }
  return m;
}

IEModel true_ie_model(const Scenario& scenario) {
  const Scenario s = resolve_thresholds(scenario);
  return make_ie_model(s.effective_beta(), s.effective_alphas());
}

IEModel fit_ie_model(const TrialDataset& ds) {
  if (ds.regime != Regime::kObserved) throw InvalidArgument("IE model fitting requires observed data");
  struct Row {
    int t;
    double x;
    double s;
  };
  std::vector<Row> rows;
  std::array<std::size_t, kNumDecisions> n{};
  std::array<std::size_t, kNumDecisions> events{};
  for (const auto& r : ds.subjects) {
    const auto risk = decisions_at_risk(r, ds.scenario.adherence);
    for (int t = 0; t < kNumDecisions; ++t) {
      if (!risk[t]) continue;
      if (!(r.troughs[t] > 0.0)) throw InvalidArgument("exposure must be positive");
      rows.push_back({t, std::log(r.troughs[t]), r.ie[t] ? 1.0 : 0.0});
      ++n[t];
      if (r.ie[t]) ++events[t];
    }
  }
  for (int t = 0; t < kNumDecisions; ++t) {
    if (n[t] == 0) throw EstimationError("no at-risk observations at decision " + std::to_string(t + 1));
    if (events[t] == 0 || events[t] == n[t]) {
      throw EstimationError("outcome is constant at decision " + std::to_string(t + 1) + " (separation)");
    }
  }

  // Newton-Raphson on (c_1, c_2, c_3, beta) with step halving.
  constexpr int kP = kNumDecisions + 1;
  using Vec = Eigen::Matrix<double, kP, 1>;
  using Mat = Eigen::Matrix<double, kP, kP>;
  auto loglik = [&](const Vec& th, Vec* g, Mat* h) {
    double ll = 0.0;
    if (g) g->setZero();
    if (h) h->setZero();
    for (const auto& row : rows) {
      const double eta = th[row.t] + th[kNumDecisions] * row.x;
      ll += row.s * eta - log1p_exp(eta);
      if (g || h) {
        const double p = 1.0 / (1.0 + std::exp(-eta));
        Vec z = Vec::Zero();
        z[row.t] = 1.0;
        z[kNumDecisions] = row.x;
        if (g) *g += (row.s - p) * z;
        if (h) *h += p * (1.0 - p) * z * z.transpose();
      }
    }
    return ll;
  };

  Vec th = Vec::Zero();
  Vec g;
  Mat h;
  double ll = loglik(th, &g, &h);
  bool converged = false;
  for (int it = 0; it < 100; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < 1e-9 * static_cast<double>(rows.size())) {
      converged = true;
      break;
    }
    const Vec step = h.ldlt().solve(g);
    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k < 50; ++k) {
      const Vec cand = th + t * step;
      const double ll_new = loglik(cand, nullptr, nullptr);
      if (std::isfinite(ll_new) && ll_new >= ll) {
        th = cand;
        ll = ll_new;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    ll = loglik(th, &g, &h);
    if (!accepted || step.lpNorm<Eigen::Infinity>() * t < 1e-12) {
      converged = g.lpNorm<Eigen::Infinity>() < 1e-6 * static_cast<double>(rows.size());
      break;
    }
  }
  if (!converged || !th.allFinite()) throw EstimationError("IE model fit did not converge");

  IEModel m;
  m.source = IEModelSource::kFitted;
  m.beta = th[kNumDecisions];
  for (int t = 0; t < kNumDecisions; ++t) m.intercepts[t] = th[t];
  const Mat cov = h.inverse();
  m.beta_se = std::sqrt(cov(kNumDecisions, kNumDecisions));
  return m;
}

WeightVector compute_weights(const TrialDataset& ds, const IEModel& model, const WeightOptions& opts,
                             int arm_id) {
  if (ds.regime != Regime::kObserved) throw InvalidArgument("weights require an observed-regime dataset");
  if (opts.cap_quantile && !(*opts.cap_quantile > 0.0 && *opts.cap_quantile <= 1.0)) {
    throw InvalidArgument("cap quantile must be in (0, 1]");
  }
  WeightVector wv;
  for (const auto& r : ds.subjects) {
    if (!r.adherent || (arm_id != 0 && r.arm_id != arm_id)) continue;
    const auto risk = decisions_at_risk(r, ds.scenario.adherence);
    double log_w = 0.0;
    std::array<double, kNumDecisions> pa{1.0, 1.0, 1.0};
    for (int t = 0; t < kNumDecisions; ++t) {
      if (!risk[t]) continue;
      const double x = model.log_odds(t, r.troughs[t]);
      log_w += log1p_exp(x);  // 1 / (1 - p) = 1 + e^x
      pa[t] = std::exp(-log1p_exp(x));
    }
    const double w = std::exp(log_w);
    wv.subject_ids.push_back(r.subject_id);
    wv.arm_ids.push_back(r.arm_id);
    wv.w.push_back(w);
    wv.p_adhere.push_back(pa);
    if (!std::isfinite(w)) ++wv.n_infinite;
  }
  if (wv.w.empty()) throw PositivityError("no adherent subjects to weight");

  if (opts.cap_quantile) {
    std::vector<double> finite;
    for (double w : wv.w)
      if (std::isfinite(w)) finite.push_back(w);
    if (finite.empty()) throw PositivityError("all weights are infinite");
    const double cap = stats::quantile(finite, *opts.cap_quantile);
    wv.cap = cap;
    for (double& w : wv.w) {
      if (w > cap) {
        w = cap;
        ++wv.n_truncated;
      }
    }
  } else if (wv.n_infinite > 0) {
    throw PositivityError(std::to_string(wv.n_infinite) + " subject(s) have infinite weight");
  }
  return wv;
}

WeightedSummary weighted_summary(std::span<const double> x, std::span<const double> w) {
  if (x.size() != w.size()) throw InvalidArgument("values and weights differ in length");
  double sw = 0.0;
  double swx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(w[i] >= 0.0) || !std::isfinite(w[i])) throw InvalidArgument("weights must be finite and non-negative");
    sw += w[i];
    swx += w[i] * x[i];
  }
  if (!(sw > 0.0)) throw InvalidArgument("weights are all zero");
  const double m = swx / sw;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) ss += w[i] * (x[i] - m) * (x[i] - m);
  return {m, std::sqrt(ss / sw)};
}

void write_weights_csv(const WeightVector& wv, std::ostream& out) {
  out << "subject_id,arm,w,p_adhere1,p_adhere2,p_adhere3\n";
  for (std::size_t i = 0; i < wv.w.size(); ++i) {
    out << wv.subject_ids[i] << ',' << wv.arm_ids[i] << ',' << format_real(wv.w[i]);
    for (double p : wv.p_adhere[i]) out << ',' << format_real(p);
    out << '\n';
  }
}

}  // namespace titrate
