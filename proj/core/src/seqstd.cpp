#include "titrate/seqstd.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <nlohmann/json.hpp>
#include <ostream>

#include "titrate/errors.hpp"
#include "titrate/parallel.hpp"
#include "titrate/stats.hpp"

namespace titrate {

std::string_view to_string(CondSubjects c) { return c == CondSubjects::kAll ? "all" : "adherent"; }

CondSubjects parse_cond_subjects(std::string_view s) {
  if (s == "all") return CondSubjects::kAll;
  if (s == "adherent") return CondSubjects::kAdherent;
  throw InvalidArgument("unknown conditioning subset '" + std::string(s) + "'");
}

double CondModel::predict(std::span<const double> doses, double e_norm) const {
  double e = beta[0];
  for (int tau = 0; tau < t; ++tau) e += beta[tau + 1] * doses[tau] * e_norm;
  return e;
}

E1Model fit_e1_model(const TrialDataset& ds, int arm_id) {
  const auto subjects = ds.arm_subjects(arm_id);
  if (subjects.size() < 2) throw EstimationError("arm " + std::to_string(arm_id) + " has fewer than 2 subjects");
  std::vector<double> x;
  x.reserve(subjects.size());
  for (const auto* s : subjects) {
    if (!(s->troughs[0] > 0.0)) throw InvalidArgument("first trough must be positive");
    x.push_back(std::log(s->troughs[0] / s->doses[0].amount));
  }
  E1Model m{arm_id, stats::mean(x), stats::sd(x, 1), x.size()};
  if (!(m.gamma0 > 0.0)) throw EstimationError("first-trough model is degenerate (zero variance)");
  return m;
}

CondModel fit_cond_model(const TrialDataset& ds, int arm_id, int t, CondSubjects subjects) {
  if (t < 2 || t > kNumDoses) throw InvalidArgument("conditional model index must be in 2..4");
  std::vector<const SubjectRecord*> rows;
  for (const auto* s : ds.arm_subjects(arm_id)) {
    bool keep = true;
    if (subjects == CondSubjects::kAdherent) {
      for (int k = 0; k < t - 1; ++k) keep = keep && !s->ie[k];
    }
    if (keep) rows.push_back(s);
  }
  if (rows.size() < static_cast<std::size_t>(t + 2)) {
    throw EstimationError("arm " + std::to_string(arm_id) + ": too few subjects for the conditional model");
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(n, t + 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = *rows[static_cast<std::size_t>(i)];
    const double e_norm = s.troughs[0] / s.doses[0].amount;
    x(i, 0) = 1.0;
    for (int tau = 0; tau < t; ++tau) x(i, tau + 1) = s.doses[tau].amount * e_norm;
    y(i) = s.troughs[t - 1];
  }
  const Eigen::VectorXd b = x.completeOrthogonalDecomposition().solve(y);
  const Eigen::VectorXd r = y - x * b;

  CondModel m;
  m.arm_id = arm_id;
  m.t = t;
  m.n = rows.size();
  m.beta.assign(b.data(), b.data() + b.size());
  const double ss_tot = (y.array() - y.mean()).square().sum();
  m.r_squared = ss_tot > 0.0 ? 1.0 - r.squaredNorm() / ss_tot : 1.0;

  std::map<DosePair, double> ss;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = *rows[static_cast<std::size_t>(i)];
    const DosePair key{s.doses[t - 2].amount, s.doses[t - 1].amount};
    ss[key] += r(i) * r(i);
    ++m.counts[key];
  }
  for (const auto& [key, count] : m.counts) {
    if (count < 2) {
      m.dropped.push_back(key);
      continue;
    }
    m.scales[key] = std::sqrt(ss[key] / static_cast<double>(count));
  }
  for (const auto& key : m.dropped) m.counts.erase(key);
  return m;
}

ArmModels fit_arm_models(const TrialDataset& ds, int arm_id, CondSubjects subjects) {
  if (ds.regime != Regime::kObserved) {
    throw InvalidArgument("standardization requires an observed-regime dataset");
  }
  ArmModels m;
  m.e1 = fit_e1_model(ds, arm_id);
  for (int t = 2; t <= kNumDoses; ++t) m.cond[t - 2] = fit_cond_model(ds, arm_id, t, subjects);
  return m;
}

std::vector<double> sample_chain(std::span<const ChainStep> steps, std::size_t n_draws, std::uint64_t seed,
                                 rng::Domain domain, int arm_id) {
  if (steps.empty()) throw InvalidArgument("chain has no steps");
  std::vector<double> out(n_draws);
  parallel_for(n_draws, [&](std::size_t i) {
    auto rs = rng::make_stream(seed, domain, arm_id, 1, static_cast<std::uint32_t>(i));
    std::vector<double> history;
    history.reserve(steps.size());
    for (const auto& step : steps) history.push_back(step(history, rs));
    out[i] = history.back();
  });
  return out;
}

std::vector<double> gformula_sample_prefix(const ArmModels& models, const Arm& arm, int steps,
                                           std::size_t n_draws, std::uint64_t seed) {
  if (steps < 1 || steps > kNumDoses) throw InvalidArgument("chain length must be in 1..4");
  if (models.e1.arm_id != arm.id) throw InvalidArgument("models were fitted for a different arm");
  const auto& ladder = arm.ladder;

  std::vector<double> scale(kNumDoses, 0.0);
  for (int t = 2; t <= steps; ++t) {
    const auto& c = models.cond[t - 2];
    const auto it = c.scales.find({ladder[t - 2], ladder[t - 1]});
    if (it == c.scales.end()) {
      throw PositivityError("arm " + std::to_string(arm.id) + ": no fitted data for planned doses (" +
                            std::to_string(ladder[t - 2]) + ", " + std::to_string(ladder[t - 1]) + ") at t = " +
                            std::to_string(t));
    }
    scale[t - 1] = it->second;
  }

  std::vector<ChainStep> chain;
  const E1Model e1 = models.e1;
  chain.emplace_back([e1, d1 = ladder[0]](std::span<const double>, rng::Stream& rs) {
    return d1 * std::exp(e1.beta0 + e1.gamma0 * rs.normal());
  });
  for (int t = 2; t <= steps; ++t) {
    chain.emplace_back([&c = models.cond[t - 2], &ladder, sd = scale[t - 1]](std::span<const double> h,
                                                                               rng::Stream& rs) {
      return c.predict(ladder, h[0] / ladder[0]) + sd * rs.normal();
    });
  }
  return sample_chain(chain, n_draws, seed, rng::Domain::kGFormula, arm.id);
}

std::vector<double> gformula_sample(const ArmModels& models, const Arm& arm, std::size_t n_draws,
                                    std::uint64_t seed) {
  return gformula_sample_prefix(models, arm, kNumDoses, n_draws, seed);
}

void write_models_json(const std::vector<ArmModels>& models, std::ostream& out) {
  auto j = nlohmann::ordered_json::array();
  for (const auto& m : models) {
    nlohmann::ordered_json arm;
    arm["arm"] = m.e1.arm_id;
    arm["e1"] = {{"beta0", m.e1.beta0}, {"gamma0", m.e1.gamma0}, {"n", m.e1.n}};
    auto conds = nlohmann::ordered_json::array();
    for (const auto& c : m.cond) {
      nlohmann::ordered_json cj;
      cj["t"] = c.t;
      cj["n"] = c.n;
      cj["beta"] = c.beta;
      cj["r_squared"] = c.r_squared;
      auto strata = nlohmann::ordered_json::array();
      for (const auto& [key, sd] : c.scales) {
        strata.push_back({{"d_prev", key.first}, {"d_cur", key.second}, {"sd", sd}, {"n", c.counts.at(key)}});
      }
      cj["strata"] = strata;
      auto dropped = nlohmann::ordered_json::array();
      for (const auto& key : c.dropped) dropped.push_back({key.first, key.second});
      cj["dropped"] = dropped;
      conds.push_back(cj);
    }
    arm["conditional"] = conds;
    j.push_back(arm);
  }
  out << j.dump(2) << '\n';
}

}  // namespace titrate
