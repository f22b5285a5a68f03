#include "titrate/trial.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "titrate/errors.hpp"
#include "titrate/parallel.hpp"
#include "titrate/rng.hpp"

namespace titrate {

namespace {

constexpr std::array<Arm, kNumArms> kArms{{
    {1, {30.0, 60.0, 60.0, 60.0}},
    {2, {30.0, 60.0, 120.0, 120.0}},
    {3, {60.0, 120.0, 120.0, 120.0}},
    {4, {60.0, 120.0, 240.0, 240.0}},
    {5, {60.0, 240.0, 240.0, 240.0}},
}};

double model_conc(const Scenario& s, double eta_cl, double eta_v,
                  std::span<const DoseEvent> doses, double t) {
  if (s.variant == Variant::kNonlinear) {
    return conc_mm(individual_mm_params(s.mm, eta_cl, eta_v), doses, t, s.mm_step);
  }
  return conc_linear(individual_params(s.pop, eta_cl, eta_v), doses, t);
}

double median_of(std::vector<double> v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

std::int64_t subject_id(const Scenario& s, int arm_id, std::uint32_t index) {
  return static_cast<std::int64_t>(arm_id - 1) * static_cast<std::int64_t>(s.n_per_arm) +
         static_cast<std::int64_t>(index) + 1;
}

}  // namespace

std::span<const Arm> standard_arms() { return kArms; }

const Arm& arm_by_id(int id) {
  if (id < 1 || id > kNumArms) throw InvalidArgument("unknown arm id " + std::to_string(id));
  return kArms[static_cast<std::size_t>(id - 1)];
}

double planned_dose(const Arm& arm, int step) {
  if (step < 1 || step > kNumDoses) throw InvalidArgument("dose step must be in 1..4");
  return arm.ladder[static_cast<std::size_t>(step - 1)];
}

double planned_dose(int arm_id, int step) { return planned_dose(arm_by_id(arm_id), step); }

std::vector<DoseEvent> planned_schedule(const Arm& arm) {
  std::vector<DoseEvent> out;
  for (int i = 0; i < kNumDoses; ++i) {
    out.push_back({kDoseTimes[static_cast<std::size_t>(i)], arm.ladder[static_cast<std::size_t>(i)]});
  }
  return out;
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kMain: return "main";
    case Variant::kNonlinear: return "nonlinear";
    case Variant::kCmax: return "cmax";
    case Variant::kHighRes: return "highres";
  }
  return "main";
}

Variant parse_variant(std::string_view s) {
  if (s == "main") return Variant::kMain;
  if (s == "nonlinear") return Variant::kNonlinear;
  if (s == "cmax") return Variant::kCmax;
  if (s == "highres") return Variant::kHighRes;
  throw InvalidArgument("unknown scenario '" + std::string(s) + "'");
}

std::string_view to_string(Adherence a) {
  return a == Adherence::kDoseChange ? "dose_change" : "any_event";
}

Adherence parse_adherence(std::string_view s) {
  if (s == "dose_change") return Adherence::kDoseChange;
  if (s == "any_event") return Adherence::kAnyEvent;
  throw InvalidArgument("unknown adherence definition '" + std::string(s) + "'");
}

std::string_view to_string(CmaxDriver d) {
  return d == CmaxDriver::kPeak ? "peak" : "dose_over_v";
}

CmaxDriver parse_cmax_driver(std::string_view s) {
  if (s == "peak") return CmaxDriver::kPeak;
  if (s == "dose_over_v") return CmaxDriver::kDoseOverVolume;
  throw InvalidArgument("unknown cmax driver '" + std::string(s) + "'");
}

std::string_view to_string(Regime r) {
  return r == Regime::kObserved ? "observed" : "ground_truth";
}

std::array<double, kNumDecisions> Scenario::effective_alphas() const {
  auto a = alphas;
  for (auto& x : a) x += alpha_shift;
  return a;
}

Scenario make_scenario(Variant v, std::size_t n_per_arm, std::uint64_t seed) {
  Scenario s;
  s.variant = v;
  s.n_per_arm = n_per_arm;
  s.seed = seed;
  if (v == Variant::kHighRes) s.pop.xi = 0.3;
  if (v == Variant::kCmax) s.pilot_alphas = true;
  return s;
}

void validate(const Scenario& s) {
  if (s.n_per_arm < 1) throw InvalidArgument("n_per_arm must be at least 1");
  if (s.n_per_arm > 0xFFFFFFFFu) throw InvalidArgument("n_per_arm too large");
  if (!(s.effective_beta() >= 0.0) || !std::isfinite(s.effective_beta())) {
    throw InvalidArgument("beta must be finite and non-negative");
  }
  validate(s.pop);
  if (s.variant == Variant::kNonlinear) {
    validate(s.mm);
    if (!(s.mm_step > 0.0)) throw InvalidArgument("mm_step must be positive");
  }
  if (!s.pilot_alphas) {
    const auto a = s.effective_alphas();
    if (!(a[0] > 0.0)) throw InvalidArgument("alphas must be positive");
    for (std::size_t i = 1; i < a.size(); ++i) {
      if (!(a[i] > a[i - 1])) throw InvalidArgument("alphas must be strictly increasing");
    }
  }
}

std::vector<const SubjectRecord*> TrialDataset::arm_subjects(int arm_id) const {
  std::vector<const SubjectRecord*> out;
  for (const auto& s : subjects) {
    if (s.arm_id == arm_id) out.push_back(&s);
  }
  return out;
}

double ie_probability(double exposure, double alpha, double beta) {
  if (!(exposure > 0.0)) throw InvalidArgument("exposure must be positive");
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  const double x = beta * std::log(exposure / alpha);
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

bool increase_pending(const Arm& arm, int pointer) {
  if (pointer < 0 || pointer + 1 >= kNumDoses) return false;
  return arm.ladder[static_cast<std::size_t>(pointer + 1)] >
         arm.ladder[static_cast<std::size_t>(pointer)];
}

std::array<bool, kNumDecisions> decisions_at_risk(const SubjectRecord& s, Adherence adherence) {
  std::array<bool, kNumDecisions> out{};
  const Arm& arm = arm_by_id(s.arm_id);
  int pointer = 0;
  for (int t = 0; t < kNumDecisions; ++t) {
    out[static_cast<std::size_t>(t)] =
        adherence == Adherence::kAnyEvent || increase_pending(arm, pointer);
    if (!s.ie[static_cast<std::size_t>(t)]) ++pointer;
  }
  return out;
}

SubjectRecord simulate_subject(const Arm& arm, const Scenario& scenario, std::uint32_t index,
                               Regime regime, SubjectTrace* trace) {
  const std::uint64_t seed = scenario.seed;
  const auto purpose = [](rng::Purpose p, int offset) {
    return static_cast<std::uint16_t>(static_cast<int>(p) + offset);
  };

  SubjectRecord rec;
  rec.subject_id = subject_id(scenario, arm.id, index);
  rec.arm_id = arm.id;
  {
    auto eta = rng::make_stream(seed, rng::Domain::kTrial, arm.id, purpose(rng::Purpose::kEta, 0), index);
    rec.eta_cl = scenario.pop.omega_cl * eta.normal();
    rec.eta_v = scenario.pop.omega_v * eta.normal();
  }
  const PKParams params = individual_params(scenario.pop, rec.eta_cl, rec.eta_v);
  const double beta = scenario.effective_beta();
  const auto alphas = scenario.effective_alphas();
  const double xi = scenario.pop.xi;

  auto residual = [&](int t) {
    auto s = rng::make_stream(seed, rng::Domain::kTrial, arm.id, purpose(rng::Purpose::kEps1, t), index);
    return s.normal();
  };

  std::vector<DoseEvent> given;
  given.reserve(kNumDoses);
  given.push_back({kDoseTimes[0], arm.ladder[0]});
  int pointer = 0;
  SubjectTrace tr;
  tr.params = params;

  for (int t = 0; t < kNumDecisions; ++t) {
    const auto ti = static_cast<std::size_t>(t);
    const double conc = model_conc(scenario, rec.eta_cl, rec.eta_v, given, kObsTimes[ti]);
    rec.troughs[ti] = apply_residual(conc, xi, residual(t));

    bool ie = false;
    if (regime == Regime::kObserved) {
      double driver = rec.troughs[ti];
      if (scenario.variant == Variant::kCmax) {
        driver = scenario.cmax_driver == CmaxDriver::kPeak
                     ? conc_linear_after(params, given, kDoseTimes[ti])
                     : given.back().amount / params.v;
      }
      const double p = ie_probability(driver, alphas[ti], beta);
      auto u = rng::make_stream(seed, rng::Domain::kTrial, arm.id, purpose(rng::Purpose::kIe1, t), index);
      const bool event = u.uniform() < p;
      const bool at_risk = scenario.adherence == Adherence::kAnyEvent || increase_pending(arm, pointer);
      ie = event && at_risk;
      tr.driver[ti] = driver;
      tr.ie_prob[ti] = p;
      tr.adverse_event[ti] = event;
      tr.at_risk[ti] = at_risk;
    }
    rec.ie[ti] = ie;
    if (!ie) ++pointer;
    given.push_back({kDoseTimes[ti + 1], arm.ladder[static_cast<std::size_t>(pointer)]});
  }

  const double final_conc = model_conc(scenario, rec.eta_cl, rec.eta_v, given, kObsTimes[3]);
  rec.troughs[3] = apply_residual(final_conc, xi, residual(3));
  std::copy(given.begin(), given.end(), rec.doses.begin());
  rec.adherent = std::none_of(rec.ie.begin(), rec.ie.end(), [](bool b) { return b; });
  if (trace) *trace = tr;
  return rec;
}

std::array<double, kNumDecisions> pilot_thresholds(const Scenario& scenario) {
  const std::size_t n = scenario.n_per_arm;
  std::array<std::vector<double>, kNumDecisions> drivers;
  for (auto& d : drivers) d.resize(n * kNumArms);

  parallel_for(n * kNumArms, [&](std::size_t i) {
    const Arm& arm = kArms[i / n];
    const auto index = static_cast<std::uint32_t>(i % n);
    auto eta = rng::make_stream(scenario.seed, rng::Domain::kPilot, arm.id,
                                static_cast<std::uint16_t>(rng::Purpose::kEta), index);
    const double eta_cl = scenario.pop.omega_cl * eta.normal();
    const double eta_v = scenario.pop.omega_v * eta.normal();
    const PKParams p = individual_params(scenario.pop, eta_cl, eta_v);
    const auto schedule = planned_schedule(arm);
    for (int t = 0; t < kNumDecisions; ++t) {
      const auto ti = static_cast<std::size_t>(t);
      if (scenario.variant == Variant::kCmax && scenario.cmax_driver == CmaxDriver::kDoseOverVolume) {
        drivers[ti][i] = arm.ladder[ti] / p.v;
      } else if (scenario.variant == Variant::kCmax) {
        drivers[ti][i] = conc_linear_after(p, std::span(schedule).first(ti + 1), kDoseTimes[ti]);
      } else {
        drivers[ti][i] = model_conc(scenario, eta_cl, eta_v, std::span(schedule).first(ti + 1), kObsTimes[ti]);
      }
    }
  });

  std::array<double, kNumDecisions> out{};
  for (std::size_t t = 0; t < kNumDecisions; ++t) out[t] = median_of(std::move(drivers[t]));
  return out;
}

Scenario resolve_thresholds(const Scenario& scenario) {
  if (!scenario.pilot_alphas) return scenario;
  Scenario s = scenario;
  s.alphas = pilot_thresholds(scenario);
  s.alpha_shift = 0.0;
  s.pilot_alphas = false;
  return s;
}

namespace {

TrialDataset simulate_regime(const Scenario& input, Regime regime) {
  validate(input);
  TrialDataset ds;
  ds.scenario = resolve_thresholds(input);
  validate(ds.scenario);
  ds.regime = regime;
  const std::size_t n = ds.scenario.n_per_arm;
  ds.subjects.resize(n * kNumArms);
  parallel_for(ds.subjects.size(), [&](std::size_t i) {
    ds.subjects[i] = simulate_subject(kArms[i / n], ds.scenario, static_cast<std::uint32_t>(i % n), regime);
  });
  return ds;
}

}  // namespace

TrialDataset simulate_trial(const Scenario& scenario) {
  return simulate_regime(scenario, Regime::kObserved);
}

TrialDataset simulate_ground_truth(const Scenario& scenario) {
  return simulate_regime(scenario, Regime::kGroundTruth);
}

TrialDataset per_protocol_filter(const TrialDataset& ds) {
  TrialDataset out;
  out.scenario = ds.scenario;
  out.regime = ds.regime;
  std::copy_if(ds.subjects.begin(), ds.subjects.end(), std::back_inserter(out.subjects),
               [](const SubjectRecord& s) { return s.adherent; });
  return out;
}

std::vector<double> final_troughs(const TrialDataset& ds, int arm_id) {
  std::vector<double> out;
  for (const auto& s : ds.subjects) {
    if (s.arm_id == arm_id) out.push_back(s.troughs[3]);
  }
  return out;
}

}  // namespace titrate
