#include "titrate/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <nlohmann/json.hpp>
#include <ostream>

#include "titrate/errors.hpp"
#include "titrate/stats.hpp"

namespace titrate {

namespace {

constexpr std::string_view kSummaryHeader = "scenario,arm,method,n,mean,sd,rel_mean,rel_sd,status";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

ArmEstimate failed(int arm, MethodId m, std::string_view status, std::string message) {
  ArmEstimate e;
  e.arm = arm;
  e.method = m;
  e.status = status;
  e.message = std::move(message);
  return e;
}

}  // namespace

std::string_view to_string(MethodId m) {
  switch (m) {
    case MethodId::kGroundTruth: return "ground_truth";
    case MethodId::kIntentToTreat: return "intent_to_treat";
    case MethodId::kPerProtocol: return "per_protocol";
    case MethodId::kStandardization: return "standardization";
    case MethodId::kNlme: return "nlme";
    case MethodId::kIpw: return "ipw";
  }
  return "ground_truth";
}

MethodId parse_method(std::string_view s) {
  for (MethodId m : kAllMethods) {
    if (to_string(m) == s) return m;
  }
  throw InvalidArgument("unknown method '" + std::string(s) + "'");
}

IESource effective_ie_source(const RunOptions& opts) {
  if (opts.ie_model != IESource::kAuto) return opts.ie_model;
  return opts.scenario.variant == Variant::kCmax ? IESource::kFitted : IESource::kTrue;
}

FitArtifacts fit_all(const TrialDataset& observed, const RunOptions& opts) {
  if (observed.regime != Regime::kObserved) {
    throw InvalidArgument("estimators must only see observed-regime data");
  }
  FitArtifacts f;
  try {
    const PopulationParams init =
        opts.nlme_init == NlmeInit::kTwoStage ? two_stage_init(observed) : observed.scenario.pop;
    f.nlme = fit_nlme(observed, init, opts.laplace);
  } catch (const std::exception& e) {
    f.nlme_error = e.what();
  }
  for (int a = 0; a < kNumArms; ++a) {
    try {
      f.seq[a] = fit_arm_models(observed, standard_arms()[a].id, opts.cond_subjects);
    } catch (const std::exception& e) {
      f.seq_error[a] = e.what();
    }
  }
  try {
    f.ie = effective_ie_source(opts) == IESource::kFitted ? fit_ie_model(observed) : true_ie_model(observed.scenario);
  } catch (const std::exception& e) {
    f.ie_error = e.what();
  }
  return f;
}

std::vector<ArmEstimate> ground_truth_estimates(const TrialDataset& ground_truth) {
  if (ground_truth.regime != Regime::kGroundTruth) throw InvalidArgument("expected a ground-truth dataset");
  std::vector<ArmEstimate> out;
  for (const auto& arm : standard_arms()) {
    ArmEstimate e;
    e.arm = arm.id;
    e.method = MethodId::kGroundTruth;
    e.values = final_troughs(ground_truth, arm.id);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ArmEstimate> estimate_all(const TrialDataset& observed, const FitArtifacts& fits,
                                      const RunOptions& opts) {
  if (observed.regime != Regime::kObserved) {
    throw InvalidArgument("estimators must only see observed-regime data");
  }
  const std::uint64_t seed = observed.scenario.seed;
  std::vector<ArmEstimate> out;
  for (int a = 0; a < kNumArms; ++a) {
    const Arm& arm = standard_arms()[a];

    ArmEstimate itt;
    itt.arm = arm.id;
    itt.method = MethodId::kIntentToTreat;
    itt.values = final_troughs(observed, arm.id);
    out.push_back(std::move(itt));

    ArmEstimate pp;
    pp.arm = arm.id;
    pp.method = MethodId::kPerProtocol;
    for (const auto* s : observed.arm_subjects(arm.id)) {
      if (s->adherent) pp.values.push_back(s->troughs.back());
    }
    if (pp.values.empty()) {
      out.push_back(failed(arm.id, MethodId::kPerProtocol, kStatusPositivity, "no adherent subjects"));
    } else {
      out.push_back(pp);
    }

    if (fits.seq[a]) {
      try {
        ArmEstimate e;
        e.arm = arm.id;
        e.method = MethodId::kStandardization;
        e.values = gformula_sample(*fits.seq[a], arm, opts.draws, seed);
        out.push_back(std::move(e));
      } catch (const PositivityError& err) {
        out.push_back(failed(arm.id, MethodId::kStandardization, kStatusPositivity, err.what()));
      } catch (const std::exception& err) {
        out.push_back(failed(arm.id, MethodId::kStandardization, kStatusFailed, err.what()));
      }
    } else {
      out.push_back(failed(arm.id, MethodId::kStandardization, kStatusFailed, fits.seq_error[a]));
    }

    if (fits.nlme) {
      ArmEstimate e;
      e.arm = arm.id;
      e.method = MethodId::kNlme;
      e.values = simulate_counterfactual_nlme(fits.nlme->est, arm, opts.draws, seed);
      if (!fits.nlme->converged) e.status = kStatusNotConverged;
      out.push_back(std::move(e));
    } else {
      out.push_back(failed(arm.id, MethodId::kNlme, kStatusFailed, fits.nlme_error));
    }

    if (fits.ie) {
      try {
        WeightOptions wo;
        wo.cap_quantile = opts.ipw_cap;
        const WeightVector wv = compute_weights(observed, *fits.ie, wo, arm.id);
        ArmEstimate e;
        e.arm = arm.id;
        e.method = MethodId::kIpw;
        e.values = pp.values;
        e.weights = wv.w;
        if (wv.n_truncated > 0) e.status = kStatusTruncated;
        out.push_back(std::move(e));
      } catch (const PositivityError& err) {
        out.push_back(failed(arm.id, MethodId::kIpw, kStatusPositivity, err.what()));
      }
    } else {
      out.push_back(failed(arm.id, MethodId::kIpw, kStatusFailed, fits.ie_error));
    }
  }
  return out;
}

std::vector<SummaryRow> summarize(std::string_view scenario, const std::vector<ArmEstimate>& truth,
                                  const std::vector<ArmEstimate>& estimates) {
  std::vector<SummaryRow> rows;
  for (const auto& arm : standard_arms()) {
    const ArmEstimate* gt = nullptr;
    for (const auto& t : truth) {
      if (t.arm == arm.id && t.method == MethodId::kGroundTruth) gt = &t;
    }
    if (!gt || gt->values.empty()) throw InvalidArgument("missing ground truth for arm " + std::to_string(arm.id));
    const double gt_mean = stats::mean(gt->values);
    const double gt_sd = stats::sd(gt->values);
    rows.push_back({std::string(scenario), arm.id, MethodId::kGroundTruth, gt->values.size(), gt_mean, gt_sd, 1.0,
                    1.0, std::string(kStatusOk)});

    for (MethodId m : kAllMethods) {
      if (m == MethodId::kGroundTruth) continue;
      for (const auto& e : estimates) {
        if (e.arm != arm.id || e.method != m) continue;
        SummaryRow r{std::string(scenario), arm.id, m, e.values.size(), kNaN, kNaN, kNaN, kNaN, e.status};
        if (!e.values.empty()) {
          WeightedSummary ws;
          if (e.weights.empty()) {
            ws = {stats::mean(e.values), stats::sd(e.values)};
          } else {
            ws = weighted_summary(e.values, e.weights);
          }
          r.mean = ws.mean;
          r.sd = ws.sd;
          r.rel_mean = ws.mean / gt_mean;
          r.rel_sd = ws.sd / gt_sd;
        }
        rows.push_back(std::move(r));
      }
    }
  }
  return rows;
}

RunResult run_scenario(const RunOptions& opts) {
  validate(opts);
  RunResult r;
  r.observed = simulate_trial(opts.scenario);
  r.ground_truth = simulate_ground_truth(opts.scenario);
  r.fits = fit_all(r.observed, opts);
  r.estimates = ground_truth_estimates(r.ground_truth);
  const auto est = estimate_all(r.observed, r.fits, opts);
  r.estimates.insert(r.estimates.end(), est.begin(), est.end());
  r.rows = summarize(to_string(opts.scenario.variant), r.estimates, est);
  return r;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out) {
  if (rows.empty()) throw InvalidArgument("no summary rows to write");
  out << kSummaryHeader << '\n';
  for (const auto& r : rows) {
    out << r.scenario << ',' << r.arm << ',' << to_string(r.method) << ',' << r.n << ',' << fixed6(r.mean) << ','
        << fixed6(r.sd) << ',' << fixed6(r.rel_mean) << ',' << fixed6(r.rel_sd) << ',' << r.status << '\n';
  }
}

void write_summary_json(const std::vector<SummaryRow>& rows, std::ostream& out) {
  if (rows.empty()) throw InvalidArgument("no summary rows to write");
  auto j = nlohmann::ordered_json::array();
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr); };
  for (const auto& r : rows) {
    j.push_back({{"scenario", r.scenario},
                 {"arm", r.arm},
                 {"method", to_string(r.method)},
                 {"n", r.n},
                 {"mean", num(r.mean)},
                 {"sd", num(r.sd)},
                 {"rel_mean", num(r.rel_mean)},
                 {"rel_sd", num(r.rel_sd)},
                 {"status", r.status}});
  }
  out << j.dump(2) << '\n';
}

std::vector<SummaryRow> read_summary_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kSummaryHeader) throw IoError("unexpected summary header");
  auto real = [](std::string_view s) {
    if (s == "nan" || s == "-nan") return kNaN;
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw IoError("bad number in summary: " + std::string(s));
    return x;
  };
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      const auto pos = line.find(',', start);
      f.push_back(line.substr(start, pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (f.size() != 9) throw IoError("summary row must have 9 fields");
    SummaryRow r;
    r.scenario = f[0];
    r.arm = std::stoi(f[1]);
    r.method = parse_method(f[2]);
    r.n = static_cast<std::size_t>(std::stoull(f[3]));
    r.mean = real(f[4]);
    r.sd = real(f[5]);
    r.rel_mean = real(f[6]);
    r.rel_sd = real(f[7]);
    r.status = f[8];
    rows.push_back(std::move(r));
  }
  return rows;
}

void emit(const std::vector<SummaryRow>& rows, const std::filesystem::path& dir) {
  if (rows.empty()) throw InvalidArgument("no summary rows to write");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::ofstream csv(dir / "summary.csv", std::ios::binary);
  std::ofstream json(dir / "summary.json", std::ios::binary);
  if (!csv || !json) throw IoError("cannot write summary files to " + dir.string());
  write_summary_csv(rows, csv);
  write_summary_json(rows, json);
  if (!csv || !json) throw IoError("failed writing summary files to " + dir.string());
}

const SummaryRow& find_row(const std::vector<SummaryRow>& rows, int arm, MethodId method) {
  for (const auto& r : rows) {
    if (r.arm == arm && r.method == method) return r;
  }
  throw InvalidArgument("no row for arm " + std::to_string(arm) + " method " + std::string(to_string(method)));
}

}  // namespace titrate
