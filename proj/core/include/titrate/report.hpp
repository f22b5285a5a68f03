#pragma once

// End-to-end scenario pipeline and summary tables.

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "titrate/config.hpp"
#include "titrate/ipw.hpp"
#include "titrate/nlme.hpp"
#include "titrate/seqstd.hpp"
#include "titrate/trial.hpp"

namespace titrate {

enum class MethodId { kGroundTruth, kIntentToTreat, kPerProtocol, kStandardization, kNlme, kIpw };
inline constexpr std::array<MethodId, 6> kAllMethods{MethodId::kGroundTruth,     MethodId::kIntentToTreat,
                                                     MethodId::kPerProtocol,     MethodId::kStandardization,
                                                     MethodId::kNlme,            MethodId::kIpw};
std::string_view to_string(MethodId m);
MethodId parse_method(std::string_view s);

/// Row status values.
inline constexpr std::string_view kStatusOk = "ok";
inline constexpr std::string_view kStatusNotConverged = "not_converged";
inline constexpr std::string_view kStatusPositivity = "positivity_failed";
inline constexpr std::string_view kStatusTruncated = "truncated";
inline constexpr std::string_view kStatusFailed = "estimation_failed";

struct SummaryRow {
  std::string scenario;
  int arm = 0;
  MethodId method = MethodId::kGroundTruth;
  std::size_t n = 0;
  double mean = 0.0;     // mg/L
  double sd = 0.0;       // mg/L
  double rel_mean = 0.0;
  double rel_sd = 0.0;
  std::string status{kStatusOk};

  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

/// Week-8 exposure sample of one method in one arm. Empty weights mean
/// unweighted.
struct ArmEstimate {
  int arm = 0;
  MethodId method = MethodId::kGroundTruth;
  std::vector<double> values;
  std::vector<double> weights;
  std::string status{kStatusOk};
  std::string message;
};

struct FitArtifacts {
  std::optional<NLMEFit> nlme;
  std::string nlme_error;
  std::array<std::optional<ArmModels>, kNumArms> seq;
  std::array<std::string, kNumArms> seq_error;
  std::optional<IEModel> ie;
  std::string ie_error;
};

/// Resolves the IE model source for a scenario (auto: fitted when the events
/// are driven by something other than the trough).
IESource effective_ie_source(const RunOptions& opts);

/// Fits every estimator on an observed dataset. Estimator failures are recorded,
/// not thrown.
FitArtifacts fit_all(const TrialDataset& observed, const RunOptions& opts);

/// Counterfactual samples and naive summaries for every arm.
std::vector<ArmEstimate> estimate_all(const TrialDataset& observed, const FitArtifacts& fits,
                                      const RunOptions& opts);
std::vector<ArmEstimate> ground_truth_estimates(const TrialDataset& ground_truth);

std::vector<SummaryRow> summarize(std::string_view scenario, const std::vector<ArmEstimate>& truth,
                                  const std::vector<ArmEstimate>& estimates);

struct RunResult {
  TrialDataset observed;
  TrialDataset ground_truth;
  FitArtifacts fits;
  std::vector<ArmEstimate> estimates;  // ground truth first
  std::vector<SummaryRow> rows;
};

RunResult run_scenario(const RunOptions& opts);

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out);
void write_summary_json(const std::vector<SummaryRow>& rows, std::ostream& out);
std::vector<SummaryRow> read_summary_csv(std::istream& in);

/// Writes summary.csv and summary.json into `dir`.
void emit(const std::vector<SummaryRow>& rows, const std::filesystem::path& dir);

const SummaryRow& find_row(const std::vector<SummaryRow>& rows, int arm, MethodId method);

}  // namespace titrate
