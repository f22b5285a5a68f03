#pragma once

// Inverse probability weighting of the per-protocol population.
//
// The probability of an intercurrent event at decision t is modelled as
// invlogit(c_t + beta * log E_t). For the true model c_t = -beta * log(alpha_t).
// An adherent subject is weighted by the product over its at-risk decisions of
// 1 / (1 - p_t).

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "titrate/trial.hpp"

namespace titrate {

enum class IEModelSource { kTrue, kFitted };
std::string_view to_string(IEModelSource s);

struct IEModel {
  double beta = 0.0;
  std::array<double, kNumDecisions> intercepts{};
  IEModelSource source = IEModelSource::kTrue;
  double beta_se = 0.0;  // zero for the true model

  /// alpha_t = exp(-c_t / beta); NaN when beta is zero.
  std::array<double, kNumDecisions> alphas() const;

  /// log-odds of an intercurrent event at decision t (0-based) given exposure e.
  double log_odds(int t, double e) const;
};

/// The model that generated the data (trough-driven scenarios).
IEModel true_ie_model(const Scenario& scenario);
IEModel make_ie_model(double beta, const std::array<double, kNumDecisions>& alphas);

/// Maximum-likelihood logistic regression of S_t on decision-specific
/// intercepts and log E_t, pooled over arms and the at-risk decisions.
IEModel fit_ie_model(const TrialDataset& ds);

struct WeightOptions {
  std::optional<double> cap_quantile;  // e.g. 0.995
};

struct WeightVector {
  std::vector<std::int64_t> subject_ids;
  std::vector<int> arm_ids;
  std::vector<double> w;
  std::vector<std::array<double, kNumDecisions>> p_adhere;  // 1 where not at risk
  std::size_t n_infinite = 0;
  std::size_t n_truncated = 0;
  std::optional<double> cap;
};

/// Weights of the adherent subjects of one arm (arm_id = 0: all arms).
WeightVector compute_weights(const TrialDataset& ds, const IEModel& model, const WeightOptions& opts = {},
                             int arm_id = 0);

struct WeightedSummary {
  double mean = 0.0;
  double sd = 0.0;  // sum w (x - mean)^2 / sum w
};

WeightedSummary weighted_summary(std::span<const double> x, std::span<const double> w);

void write_weights_csv(const WeightVector& wv, std::ostream& out);

}  // namespace titrate
