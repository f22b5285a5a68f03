#pragma once

// Sequential parametric standardization (longitudinal g-formula).
//
// Per arm, the first trough is modelled as log(E_1 / D_1) ~ N(beta0, gamma0^2)
// and each later trough as
//   E_t = b_t0 + sum_{tau <= t} b_t,tau * D_tau * E_norm + gamma_{D_{t-1}, D_t} * eps,
// with E_norm = E_1 / D_1. Sampling the chain with the planned doses gives the
// week-8 exposure under full adherence.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "titrate/rng.hpp"
#include "titrate/trial.hpp"

namespace titrate {

struct E1Model {
  int arm_id = 0;
  double beta0 = 0.0;
  double gamma0 = 0.0;
  std::size_t n = 0;
};

/// Which subjects enter the conditional regressions.
enum class CondSubjects {
  kAll,       // every subject of the arm, with its realized doses
  kAdherent,  // only subjects without an intercurrent event before E_t
};
std::string_view to_string(CondSubjects c);
CondSubjects parse_cond_subjects(std::string_view s);

using DosePair = std::pair<double, double>;  // (D_{t-1}, D_t), mg

struct CondModel {
  int arm_id = 0;
  int t = 0;                          // 2..4
  std::vector<double> beta;           // intercept, then D_1..D_t terms
  std::map<DosePair, double> scales;  // residual SD per dose pair
  std::map<DosePair, std::size_t> counts;
  std::vector<DosePair> dropped;      // pairs with fewer than two residuals
  double r_squared = 0.0;
  std::size_t n = 0;

  double predict(std::span<const double> doses, double e_norm) const;
};

struct ArmModels {
  E1Model e1;
  std::array<CondModel, kNumDoses - 1> cond;
};

E1Model fit_e1_model(const TrialDataset& ds, int arm_id);
CondModel fit_cond_model(const TrialDataset& ds, int arm_id, int t, CondSubjects subjects = CondSubjects::kAll);
ArmModels fit_arm_models(const TrialDataset& ds, int arm_id, CondSubjects subjects = CondSubjects::kAll);

/// One step of a sequential sampler: draws the next value given the values
/// drawn so far.
using ChainStep = std::function<double(std::span<const double> history, rng::Stream& rs)>;

/// Draws n_draws independent chains and returns the last value of each. Draw i
/// uses its own counter-based stream (seed, domain, arm, purpose 1, i).
std::vector<double> sample_chain(std::span<const ChainStep> steps, std::size_t n_draws, std::uint64_t seed,
                                 rng::Domain domain, int arm_id);

/// Week-8 exposures under the arm's planned ladder. Throws PositivityError if a
/// planned dose pair has no fitted residual scale.
std::vector<double> gformula_sample(const ArmModels& models, const Arm& arm, std::size_t n_draws,
                                    std::uint64_t seed);

/// Same chain truncated after `steps` trough draws (1..4).
std::vector<double> gformula_sample_prefix(const ArmModels& models, const Arm& arm, int steps,
                                           std::size_t n_draws, std::uint64_t seed);

void write_models_json(const std::vector<ArmModels>& models, std::ostream& out);

}  // namespace titrate
