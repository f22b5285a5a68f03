#pragma once

// Nonlinear mixed-effects fit of the one-compartment bolus model.
//
// Model: E_ij = f(doses_i, t_j; cl_i, v_i) * (1 + xi * eps_ij), with
// log cl_i = log mu_cl + eta_cl,i and log v_i = log mu_v + eta_v,i, and
// independent eta ~ N(0, omega^2). The marginal likelihood of each subject is
// approximated by Laplace's method around the posterior mode of eta; the total
// -2 log-likelihood is minimized by BFGS over the log of all five population
// parameters with its exact gradient.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "titrate/pk.hpp"
#include "titrate/trial.hpp"

namespace titrate {

struct LaplaceConfig {
  double outer_tol = 1e-4;  // max |gradient| of the total objective
  double inner_tol = 1e-8;  // max |gradient| of a subject's joint objective in eta
  int max_outer_iters = 200;
  int max_inner_iters = 100;
  double fd_step = 1e-4;    // step for finite-difference cross-checks
};

void validate(const LaplaceConfig& cfg);

/// Population parameters as optimized: log of (mu_cl, mu_v, omega_cl, omega_v, xi).
using LogParams = std::array<double, 5>;
LogParams to_log(const PopulationParams& p);
PopulationParams from_log(const LogParams& lp);

/// Observations of one subject with, for each observation, the lag since every
/// earlier dose and that dose's amount (flattened).
struct SubjectData {
  std::int64_t id = 0;
  std::vector<double> y;
  std::vector<int> offsets{0};  // doses of observation j: [offsets[j], offsets[j+1])
  std::vector<double> lag;      // h
  std::vector<double> amount;   // mg
};

/// Uses the realized doses; observations at the exposure floor are dropped.
SubjectData make_subject_data(const SubjectRecord& s);
SubjectData make_subject_data(std::int64_t id, std::span<const DoseEvent> doses,
                              std::span<const double> obs_times, std::span<const double> obs);

/// The two parts of a subject's joint -2 log-density at a given eta.
struct JointTerms {
  double residual = 0.0;  // sum_j -2 log N(y_j; f_j, (xi f_j)^2)
  double prior = 0.0;     // sum_k -2 log N(eta_k; 0, omega_k^2)
  double total() const { return residual + prior; }
};

JointTerms joint_terms(const PopulationParams& pop, const SubjectData& s, double eta_cl, double eta_v);

/// Gradient and Hessian of the joint -2 log-density in (eta_cl, eta_v).
struct JointDerivatives {
  double value = 0.0;
  std::array<double, 2> grad{};
  std::array<std::array<double, 2>, 2> hess{};
};
JointDerivatives joint_derivatives(const PopulationParams& pop, const SubjectData& s,
                                   double eta_cl, double eta_v);
/// Same Hessian by central differences of the joint objective with step `h`.
std::array<std::array<double, 2>, 2> joint_hessian_fd(const PopulationParams& pop, const SubjectData& s,
                                                      double eta_cl, double eta_v, double h);

struct SubjectLaplace {
  double neg2ll = 0.0;
  double eta_cl = 0.0;
  double eta_v = 0.0;
  bool converged = false;
  int iterations = 0;
  /// d neg2ll / d LogParams, filled when requested.
  LogParams grad{};
};

/// Laplace approximation of one subject's -2 log marginal likelihood. The inner
/// Newton search starts from `warm` (eta_cl, eta_v).
SubjectLaplace subject_laplace(const PopulationParams& pop, const SubjectData& s,
                               const LaplaceConfig& cfg, bool with_gradient,
                               std::array<double, 2> warm = {0.0, 0.0});

double subject_neg2ll_laplace(const PopulationParams& pop, const SubjectRecord& subject,
                              const LaplaceConfig& cfg = {});

/// Sum of subject contributions over a dataset. Observations at the exposure
/// floor are treated as below quantification and left out. Every evaluation
/// starts the inner searches from the posterior modes of the lowest objective
/// seen so far, so re-evaluating that point reproduces its value.
class LaplaceObjective {
 public:
  LaplaceObjective(const TrialDataset& ds, LaplaceConfig cfg);
  explicit LaplaceObjective(std::vector<SubjectData> subjects, LaplaceConfig cfg = {});

  double value(const LogParams& lp);
  double value_and_gradient(const LogParams& lp, LogParams& grad);

  /// Central-difference gradient of value(), step cfg.fd_step.
  LogParams fd_gradient(const LogParams& lp);

  std::size_t size() const { return subjects_.size(); }
  const std::vector<SubjectData>& subjects() const { return subjects_; }
  /// Posterior modes at the best point evaluated so far.
  const std::vector<std::array<double, 2>>& modes() const { return modes_; }
  int inner_failures() const { return inner_failures_; }

 private:
  double evaluate(const LogParams& lp, LogParams* grad);

  std::vector<SubjectData> subjects_;
  LaplaceConfig cfg_;
  std::vector<std::array<double, 2>> modes_;
  double best_ = std::numeric_limits<double>::infinity();
  int inner_failures_ = 0;
};

struct NLMEFit {
  PopulationParams est{};
  std::vector<std::int64_t> subject_ids;
  std::vector<std::array<double, 2>> eb;  // (eta_cl_hat, eta_v_hat) per subject
  double neg2ll = 0.0;
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  int inner_failures = 0;
  std::vector<double> trace;  // objective after each accepted outer step
};

/// Two-stage start: per-subject least squares on log concentrations, then
/// median and scaled MAD of the individual estimates. Falls back to half the default
/// population values when too few subjects can be fitted.
PopulationParams two_stage_init(const TrialDataset& ds);

/// Fits the model on an observed-regime dataset using the realized doses.
NLMEFit fit_nlme(const TrialDataset& ds, const PopulationParams& init, const LaplaceConfig& cfg = {});

/// Posterior mode of one subject at the final estimates.
std::array<double, 2> eb_estimates(const NLMEFit& fit, std::int64_t subject_id);

/// Week-8 exposures under full adherence: eta ~ N(0, omega^2), the arm's planned
/// ladder, residual with the estimated xi. Only population estimates and the
/// planned ladder enter.
std::vector<double> simulate_counterfactual_nlme(const PopulationParams& est, const Arm& arm,
                                                 std::size_t n_draws, std::uint64_t seed);

void write_fit_report(const NLMEFit& fit, std::ostream& out);
void write_eb_csv(const NLMEFit& fit, std::ostream& out);

}  // namespace titrate
