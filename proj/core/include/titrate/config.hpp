#pragma once

// Run options and the flat key=value override format.
//
//   # comment
//   beta = 5
//   alpha2 = 40
//   ipw_cap = 0.995
//
// Recognized keys:
//   n_per_arm, seed, draws
//   beta, beta_scale, alpha1, alpha2, alpha3, alpha_shift
//   mu_cl, mu_v, omega_cl, omega_v, omega (both), xi
//   mm_vmax, mm_km, mm_v, mm_step
//   adherence      dose_change | any_event
//   cmax_driver    peak | dose_over_volume
//   ipw_cap        none | quantile in (0, 1]
//   ie_model       auto | true | fitted
//   cond_subjects  all | adherent
//   nlme_init      two_stage | default
//   nlme_outer_tol, nlme_inner_tol, nlme_max_iters

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "titrate/nlme.hpp"
#include "titrate/seqstd.hpp"
#include "titrate/trial.hpp"

namespace titrate {

/// Where IPW takes its IE model from. Auto uses the true model when the
/// intercurrent events are driven by troughs and a fitted one otherwise.
enum class IESource { kAuto, kTrue, kFitted };
std::string_view to_string(IESource s);
IESource parse_ie_source(std::string_view s);

enum class NlmeInit { kTwoStage, kDefault };

struct RunOptions {
  Scenario scenario{};
  std::size_t draws = 5000;
  std::optional<double> ipw_cap;
  IESource ie_model = IESource::kAuto;
  CondSubjects cond_subjects = CondSubjects::kAll;
  NlmeInit nlme_init = NlmeInit::kTwoStage;
  LaplaceConfig laplace{};
};

RunOptions default_options(Variant v);

void apply_override(RunOptions& opts, std::string_view key, std::string_view value);
void apply_config(RunOptions& opts, std::istream& in);
void apply_config_file(RunOptions& opts, const std::filesystem::path& path);

void validate(const RunOptions& opts);

}  // namespace titrate
