#pragma once

// Simulation of the five-arm up-titration trial with treatment-confounder
// feedback: an adverse event triggered by high exposure keeps the patient on the
// current dose, which lowers later exposure, while exposure at every visit shares
// the patient's clearance and volume.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "titrate/pk.hpp"

namespace titrate {

inline constexpr int kNumArms = 5;
inline constexpr int kNumDoses = 4;
inline constexpr int kNumDecisions = 3;
inline constexpr double kHoursPerWeek = 168.0;
/// Dosing at day 1 and after 2, 4 and 6 weeks.
inline constexpr std::array<double, kNumDoses> kDoseTimes{0.0, 336.0, 672.0, 1008.0};
/// Troughs at weeks 2, 4, 6 (just before dosing) and week 8.
inline constexpr std::array<double, kNumDoses> kObsTimes{336.0, 672.0, 1008.0, 1344.0};

struct Arm {
  int id = 0;
  std::array<double, kNumDoses> ladder{};  // mg
};

/// The five arms: target doses 60, 120 and 240 mg with different up-titration.
std::span<const Arm> standard_arms();
const Arm& arm_by_id(int id);

/// Planned dose (mg) of an arm at step 1..4.
double planned_dose(const Arm& arm, int step);
double planned_dose(int arm_id, int step);

std::vector<DoseEvent> planned_schedule(const Arm& arm);

enum class Variant { kMain, kNonlinear, kCmax, kHighRes };

/// What counts as an intercurrent event. kDoseChange flags only adverse events
/// that hold back a pending dose increase (the patient deviates from the
/// assigned ladder); kAnyEvent flags every adverse event at weeks 2, 4 and 6.
/// Realized doses are identical under both.
enum class Adherence { kDoseChange, kAnyEvent };

/// Driver of the adverse event in the cmax variant: the noise-free
/// concentration right after the most recent dose, or that dose divided by the
/// individual volume.
enum class CmaxDriver { kPeak, kDoseOverVolume };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);
std::string_view to_string(Adherence a);
Adherence parse_adherence(std::string_view s);
std::string_view to_string(CmaxDriver d);
CmaxDriver parse_cmax_driver(std::string_view s);

struct Scenario {
  Variant variant = Variant::kMain;
  std::size_t n_per_arm = 5000;
  std::uint64_t seed = 1;
  double beta = 5.0;
  std::array<double, kNumDecisions> alphas{15.0, 40.0, 100.0};  // mg/L
  /// When set, the thresholds are replaced at simulation time by the median
  /// driver at each decision in a confounding-free pilot run.
  bool pilot_alphas = false;
  PopulationParams pop{};
  MMParams mm{};
  double mm_step = 1.0;  // h
  /// Knobs for stronger confounding: beta * beta_scale, alpha_t + alpha_shift.
  double beta_scale = 1.0;
  double alpha_shift = 0.0;
  Adherence adherence = Adherence::kDoseChange;
  CmaxDriver cmax_driver = CmaxDriver::kPeak;

  double effective_beta() const { return beta * beta_scale; }
  std::array<double, kNumDecisions> effective_alphas() const;
};

/// Defaults for a named variant: highres raises xi to 0.3, cmax derives its
/// thresholds from a pilot run.
Scenario make_scenario(Variant v, std::size_t n_per_arm = 5000, std::uint64_t seed = 1);

/// Throws InvalidArgument when the scenario breaks its invariants.
void validate(const Scenario& s);

struct SubjectRecord {
  std::int64_t subject_id = 0;
  int arm_id = 0;
  double eta_cl = 0.0;
  double eta_v = 0.0;
  std::array<DoseEvent, kNumDoses> doses{};
  std::array<double, kNumDoses> troughs{};  // E_1..E_4, mg/L
  std::array<bool, kNumDecisions> ie{};     // S_1..S_3
  bool adherent = true;

  friend bool operator==(const SubjectRecord&, const SubjectRecord&) = default;
};

/// Extra per-subject quantities that are not part of the observed record.
struct SubjectTrace {
  PKParams params{};
  std::array<double, kNumDecisions> driver{};
  std::array<double, kNumDecisions> ie_prob{};
  std::array<bool, kNumDecisions> adverse_event{};
  std::array<bool, kNumDecisions> at_risk{};
};

enum class Regime { kObserved, kGroundTruth };
std::string_view to_string(Regime r);

struct TrialDataset {
  Scenario scenario{};
  std::vector<SubjectRecord> subjects;
  Regime regime = Regime::kObserved;

  std::vector<const SubjectRecord*> arm_subjects(int arm_id) const;
};

/// invlogit(beta * log(exposure / alpha)).
double ie_probability(double exposure, double alpha, double beta);

/// Whether a subject on ladder position `pointer` (0-based) at decision t has a
/// dose increase pending, i.e. whether an adverse event there changes treatment.
bool increase_pending(const Arm& arm, int pointer);

/// Decisions at which an intercurrent event could have been recorded for a
/// subject, reconstructed from the recorded flags.
std::array<bool, kNumDecisions> decisions_at_risk(const SubjectRecord& s, Adherence adherence);

/// Simulates one subject. `index` is the subject's position within its arm and,
/// with the seed and arm, keys every random stream it uses.
SubjectRecord simulate_subject(const Arm& arm, const Scenario& scenario, std::uint32_t index,
                               Regime regime = Regime::kObserved, SubjectTrace* trace = nullptr);

/// Resolves pilot thresholds (cmax variant) into `alphas`; other scenarios are
/// returned unchanged.
Scenario resolve_thresholds(const Scenario& scenario);

/// Median of the IE driver at each decision across a confounding-free pilot run
/// of all arms with independent streams.
std::array<double, kNumDecisions> pilot_thresholds(const Scenario& scenario);

TrialDataset simulate_trial(const Scenario& scenario);

/// Same random effects and residuals as simulate_trial, every subject on the
/// planned ladder, no intercurrent events.
TrialDataset simulate_ground_truth(const Scenario& scenario);

TrialDataset per_protocol_filter(const TrialDataset& ds);

/// Week-8 exposures of one arm.
std::vector<double> final_troughs(const TrialDataset& ds, int arm_id);

}  // namespace titrate
