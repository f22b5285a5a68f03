#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "titrate/errors.hpp"
#include "titrate/ipw.hpp"
#include "titrate/stats.hpp"
#include "titrate/trial.hpp"

using namespace titrate;

namespace {

// One adherent subject per arm with the given troughs at the three decisions.
TrialDataset handmade(const std::array<double, 3>& e, Adherence adherence) {
  TrialDataset ds;
  ds.scenario.adherence = adherence;
  for (const auto& arm : standard_arms()) {
    SubjectRecord r;
    r.subject_id = arm.id;
    r.arm_id = arm.id;
    for (int k = 0; k < kNumDoses; ++k) r.doses[k] = {kDoseTimes[k], arm.ladder[k]};
    r.troughs = {e[0], e[1], e[2], 100.0};
    ds.subjects.push_back(r);
  }
  return ds;
}

const TrialDataset& main_data() {
  static const TrialDataset ds = simulate_trial(make_scenario(Variant::kMain, 5000, 1));
  return ds;
}

}  // namespace

TEST(Weights, ZeroSlopeGivesEight) {
  const IEModel m = make_ie_model(0.0, {15, 40, 100});
  auto s = make_scenario(Variant::kMain, 500, 2);
  s.adherence = Adherence::kAnyEvent;
  const auto ds = simulate_trial(s);
  const auto wv = compute_weights(ds, m);
  for (double w : wv.w) EXPECT_NEAR(w, 8.0, 1e-12);

  std::vector<double> x;
  for (const auto& r : ds.subjects)
    if (r.adherent) x.push_back(r.troughs[3]);
  const auto ws = weighted_summary(x, wv.w);
  EXPECT_NEAR(ws.mean, stats::mean(x), 1e-9);
  EXPECT_NEAR(ws.sd, stats::sd(x), 1e-9);
}

TEST(Weights, ExposureAtThresholds) {
  const auto ds = handmade({15, 40, 100}, Adherence::kAnyEvent);
  for (double w : compute_weights(ds, make_ie_model(5.0, {15, 40, 100})).w) EXPECT_NEAR(w, 8.0, 1e-12);
}

TEST(Weights, ExposureTwiceThresholds) {
  const auto ds = handmade({30, 80, 200}, Adherence::kAnyEvent);
  for (double w : compute_weights(ds, make_ie_model(5.0, {15, 40, 100})).w) EXPECT_NEAR(w, 35937.0, 1e-7);
}

TEST(Weights, OnlyDecisionsThatChangeTreatment) {
  // Arm 1 (30, 60, 60, 60) and arm 5 (60, 240, 240, 240) have a single pending
  // increase; arms 2 and 4 have two.
  const auto ds = handmade({30, 80, 200}, Adherence::kDoseChange);
  const auto wv = compute_weights(ds, make_ie_model(5.0, {15, 40, 100}));
  const std::array<double, 5> expected{33.0, 33.0 * 33.0, 33.0, 33.0 * 33.0, 33.0};
  for (std::size_t i = 0; i < wv.w.size(); ++i) EXPECT_NEAR(wv.w[i], expected[i], 1e-9) << "arm " << i + 1;
}

TEST(Weights, MonotoneInTroughs) {
  const IEModel m = make_ie_model(5.0, {15, 40, 100});
  double prev = 0.0;
  for (double e1 : {5.0, 10.0, 15.0, 20.0, 40.0}) {
    const auto wv = compute_weights(handmade({e1, 40, 100}, Adherence::kAnyEvent), m, {}, 3);
    EXPECT_GE(wv.w[0], prev);
    prev = wv.w[0];
  }
}

TEST(Weights, InfiniteWeightsNeedCap) {
  auto ds = handmade({30, 80, 200}, Adherence::kAnyEvent);
  ds.subjects[0].troughs = {1e6, 1e6, 1e6, 100.0};
  const IEModel m = make_ie_model(200.0, {15, 40, 100});
  EXPECT_THROW(compute_weights(ds, m), PositivityError);
  WeightOptions o;
  o.cap_quantile = 0.5;
  const auto wv = compute_weights(ds, m, o);
  EXPECT_EQ(wv.n_infinite, 1u);
  EXPECT_GT(wv.n_truncated, 0u);
  for (double w : wv.w) EXPECT_TRUE(std::isfinite(w));
  o.cap_quantile = 1.5;
  EXPECT_THROW(compute_weights(ds, m, o), InvalidArgument);
}

TEST(Weights, GroundTruthRejected) {
  auto ds = handmade({15, 40, 100}, Adherence::kAnyEvent);
  ds.regime = Regime::kGroundTruth;
  EXPECT_THROW(compute_weights(ds, make_ie_model(5.0, {15, 40, 100})), InvalidArgument);
}

TEST(WeightedSummary, Examples) {
  const std::vector<double> x{3.0, 7.0};
  const std::vector<double> w{1.0, 0.0};
  const auto s = weighted_summary(x, w);
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_DOUBLE_EQ(s.sd, 0.0);
  const std::vector<double> zero{0.0, 0.0};
  EXPECT_THROW(weighted_summary(x, zero), InvalidArgument);
  const std::vector<double> one{1.0};
  EXPECT_THROW(weighted_summary(x, one), InvalidArgument);
}

TEST(WeightedSummary, ScaleInvarianceAndHull) {
  const auto& ds = main_data();
  const auto wv = compute_weights(ds, true_ie_model(ds.scenario), {}, 5);
  std::vector<double> x;
  for (const auto* r : ds.arm_subjects(5))
    if (r->adherent) x.push_back(r->troughs[3]);
  auto w2 = wv.w;
  for (auto& w : w2) w *= 17.0;
  const auto a = weighted_summary(x, wv.w), b = weighted_summary(x, w2);
  EXPECT_NEAR(a.mean, b.mean, 1e-9 * a.mean);
  EXPECT_NEAR(a.sd, b.sd, 1e-9 * a.sd);
  EXPECT_GE(a.mean, *std::min_element(x.begin(), x.end()));
  EXPECT_LE(a.mean, *std::max_element(x.begin(), x.end()));
}

TEST(TrueModel, ThresholdsRoundTrip) {
  const IEModel m = true_ie_model(make_scenario(Variant::kMain));
  const auto a = m.alphas();
  EXPECT_NEAR(a[0], 15.0, 1e-12);
  EXPECT_NEAR(a[1], 40.0, 1e-12);
  EXPECT_NEAR(a[2], 100.0, 1e-12);
  EXPECT_NEAR(m.log_odds(1, 80.0), 5.0 * std::log(2.0), 1e-12);
}

TEST(FitIeModel, RecoversSlope) {
  const IEModel m = fit_ie_model(main_data());
  EXPECT_EQ(m.source, IEModelSource::kFitted);
  EXPECT_NEAR(m.beta / 5.0, 1.0, 0.10);
  const auto a = m.alphas();
  EXPECT_NEAR(a[0] / 15.0, 1.0, 0.1);
  EXPECT_NEAR(a[1] / 40.0, 1.0, 0.1);
  EXPECT_NEAR(a[2] / 100.0, 1.0, 0.1);
}

TEST(FitIeModel, ZeroSlopeWithinThreeSe) {
  auto s = make_scenario(Variant::kMain, 5000, 6);
  s.beta = 0.0;
  const IEModel m = fit_ie_model(simulate_trial(s));
  EXPECT_GT(m.beta_se, 0.0);
  EXPECT_LT(std::abs(m.beta), 3.0 * m.beta_se);
}

TEST(FitIeModel, SingleClassWeekIsSeparation) {
  auto ds = simulate_trial(make_scenario(Variant::kMain, 200, 2));
  for (auto& r : ds.subjects) {
    r.ie = {false, false, false};
    r.adherent = true;
  }
  EXPECT_THROW(fit_ie_model(ds), EstimationError);
}

TEST(WeightsCsv, Header) {
  const auto& ds = main_data();
  std::ostringstream out;
  write_weights_csv(compute_weights(ds, true_ie_model(ds.scenario), {}, 1), out);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "subject_id,arm,w,p_adhere1,p_adhere2,p_adhere3");
}
