#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "titrate/errors.hpp"
#include "titrate/pk.hpp"
#include "titrate/rng.hpp"

using namespace titrate;

namespace {

const std::vector<DoseEvent> kArm5{{0, 60}, {336, 240}, {672, 240}, {1008, 240}};
const PKParams kTypical{0.0025, 2.0};

// Term-by-term sum in extended precision.
long double arm5_week8_oracle() {
  return (60.0L * std::exp(-1.68L) + 240.0L * std::exp(-1.26L) + 240.0L * std::exp(-0.84L) +
          240.0L * std::exp(-0.42L)) /
         2.0L;
}

}  // namespace

TEST(ConcLinear, EmptyScheduleIsZero) { EXPECT_EQ(conc_linear(kTypical, {}, 100.0), 0.0); }

TEST(ConcLinear, BolusRightAfterDose) {
  const std::vector<DoseEvent> d{{0, 30}};
  EXPECT_NEAR(conc_linear(kTypical, d, 1e-9), 15.0, 1e-9);
}

TEST(ConcLinear, Arm5WeekEight) {
  const double c = conc_linear(kTypical, kArm5, 1344.0);
  EXPECT_NEAR(c, 170.28, 0.01);
  EXPECT_NEAR(c, static_cast<double>(arm5_week8_oracle()), 1e-10);
}

TEST(ConcLinear, DoseAtObservationTimeExcluded) {
  EXPECT_DOUBLE_EQ(conc_linear(kTypical, kArm5, 336.0), 30.0 * std::exp(-0.42));
  EXPECT_DOUBLE_EQ(conc_linear_after(kTypical, kArm5, 336.0), 30.0 * std::exp(-0.42) + 120.0);
}

TEST(ConcLinear, Superposition) {
  auto rs = rng::make_stream(9, rng::Domain::kTest, 0, 0, 0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<DoseEvent> a, b, all;
    double t = 0.0;
    for (int i = 0; i < 6; ++i) {
      t += 10.0 + 300.0 * rs.uniform();
      const DoseEvent d{t, 500.0 * rs.uniform()};
      (rs.uniform() < 0.5 ? a : b).push_back(d);
      all.push_back(d);
    }
    const PKParams p{0.001 + 0.01 * rs.uniform(), 0.5 + 5.0 * rs.uniform()};
    const double at = t * rs.uniform() + 1.0;
    EXPECT_NEAR(conc_linear(p, all, at), conc_linear(p, a, at) + conc_linear(p, b, at), 1e-10);
  }
}

TEST(ConcLinear, MonotoneDecayBetweenDoses) {
  const double c1 = conc_linear(kTypical, kArm5, 1100.0);
  const double c2 = conc_linear(kTypical, kArm5, 1300.0);
  EXPECT_NEAR(c2, c1 * std::exp(-0.0025 / 2.0 * 200.0), 1e-12);
}

TEST(ConcLinear, ScaleEquivariance) {
  auto doubled = kArm5;
  for (auto& d : doubled) d.amount *= 2.0;
  for (double t : {100.0, 500.0, 1344.0}) {
    EXPECT_NEAR(conc_linear(kTypical, doubled, t), 2.0 * conc_linear(kTypical, kArm5, t), 1e-10);
  }
}

TEST(ConcMM, EmptyScheduleIsZero) { EXPECT_EQ(conc_mm(MMParams{}, {}, 500.0, 1.0), 0.0); }

TEST(ConcMM, LinearLimit) {
  // km far above any concentration reached, vmax / km equal to cl.
  const double km = 1e6;
  const MMParams p{0.0025 * km, km, 2.0};
  for (double t : {336.0, 672.0, 1008.0, 1344.0}) {
    const double lin = conc_linear(kTypical, kArm5, t);
    EXPECT_NEAR(conc_mm(p, kArm5, t, 1.0) / lin - 1.0, 0.0, 1e-3) << "t=" << t;
  }
}

TEST(ConcMM, StepHalvingConverges) {
  const MMParams p{};
  const double a = conc_mm(p, kArm5, 1344.0, 1.0);
  const double b = conc_mm(p, kArm5, 1344.0, 0.5);
  EXPECT_LT(std::abs(a - b) / b, 1e-4);
}

TEST(ConcMM, RejectsStepAboveDoseGap) {
  EXPECT_THROW(conc_mm(MMParams{}, kArm5, 1344.0, 400.0), InvalidArgument);
  EXPECT_THROW(conc_mm(MMParams{}, kArm5, 1344.0, 0.0), InvalidArgument);
}

TEST(IndividualParams, TypicalAndShifted) {
  const PopulationParams pop{};
  const auto p0 = individual_params(pop, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(p0.cl, 0.0025);
  EXPECT_DOUBLE_EQ(p0.v, 2.0);
  EXPECT_NEAR(individual_params(pop, 0.3, 0.0).cl, 0.00337465, 1e-8);
  EXPECT_NEAR(individual_params(pop, 0.0, -0.3).v, 1.48164, 1e-5);
}

TEST(ApplyResidual, Examples) {
  EXPECT_DOUBLE_EQ(apply_residual(100.0, 0.02, 0.0), 100.0);
  EXPECT_DOUBLE_EQ(apply_residual(100.0, 0.02, 1.0), 102.0);
  EXPECT_DOUBLE_EQ(apply_residual(100.0, 0.3, -4.0), kExposureFloor);
}

TEST(Validate, RejectsBadInputs) {
  EXPECT_THROW(validate(PKParams{0.0, 1.0}), InvalidArgument);
  EXPECT_THROW(validate(PopulationParams{0.0025, 2.0, 0.3, -0.1, 0.02}), InvalidArgument);
  const std::vector<DoseEvent> unsorted{{10, 1}, {5, 1}};
  EXPECT_THROW(validate_schedule(unsorted), InvalidArgument);
  EXPECT_NO_THROW(validate_schedule(kArm5));
}
