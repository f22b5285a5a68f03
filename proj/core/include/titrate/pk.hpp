#pragma once

// One-compartment intravenous bolus pharmacokinetics.

#include <span>
#include <vector>

namespace titrate {

/// A bolus administered at `time` hours after the first dose.
struct DoseEvent {
  double time = 0.0;    // h
  double amount = 0.0;  // mg

  friend bool operator==(const DoseEvent&, const DoseEvent&) = default;
};

/// Individual apparent clearance (L/h) and volume (L).
struct PKParams {
  double cl = 0.0;
  double v = 0.0;
};

/// Typical values on the natural scale, log-scale random-effect SDs and the
/// proportional residual SD.
struct PopulationParams {
  double mu_cl = 0.0025;  // L/h
  double mu_v = 2.0;      // L
  double omega_cl = 0.3;
  double omega_v = 0.3;
  double xi = 0.02;

  friend bool operator==(const PopulationParams&, const PopulationParams&) = default;
};

/// Michaelis-Menten elimination: dC/dt = -(vmax / v) * C / (km + C).
struct MMParams {
  double vmax = 0.075;  // mg/h
  double km = 30.0;     // mg/L
  double v = 2.0;       // L
};

/// Smallest reportable exposure. Observations below it (only reachable with a
/// large proportional residual) are floored so that log transforms stay defined.
inline constexpr double kExposureFloor = 1e-6;

void validate(const PKParams& p);
void validate(const PopulationParams& p);
void validate(const MMParams& p);

/// Throws unless times are non-negative and strictly increasing and amounts are
/// non-negative.
void validate_schedule(std::span<const DoseEvent> doses);

/// Superposition of exponentially decaying boluses. A dose at exactly `t` is not
/// yet included: troughs are sampled immediately before the next dose.
double conc_linear(const PKParams& params, std::span<const DoseEvent> doses, double t);

/// Concentration immediately after any dose given at `t` (the peak when a dose
/// is administered at `t`).
double conc_linear_after(const PKParams& params, std::span<const DoseEvent> doses, double t);

/// Michaelis-Menten model integrated with classical RK4. Each inter-dose
/// interval is split into equal substeps no longer than `step`; boluses are
/// instantaneous jumps of amount / v. Same trough convention as conc_linear.
double conc_mm(const MMParams& params, std::span<const DoseEvent> doses, double t, double step);

/// cl = mu_cl * exp(eta_cl), v = mu_v * exp(eta_v).
PKParams individual_params(const PopulationParams& pop, double eta_cl, double eta_v);

/// Michaelis-Menten parameters of one subject: the clearance random effect scales
/// vmax and the volume random effect scales v.
MMParams individual_mm_params(const MMParams& typical, double eta_cl, double eta_v);

/// conc * (1 + xi * eps), floored at kExposureFloor.
double apply_residual(double conc, double xi, double eps);

}  // namespace titrate
