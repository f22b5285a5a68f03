#include "titrate/pk.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "titrate/errors.hpp"

namespace titrate {

namespace {

void require_positive(double x, const char* what) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw InvalidArgument(std::string(what) + " must be positive and finite");
  }
}

}  // namespace

void validate(const PKParams& p) {
  require_positive(p.cl, "cl");
  require_positive(p.v, "v");
}

void validate(const PopulationParams& p) {
  require_positive(p.mu_cl, "mu_cl");
  require_positive(p.mu_v, "mu_v");
  require_positive(p.omega_cl, "omega_cl");
  require_positive(p.omega_v, "omega_v");
  require_positive(p.xi, "xi");
}

void validate(const MMParams& p) {
  require_positive(p.vmax, "vmax");
  require_positive(p.km, "km");
  require_positive(p.v, "v");
}

void validate_schedule(std::span<const DoseEvent> doses) {
  for (std::size_t i = 0; i < doses.size(); ++i) {
    if (!(doses[i].time >= 0.0) || !(doses[i].amount >= 0.0)) {
      throw InvalidArgument("dose events need non-negative time and amount");
    }
    if (i > 0 && !(doses[i].time > doses[i - 1].time)) {
      throw InvalidArgument("dose times must be strictly increasing");
    }
  }
}

double conc_linear(const PKParams& params, std::span<const DoseEvent> doses, double t) {
  const double k = params.cl / params.v;
  double sum = 0.0;
  for (const auto& d : doses) {
    if (d.time >= t) break;
    sum += d.amount * std::exp(-k * (t - d.time));
  }
  return sum / params.v;
}

double conc_linear_after(const PKParams& params, std::span<const DoseEvent> doses, double t) {
  const double k = params.cl / params.v;
  double sum = 0.0;
  for (const auto& d : doses) {
    if (d.time > t) break;
    sum += d.amount * std::exp(-k * (t - d.time));
  }
  return sum / params.v;
}

double conc_mm(const MMParams& params, std::span<const DoseEvent> doses, double t, double step) {
  if (!(step > 0.0)) throw InvalidArgument("integration step must be positive");
  if (!(t >= 0.0)) throw InvalidArgument("time must be non-negative");
  for (std::size_t i = 1; i < doses.size(); ++i) {
    if (step > doses[i].time - doses[i - 1].time) {
      throw InvalidArgument("integration step exceeds the smallest inter-dose gap");
    }
  }

  const double rate = params.vmax / params.v;
  const double km = params.km;
  auto deriv = [rate, km](double c) { return -rate * c / (km + c); };
  auto integrate = [&](double c, double span) {
    if (span <= 0.0 || c <= 0.0) return c;
    const auto n = static_cast<long>(std::ceil(span / step - 1e-12));
    const double h = span / static_cast<double>(n);
    for (long i = 0; i < n; ++i) {
      const double k1 = deriv(c);
      const double k2 = deriv(c + 0.5 * h * k1);
      const double k3 = deriv(c + 0.5 * h * k2);
      const double k4 = deriv(c + h * k3);
      c += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return std::max(c, 0.0);
  };

  double c = 0.0;
  double now = 0.0;
  for (const auto& d : doses) {
    if (d.time >= t) break;
    c = integrate(c, d.time - now);
    c += d.amount / params.v;
    now = d.time;
  }
  return integrate(c, t - now);
}

PKParams individual_params(const PopulationParams& pop, double eta_cl, double eta_v) {
  return {pop.mu_cl * std::exp(eta_cl), pop.mu_v * std::exp(eta_v)};
}

MMParams individual_mm_params(const MMParams& typical, double eta_cl, double eta_v) {
  return {typical.vmax * std::exp(eta_cl), typical.km, typical.v * std::exp(eta_v)};
}

double apply_residual(double conc, double xi, double eps) {
  return std::max(conc * (1.0 + xi * eps), kExposureFloor);
}

}  // namespace titrate
