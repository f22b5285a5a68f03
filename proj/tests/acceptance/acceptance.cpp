// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "titrate/config.hpp"
#include "titrate/ipw.hpp"
#include "titrate/nlme.hpp"
#include "titrate/report.hpp"
#include "titrate/rng.hpp"
#include "titrate/seqstd.hpp"
#include "titrate/stats.hpp"
#include "titrate/trial.hpp"

namespace fs = std::filesystem;
using namespace titrate;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const Outcome& o) {
  std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

RunOptions options(Variant v) {
  RunOptions o = default_options(v);
  o.scenario.n_per_arm = 5000;
  o.scenario.seed = 1;
  o.draws = 5000;
  return o;
}

const ArmEstimate& estimate(const RunResult& r, int arm, MethodId m) {
  for (const auto& e : r.estimates)
    if (e.arm == arm && e.method == m) return e;
  throw std::runtime_error("missing estimate");
}

// Mean and its Monte Carlo standard error; weighted samples use the
// linearization sqrt(sum w^2 (x - m)^2) / sum w.
std::pair<double, double> mean_se(const ArmEstimate& e) {
  if (e.weights.empty()) {
    return {stats::mean(e.values), stats::sd(e.values, 1) / std::sqrt(double(e.values.size()))};
  }
  double sw = 0, swx = 0;
  for (std::size_t i = 0; i < e.values.size(); ++i) {
    sw += e.weights[i];
    swx += e.weights[i] * e.values[i];
  }
  const double m = swx / sw;
  double s = 0;
  for (std::size_t i = 0; i < e.values.size(); ++i) s += std::pow(e.weights[i] * (e.values[i] - m), 2);
  return {m, std::sqrt(s) / sw};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TITRATE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome confounding_magnitude(const RunResult& main, double sim_seconds) {
  const double gt = stats::mean(estimate(main, 5, MethodId::kGroundTruth).values);
  const double itt = stats::mean(estimate(main, 5, MethodId::kIntentToTreat).values);
  const double reduction = 1.0 - itt / gt;
  const bool ok = std::abs(reduction - 0.14) <= 0.03 && sim_seconds < 60.0;
  return {ok, fmt("arm 5 ITT %.2f%% below ground truth (target 14 +- 3), simulation %.2f s", 100 * reduction,
                  sim_seconds)};
}

Outcome bias_correction(const RunResult& main, double full_seconds, double fast_seconds) {
  bool ok = full_seconds < 600.0 && fast_seconds < 120.0;
  std::string worst;
  double worst_dev = -1;
  for (int arm = 1; arm <= kNumArms; ++arm) {
    for (MethodId m : {MethodId::kStandardization, MethodId::kNlme, MethodId::kIpw}) {
      const auto& r = find_row(main.rows, arm, m);
      const bool in = r.rel_mean >= 0.95 && r.rel_mean <= 1.05 && r.rel_sd >= 0.85 && r.rel_sd <= 1.15;
      ok = ok && in;
      const double dev = std::max(std::abs(r.rel_mean - 1.0) / 0.05, std::abs(r.rel_sd - 1.0) / 0.15);
      if (dev > worst_dev) {
        worst_dev = dev;
        worst = fmt("arm %d %s rel_mean %.3f rel_sd %.3f", arm, std::string(to_string(m)).c_str(), r.rel_mean,
                    r.rel_sd);
      }
    }
  }
  return {ok, fmt("closest to a bound: %s; full run %.1f s, --fast %.1f s", worst.c_str(), full_seconds,
                  fast_seconds)};
}

Outcome naive_failure(const RunResult& main) {
  bool ok = true;
  double worst = 0;
  for (int arm = 2; arm <= kNumArms; ++arm) {
    for (MethodId m : {MethodId::kPerProtocol, MethodId::kIntentToTreat}) {
      const double rel = find_row(main.rows, arm, m).rel_mean;
      ok = ok && rel < 0.97;
      worst = std::max(worst, rel);
    }
  }
  return {ok, fmt("largest rel_mean over arms 2-5 is %.3f (must be < 0.97)", worst)};
}

Outcome nlme_recovery(const RunResult& main) {
  if (!main.fits.nlme) return {false, "fit failed: " + main.fits.nlme_error};
  const auto& e = main.fits.nlme->est;
  const PopulationParams t{};
  const double r_cl = e.mu_cl / t.mu_cl - 1, r_v = e.mu_v / t.mu_v - 1;
  const double r_ocl = e.omega_cl / t.omega_cl - 1, r_ov = e.omega_v / t.omega_v - 1, r_xi = e.xi / t.xi - 1;
  const bool ok = std::abs(r_cl) <= 0.02 && std::abs(r_v) <= 0.02 && std::abs(r_ocl) <= 0.10 &&
                  std::abs(r_ov) <= 0.10 && std::abs(r_xi) <= 0.15;
  return {ok, fmt("relative errors mu_cl %+.4f mu_v %+.4f omega_cl %+.4f omega_v %+.4f xi %+.4f%s", r_cl, r_v, r_ocl,
                  r_ov, r_xi, main.fits.nlme->converged ? "" : " (not converged)")};
}

Outcome gradient_check(const TrialDataset& observed) {
  double worst = 0;
  std::string where;
  for (double scale : {1.0, 0.5, 2.0}) {
    const PopulationParams t{};
    const PopulationParams p{t.mu_cl * scale, t.mu_v * scale, t.omega_cl * scale, t.omega_v * scale, t.xi * scale};
    LaplaceObjective obj(observed, LaplaceConfig{});
    LogParams g{};
    obj.value_and_gradient(to_log(p), g);
    const LogParams fd = obj.fd_gradient(to_log(p));
    for (int k = 0; k < 5; ++k) {
      const double rel = std::abs(g[k] - fd[k]) / std::abs(fd[k]);
      if (!(rel <= worst)) {
        worst = rel;
        where = fmt("%.1fx truth, parameter %d", scale, k);
      }
    }
  }
  return {worst < 1e-4, fmt("max component relative error %.2e at %s", worst, where.c_str())};
}

// Two periods, exposures on {1, 2, 3}. The first exposure triggers an
// intercurrent event that lowers the second dose and with it the second exposure.
Outcome enumeration_oracle() {
  constexpr std::array<double, 3> grid{1.0, 2.0, 3.0};
  constexpr std::array<double, 3> p_e1{0.3, 0.5, 0.2};
  constexpr std::array<double, 3> p_event{0.1, 0.4, 0.8};
  // P(E2 = grid[j] | E1 = grid[i], full dose) and with the held-back dose.
  constexpr double full[3][3] = {{0.5, 0.4, 0.1}, {0.2, 0.5, 0.3}, {0.1, 0.3, 0.6}};
  constexpr double held[3][3] = {{0.8, 0.2, 0.0}, {0.5, 0.4, 0.1}, {0.3, 0.5, 0.2}};
  auto draw = [](const double* p, double u) {
    int k = 0;
    for (double c = p[0]; u >= c && k < 2; c += p[++k]) {
    }
    return k;
  };

  const int n_subjects = 20000;
  std::array<double, 3> n1{};
  double n_adh[3][3] = {};
  for (int i = 0; i < n_subjects; ++i) {
    auto rs = rng::make_stream(77, rng::Domain::kTest, 0, 1, static_cast<std::uint32_t>(i));
    const int e1 = draw(p_e1.data(), rs.uniform());
    const bool event = rs.uniform() < p_event[e1];
    const int e2 = draw(event ? held[e1] : full[e1], rs.uniform());
    n1[e1] += 1;
    if (!event) n_adh[e1][e2] += 1;
  }
  // Empirical g-formula components.
  std::array<double, 3> q1{};
  double q2[3][3] = {};
  for (int i = 0; i < 3; ++i) {
    q1[i] = n1[i] / n_subjects;
    const double row = n_adh[i][0] + n_adh[i][1] + n_adh[i][2];
    for (int j = 0; j < 3; ++j) q2[i][j] = n_adh[i][j] / row;
  }
  double exact = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) exact += grid[j] * q1[i] * q2[i][j];

  std::vector<ChainStep> chain{
      [&](std::span<const double>, rng::Stream& rs) { return double(draw(q1.data(), rs.uniform())); },
      [&](std::span<const double> h, rng::Stream& rs) {
        return grid[static_cast<std::size_t>(draw(q2[static_cast<int>(h[0])], rs.uniform()))];
      },
  };
  const std::size_t n_draws = 200000;
  const auto x = sample_chain(chain, n_draws, 5, rng::Domain::kTest, 0);
  const double mc = stats::mean(x);
  const double se = stats::sd(x, 1) / std::sqrt(double(n_draws));
  const double z = (mc - exact) / se;
  return {std::abs(z) <= 3.0, fmt("Monte Carlo %.5f vs enumeration %.5f (%.2f MC SE)", mc, exact, z)};
}

Outcome no_confounding(const RunResult& r) {
  bool ok = true;
  double worst = 0;
  std::string where;
  for (int arm = 1; arm <= kNumArms; ++arm) {
    std::vector<std::pair<MethodId, std::pair<double, double>>> ms;
    for (MethodId m : {MethodId::kGroundTruth, MethodId::kPerProtocol, MethodId::kStandardization, MethodId::kIpw}) {
      const auto& e = estimate(r, arm, m);
      if (e.values.empty()) return {false, fmt("arm %d %s produced no sample", arm, std::string(to_string(m)).c_str())};
      ms.emplace_back(m, mean_se(e));
    }
    for (std::size_t a = 0; a < ms.size(); ++a) {
      for (std::size_t b = a + 1; b < ms.size(); ++b) {
        const auto [ma, sa] = ms[a].second;
        const auto [mb, sb] = ms[b].second;
        const double z = std::abs(ma - mb) / std::hypot(sa, sb);
        ok = ok && z <= 3.0;
        if (z > worst) {
          worst = z;
          where = fmt("arm %d %s vs %s", arm, std::string(to_string(ms[a].first)).c_str(),
                      std::string(to_string(ms[b].first)).c_str());
        }
      }
    }
  }
  return {ok, fmt("largest pairwise gap %.2f MC SE (%s)", worst, where.c_str())};
}

Outcome misspecification(const RunResult& main, const RunResult& nonlinear) {
  const auto& m = find_row(main.rows, 5, MethodId::kNlme);
  const auto& n = find_row(nonlinear.rows, 5, MethodId::kNlme);
  const double dm = std::abs(m.rel_mean - 1), dn = std::abs(n.rel_mean - 1);
  return {dn > 2 * dm && std::isfinite(dn),
          fmt("nonlinear |rel_mean - 1| = %.4f (%s) vs main %.4f", dn, n.status.c_str(), dm)};
}

Outcome robustness(const RunResult& cmax) {
  bool ok = true;
  std::string d;
  for (MethodId m : {MethodId::kStandardization, MethodId::kNlme, MethodId::kIpw}) {
    const auto& r = find_row(cmax.rows, 5, m);
    ok = ok && r.rel_mean >= 0.90 && r.rel_mean <= 1.10;
    d += fmt("%s%s %.3f", d.empty() ? "arm 5 rel_mean: " : ", ", std::string(to_string(m)).c_str(), r.rel_mean);
  }
  return {ok, d};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path workdir = fs::temp_directory_path() / "titrate_acceptance";
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--workdir") workdir = argv[i + 1];
  }
  fs::create_directories(workdir);

  // 10 (and the --fast runtime of 2): two identical CLI runs.
  std::array<double, 2> fast_seconds{};
  std::array<int, 2> codes{};
  for (int k = 0; k < 2; ++k) {
    const fs::path out = workdir / ("fast" + std::to_string(k));
    fs::remove_all(out);
    const auto t0 = Clock::now();
    codes[k] = run_cli("run --scenario main --seed 1 --fast --out " + out.string());
    fast_seconds[k] = seconds_since(t0);
  }
  const std::string a = slurp(workdir / "fast0" / "summary.csv");
  const std::string b = slurp(workdir / "fast1" / "summary.csv");
  const Outcome determinism{codes[0] == 0 && codes[1] == 0 && !a.empty() && a == b,
                            fmt("exit codes %d/%d, %zu bytes, %s", codes[0], codes[1], a.size(),
                                a == b ? "byte-identical" : "files differ")};

  auto t0 = Clock::now();
  {
    const auto s = make_scenario(Variant::kMain, 5000, 1);
    const auto obs = simulate_trial(s);
    const auto gt = simulate_ground_truth(s);
    (void)obs;
    (void)gt;
  }
  const double sim_seconds = seconds_since(t0);

  t0 = Clock::now();
  const RunResult main = run_scenario(options(Variant::kMain));
  const double main_seconds = seconds_since(t0);

  report(1, "confounding magnitude", confounding_magnitude(main, sim_seconds));
  report(2, "bias correction", bias_correction(main, main_seconds, std::max(fast_seconds[0], fast_seconds[1])));
  report(3, "naive-estimator failure", naive_failure(main));
  report(4, "NLME parameter recovery", nlme_recovery(main));
  report(5, "gradient correctness", gradient_check(main.observed));
  report(6, "g-formula enumeration oracle", enumeration_oracle());

  RunOptions zero = options(Variant::kMain);
  zero.scenario.beta = 0.0;
  report(7, "no-confounding reduction", no_confounding(run_scenario(zero)));

  report(8, "misspecification scenario", misspecification(main, run_scenario(options(Variant::kNonlinear))));
  report(9, "robustness scenario", robustness(run_scenario(options(Variant::kCmax))));
  report(10, "determinism", determinism);

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
