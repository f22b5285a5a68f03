// titrate: simulate the titration trial, fit the estimators and summarize.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "titrate/config.hpp"
#include "titrate/dataset_io.hpp"
#include "titrate/errors.hpp"
#include "titrate/ipw.hpp"
#include "titrate/nlme.hpp"
#include "titrate/parallel.hpp"
#include "titrate/report.hpp"
#include "titrate/seqstd.hpp"
#include "titrate/trial.hpp"

namespace fs = std::filesystem;
using namespace titrate;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitStrict = 3;

struct CommonArgs {
  std::string scenario = "main";
  std::optional<std::size_t> n_per_arm;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> draws;
  std::string config;
  std::vector<std::string> overrides;
  std::string out = "out";
  std::string data;
  bool fast = false;
  bool strict = false;
  unsigned threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_data) {
  cmd->add_option("--scenario", a.scenario, "Scenario variant")
      ->check(CLI::IsMember({"main", "nonlinear", "cmax", "highres"}));
  cmd->add_option("--n-per-arm", a.n_per_arm, "Subjects per arm (default 5000)")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", a.seed, "Random seed (default 1)");
  cmd->add_option("--draws", a.draws, "Counterfactual draws per arm and method (default 5000)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--config", a.config, "key=value override file")->check(CLI::ExistingFile);
  cmd->add_option("--set", a.overrides, "Single key=value override (repeatable)");
  cmd->add_option("--out", a.out, "Output directory");
  cmd->add_flag("--fast", a.fast, "Use 1000 subjects per arm");
  cmd->add_flag("--strict", a.strict, "Exit with status 3 when an estimator fails");
  cmd->add_option("--threads", a.threads, "Worker threads (0 = all cores)");
  if (with_data) {
    cmd->add_option("--data", a.data, "Observed dataset CSV to analyse instead of simulating")
        ->check(CLI::ExistingFile);
  }
}

RunOptions resolve(const CommonArgs& a) {
  RunOptions o = default_options(parse_variant(a.scenario));
  if (a.fast) o.scenario.n_per_arm = 1000;
  if (!a.config.empty()) apply_config_file(o, a.config);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidArgument("--set expects key=value, got '" + kv + "'");
    apply_override(o, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.n_per_arm) o.scenario.n_per_arm = *a.n_per_arm;
  if (a.seed) o.scenario.seed = *a.seed;
  if (a.draws) o.draws = *a.draws;
  validate(o);
  worker_count() = a.threads;
  return o;
}

std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write " + p.string());
  return f;
}

TrialDataset observed_data(const CommonArgs& a, const RunOptions& o) {
  if (a.data.empty()) return simulate_trial(o.scenario);
  return read_dataset_csv(fs::path(a.data), resolve_thresholds(o.scenario), Regime::kObserved);
}

bool write_fits(const FitArtifacts& f, const fs::path& dir, const TrialDataset& observed, const RunOptions& o) {
  bool ok = true;
  if (f.nlme) {
    auto js = open_out(dir / "nlme_fit.json");
    write_fit_report(*f.nlme, js);
    auto eb = open_out(dir / "eb.csv");
    write_eb_csv(*f.nlme, eb);
    ok = ok && f.nlme->converged;
  } else {
    std::cerr << "nlme: " << f.nlme_error << '\n';
    ok = false;
  }
  std::vector<ArmModels> models;
  for (int a = 0; a < kNumArms; ++a) {
    if (f.seq[a]) {
      models.push_back(*f.seq[a]);
      for (const auto& c : f.seq[a]->cond) {
        for (const auto& [prev, cur] : c.dropped) {
          std::cerr << "warning: arm " << a + 1 << " t=" << c.t << ": dose pair (" << prev << ", " << cur
                    << ") has fewer than 2 residuals; stratum dropped\n";
        }
      }
    } else {
      std::cerr << "standardization arm " << a + 1 << ": " << f.seq_error[a] << '\n';
      ok = false;
    }
  }
  auto sj = open_out(dir / "seqstd_models.json");
  write_models_json(models, sj);
  if (f.ie) {
    auto ie = open_out(dir / "ie_model.json");
    ie << "{\n  \"source\": \"" << to_string(f.ie->source) << "\",\n  \"beta\": " << format_real(f.ie->beta)
       << ",\n  \"beta_se\": " << format_real(f.ie->beta_se) << ",\n  \"intercepts\": [";
    for (int t = 0; t < kNumDecisions; ++t) ie << (t ? ", " : "") << format_real(f.ie->intercepts[t]);
    ie << "]\n}\n";
    try {
      WeightOptions wo;
      wo.cap_quantile = o.ipw_cap;
      auto w = open_out(dir / "weights.csv");
      write_weights_csv(compute_weights(observed, *f.ie, wo), w);
    } catch (const PositivityError& e) {
      std::cerr << "ipw: " << e.what() << '\n';
      ok = false;
    }
  } else {
    std::cerr << "ipw: " << f.ie_error << '\n';
    ok = false;
  }
  return ok;
}

bool write_samples(const std::vector<ArmEstimate>& est, const fs::path& dir) {
  bool ok = true;
  for (const auto& e : est) {
    if (e.status != kStatusOk && e.status != kStatusTruncated) {
      std::cerr << to_string(e.method) << " arm " << e.arm << ": " << e.status
                << (e.message.empty() ? "" : " (" + e.message + ")") << '\n';
      ok = false;
    }
    if (e.values.empty()) continue;
    auto f = open_out(dir / "samples" / ("arm" + std::to_string(e.arm) + "_" + std::string(to_string(e.method)) + ".csv"));
    f << (e.weights.empty() ? "exposure\n" : "exposure,weight\n");
    for (std::size_t i = 0; i < e.values.size(); ++i) {
      f << format_real(e.values[i]);
      if (!e.weights.empty()) f << ',' << format_real(e.weights[i]);
      f << '\n';
    }
  }
  return ok;
}

void print_rows(const std::vector<SummaryRow>& rows) {
  std::cout << std::left << std::setw(5) << "arm" << std::setw(17) << "method" << std::right << std::setw(7) << "n"
            << std::setw(11) << "mean" << std::setw(11) << "sd" << std::setw(10) << "rel_mean" << std::setw(9)
            << "rel_sd" << "  status\n";
  std::cout << std::fixed;
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(5) << r.arm << std::setw(17) << to_string(r.method) << std::right
              << std::setw(7) << r.n << std::setprecision(3) << std::setw(11) << r.mean << std::setw(11) << r.sd
              << std::setw(10) << r.rel_mean << std::setw(9) << r.rel_sd << "  " << r.status << '\n';
  }
}

int cmd_simulate(const CommonArgs& a) {
  const RunOptions o = resolve(a);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_dataset_csv(simulate_trial(o.scenario), dir / "observed.csv");
  write_dataset_csv(simulate_ground_truth(o.scenario), dir / "ground_truth.csv");
  std::cout << "wrote " << (dir / "observed.csv").string() << " and " << (dir / "ground_truth.csv").string() << '\n';
  return 0;
}

int cmd_fit(const CommonArgs& a) {
  const RunOptions o = resolve(a);
  const TrialDataset observed = observed_data(a, o);
  const FitArtifacts f = fit_all(observed, o);
  const bool ok = write_fits(f, a.out, observed, o);
  if (f.nlme) {
    const auto& e = f.nlme->est;
    std::cout << "nlme: mu_cl=" << e.mu_cl << " mu_v=" << e.mu_v << " omega_cl=" << e.omega_cl
              << " omega_v=" << e.omega_v << " xi=" << e.xi << " -2LL=" << f.nlme->neg2ll
              << (f.nlme->converged ? "" : " (not converged)") << '\n';
  }
  return ok || !a.strict ? 0 : kExitStrict;
}

int cmd_estimate(const CommonArgs& a) {
  const RunOptions o = resolve(a);
  const TrialDataset observed = observed_data(a, o);
  const FitArtifacts f = fit_all(observed, o);
  const bool ok = write_samples(estimate_all(observed, f, o), a.out);
  return ok || !a.strict ? 0 : kExitStrict;
}

int cmd_run(const CommonArgs& a) {
  const RunOptions o = resolve(a);
  const auto start = std::chrono::steady_clock::now();
  const RunResult r = run_scenario(o);
  const fs::path dir(a.out);
  emit(r.rows, dir);
  if (r.fits.nlme) {
    auto js = open_out(dir / "nlme_fit.json");
    write_fit_report(*r.fits.nlme, js);
  }
  print_rows(r.rows);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << "run finished in " << std::fixed << std::setprecision(1) << secs << " s; wrote " << (dir / "summary.csv").string()
            << '\n';
  bool ok = true;
  for (const auto& e : r.estimates) {
    if (e.status != kStatusOk && e.status != kStatusTruncated) {
      std::cerr << to_string(e.method) << " arm " << e.arm << ": " << e.status
                << (e.message.empty() ? "" : " (" + e.message + ")") << '\n';
      ok = false;
    }
  }
  return ok || !a.strict ? 0 : kExitStrict;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trial simulation and counterfactual exposure estimation under dose titration"};
  app.require_subcommand(1);
  CommonArgs args;
  auto* sim = app.add_subcommand("simulate", "Simulate observed and ground-truth datasets");
  auto* fit = app.add_subcommand("fit", "Fit NLME, sequential standardization and IE models");
  auto* est = app.add_subcommand("estimate", "Draw counterfactual week-8 exposures per arm and method");
  auto* run = app.add_subcommand("run", "Full pipeline: simulate, fit, estimate, summarize");
  add_common(sim, args, false);
  add_common(fit, args, true);
  add_common(est, args, true);
  add_common(run, args, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(args);
    if (fit->parsed()) return cmd_fit(args);
    if (est->parsed()) return cmd_estimate(args);
    return cmd_run(args);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
