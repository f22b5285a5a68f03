#include "titrate/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>

#include "titrate/errors.hpp"

namespace titrate {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(std::string_view key, std::string_view v) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(x)) {
    throw InvalidArgument("config key '" + std::string(key) + "': expected a number, got '" + std::string(v) + "'");
  }
  return x;
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  std::uint64_t x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw InvalidArgument("config key '" + std::string(key) + "': expected a non-negative integer, got '" +
                          std::string(v) + "'");
  }
  return x;
}

using Setter = std::function<void(RunOptions&, std::string_view key, std::string_view value)>;

Setter real(double Scenario::*field) {
  return [field](RunOptions& o, std::string_view k, std::string_view v) { o.scenario.*field = to_double(k, v); };
}
Setter pop(double PopulationParams::*field) {
  return [field](RunOptions& o, std::string_view k, std::string_view v) { o.scenario.pop.*field = to_double(k, v); };
}
Setter mm(double MMParams::*field) {
  return [field](RunOptions& o, std::string_view k, std::string_view v) { o.scenario.mm.*field = to_double(k, v); };
}
Setter alpha(int t) {
  return [t](RunOptions& o, std::string_view k, std::string_view v) {
    o.scenario.alphas[t] = to_double(k, v);
    o.scenario.pilot_alphas = false;
  };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table{
      {"n_per_arm", [](RunOptions& o, auto k, auto v) { o.scenario.n_per_arm = to_uint(k, v); }},
      {"seed", [](RunOptions& o, auto k, auto v) { o.scenario.seed = to_uint(k, v); }},
      {"draws", [](RunOptions& o, auto k, auto v) { o.draws = to_uint(k, v); }},
      {"beta", real(&Scenario::beta)},
      {"beta_scale", real(&Scenario::beta_scale)},
      {"alpha_shift", real(&Scenario::alpha_shift)},
      {"alpha1", alpha(0)},
      {"alpha2", alpha(1)},
      {"alpha3", alpha(2)},
      {"mu_cl", pop(&PopulationParams::mu_cl)},
      {"mu_v", pop(&PopulationParams::mu_v)},
      {"omega_cl", pop(&PopulationParams::omega_cl)},
      {"omega_v", pop(&PopulationParams::omega_v)},
      {"omega",
       [](RunOptions& o, auto k, auto v) { o.scenario.pop.omega_cl = o.scenario.pop.omega_v = to_double(k, v); }},
      {"xi", pop(&PopulationParams::xi)},
      {"mm_vmax", mm(&MMParams::vmax)},
      {"mm_km", mm(&MMParams::km)},
      {"mm_v", mm(&MMParams::v)},
      {"mm_step", real(&Scenario::mm_step)},
      {"adherence", [](RunOptions& o, auto, auto v) { o.scenario.adherence = parse_adherence(v); }},
      {"cmax_driver", [](RunOptions& o, auto, auto v) { o.scenario.cmax_driver = parse_cmax_driver(v); }},
      {"ipw_cap",
       [](RunOptions& o, auto k, auto v) {
         if (v == "none") {
           o.ipw_cap.reset();
         } else {
           o.ipw_cap = to_double(k, v);
         }
       }},
      {"ie_model", [](RunOptions& o, auto, auto v) { o.ie_model = parse_ie_source(v); }},
      {"cond_subjects", [](RunOptions& o, auto, auto v) { o.cond_subjects = parse_cond_subjects(v); }},
      {"nlme_init",
       [](RunOptions& o, auto, auto v) {
         if (v == "two_stage") {
           o.nlme_init = NlmeInit::kTwoStage;
         } else if (v == "default") {
           o.nlme_init = NlmeInit::kDefault;
         } else {
           throw InvalidArgument("nlme_init must be two_stage or default");
         }
       }},
      {"nlme_outer_tol", [](RunOptions& o, auto k, auto v) { o.laplace.outer_tol = to_double(k, v); }},
      {"nlme_inner_tol", [](RunOptions& o, auto k, auto v) { o.laplace.inner_tol = to_double(k, v); }},
      {"nlme_max_iters",
       [](RunOptions& o, auto k, auto v) { o.laplace.max_outer_iters = static_cast<int>(to_uint(k, v)); }},
  };
  return table;
}

}  // namespace

std::string_view to_string(IESource s) {
  switch (s) {
    case IESource::kAuto: return "auto";
    case IESource::kTrue: return "true";
    case IESource::kFitted: return "fitted";
  }
  return "auto";
}

IESource parse_ie_source(std::string_view s) {
  if (s == "auto") return IESource::kAuto;
  if (s == "true") return IESource::kTrue;
  if (s == "fitted") return IESource::kFitted;
  throw InvalidArgument("unknown IE model source '" + std::string(s) + "'");
}

RunOptions default_options(Variant v) {
  RunOptions o;
  o.scenario = make_scenario(v);
  return o;
}

void apply_override(RunOptions& opts, std::string_view key, std::string_view value) {
  const auto it = setters().find(trim(key));
  if (it == setters().end()) throw InvalidArgument("unknown config key '" + std::string(trim(key)) + "'");
  it->second(opts, trim(key), trim(value));
}

void apply_config(RunOptions& opts, std::istream& in) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidArgument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_override(opts, s.substr(0, eq), s.substr(eq + 1));
  }
}

void apply_config_file(RunOptions& opts, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  apply_config(opts, in);
}

void validate(const RunOptions& opts) {
  validate(opts.scenario);
  validate(opts.laplace);
  if (opts.draws == 0) throw InvalidArgument("draws must be positive");
  if (opts.ipw_cap && !(*opts.ipw_cap > 0.0 && *opts.ipw_cap <= 1.0)) {
    throw InvalidArgument("ipw_cap must be a quantile in (0, 1]");
  }
}

}  // namespace titrate
