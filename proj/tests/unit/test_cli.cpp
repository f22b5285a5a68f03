#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TITRATE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("titrate_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("run --bogus-flag"), 2);
  EXPECT_EQ(run_cli("run --scenario sideways"), 2);
  EXPECT_EQ(run_cli("run --n-per-arm 10 --set nosuchkey=1"), 2);
  EXPECT_EQ(run_cli("run --n-per-arm 10 --set beta"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("--help"), 0);
}

TEST(Cli, SimulateWritesDatasets) {
  const auto out = scratch("simulate");
  ASSERT_EQ(run_cli("simulate --n-per-arm 20 --seed 3 --out " + out.string()), 0);
  const std::string obs = slurp(out / "observed.csv");
  EXPECT_EQ(count_lines(obs), 101u);
  EXPECT_EQ(obs.substr(0, obs.find('\n')), "subject_id,arm,eta_cl,eta_v,d1,d2,d3,d4,e1,e2,e3,e4,s1,s2,s3,adherent");
  EXPECT_TRUE(fs::exists(out / "ground_truth.csv"));
  fs::remove_all(out);
}

TEST(Cli, FitAndEstimateFromDataFile) {
  const auto out = scratch("fit");
  ASSERT_EQ(run_cli("simulate --n-per-arm 200 --seed 2 --out " + out.string()), 0);
  const std::string data = (out / "observed.csv").string();
  ASSERT_EQ(run_cli("fit --data " + data + " --out " + (out / "fit").string()), 0);
  for (const char* f : {"nlme_fit.json", "eb.csv", "seqstd_models.json", "ie_model.json", "weights.csv"}) {
    EXPECT_TRUE(fs::exists(out / "fit" / f)) << f;
  }
  EXPECT_EQ(count_lines(slurp(out / "fit" / "eb.csv")), 1001u);
  ASSERT_EQ(run_cli("estimate --data " + data + " --draws 100 --out " + (out / "est").string()), 0);
  const std::string s = slurp(out / "est" / "samples" / "arm3_standardization.csv");
  EXPECT_EQ(s.substr(0, s.find('\n')), "exposure");
  EXPECT_EQ(count_lines(s), 101u);
  const std::string w = slurp(out / "est" / "samples" / "arm3_ipw.csv");
  EXPECT_EQ(w.substr(0, w.find('\n')), "exposure,weight");
  fs::remove_all(out);
}

TEST(Cli, RunWritesThirtyRows) {
  const auto out = scratch("run");
  ASSERT_EQ(run_cli("run --n-per-arm 200 --draws 200 --out " + out.string()), 0);
  EXPECT_EQ(count_lines(slurp(out / "summary.csv")), 31u);
  EXPECT_TRUE(fs::exists(out / "summary.json"));
  fs::remove_all(out);
}

TEST(Cli, ConfigFileAndHighResScenario) {
  const auto out = scratch("config");
  fs::create_directories(out);
  {
    std::ofstream cfg(out / "run.cfg");
    cfg << "# smaller run\nn_per_arm = 100\ndraws = 50\n";
  }
  ASSERT_EQ(run_cli("run --scenario highres --config " + (out / "run.cfg").string() + " --out " +
                    (out / "r").string()),
            0);
  const std::string s = slurp(out / "r" / "summary.csv");
  EXPECT_NE(s.find("highres,1,ground_truth,100,"), std::string::npos);
  EXPECT_NE(s.find("highres,1,nlme,50,"), std::string::npos);
  fs::remove_all(out);
}

TEST(Cli, StrictModeReportsEstimatorFailure) {
  const auto out = scratch("strict");
  // Three subjects per arm are too few for the conditional regressions.
  EXPECT_EQ(run_cli("run --n-per-arm 3 --draws 10 --out " + out.string()), 0);
  EXPECT_EQ(run_cli("run --n-per-arm 3 --draws 10 --strict --out " + out.string()), 3);
  fs::remove_all(out);
}
