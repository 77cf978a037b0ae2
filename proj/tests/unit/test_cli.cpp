#include <gtest/gtest.h>

#include <stdlib.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "phasetip/dataset_io.hpp"
#include "phasetip/trial_sim.hpp"

namespace fs = std::filesystem;
using phasetip::cli::ExitCode;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = phasetip::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "phasetip_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    phasetip::write_dataset(data(), phasetip::simulate_trial(phasetip::SimConfig{}, 1));
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static fs::path data() { return dir_ / "trial.csv"; }
  static fs::path path(const std::string& name) { return dir_ / name; }

  static inline fs::path dir_;
};

}  // namespace

TEST_F(Cli, SimulateMatchesLibrary) {
  const auto r = run({"simulate", "--seed", "1"});
  ASSERT_EQ(r.code, ExitCode::kOk) << r.err;
  EXPECT_EQ(r.out, slurp(data()));
}

TEST_F(Cli, SimulateHonoursSeedEnvironment) {
  ::setenv("PHASETIP_SEED", "1", 1);
  const auto env = run({"simulate"});
  const auto flag = run({"simulate", "--seed", "2"});
  ::unsetenv("PHASETIP_SEED");
  EXPECT_EQ(env.out, slurp(data()));
  EXPECT_NE(flag.out, env.out);
}

TEST_F(Cli, AnalyzeReportsOverallHrNearAnchor) {
  const auto r = run({"analyze", "--data", data().string(), "--out", path("analysis").string()});
  ASSERT_EQ(r.code, ExitCode::kOk) << r.err;
  EXPECT_NE(r.out.find("Overall HR (E vs C)"), std::string::npos);
  EXPECT_NE(r.out.find("Monotherapy-phase HR"), std::string::npos);
  std::istringstream csv(slurp(path("analysis") / "analysis.csv"));
  std::string line;
  double hr = 0.0;
  while (std::getline(csv, line)) {
    if (line.rfind("hr_overall,", 0) == 0) hr = std::stod(line.substr(11));
  }
  // One trial-sized draw varies too much for a tight band; the reference
  // interval (0.566, 0.877) is the spread a single trial is expected to show.
  EXPECT_GT(hr, 0.566);
  EXPECT_LT(hr, 0.877);
}

TEST_F(Cli, TpaOutputIsByteIdenticalAcrossRunsAndThreads) {
  const auto base = std::vector<std::string>{"tpa",    "--data",      data().string(),
                                             "--effect", "1",         "--threshold",
                                             "a",      "--seed",      "7",
                                             "--replicates", "4"};
  auto with = [&](const std::string& out, const std::string& threads) {
    auto args = base;
    args.insert(args.end(), {"--out", path(out).string(), "--threads", threads});
    const auto r = run(args);
    EXPECT_EQ(r.code, ExitCode::kOk) << r.err;
    return slurp(path(out) / "results.csv");
  };
  const auto first = with("tpa1", "1");
  EXPECT_NE(first.find("Effect 1 / Proper counterfactuals,a,"), std::string::npos) << first;
  EXPECT_EQ(first, with("tpa2", "1"));
  EXPECT_EQ(first, with("tpa3", "4"));
}

TEST_F(Cli, CurveEffect2IsMonotoneWithOneCrossing) {
  const auto out = path("curve");
  const auto r = run({"curve", "--data", data().string(), "--effect", "2", "--seed", "3",
                      "--out", out.string()});
  ASSERT_EQ(r.code, ExitCode::kOk) << r.err;
  std::istringstream csv(slurp(out / "curve_2_a.csv"));
  std::string line;
  std::getline(csv, line);
  std::vector<double> gamma;
  while (std::getline(csv, line)) gamma.push_back(std::stod(line.substr(0, line.find(','))));
  ASSERT_GT(gamma.size(), 10u);
  for (std::size_t i = 1; i < gamma.size(); ++i) EXPECT_LT(gamma[i], gamma[i - 1]);

  const auto svg = slurp(out / "curve_2_a.svg");
  std::size_t markers = 0;
  for (auto pos = svg.find("class=\"crossing\""); pos != std::string::npos;
       pos = svg.find("class=\"crossing\"", pos + 1)) {
    ++markers;
  }
  EXPECT_EQ(markers, 1u);
}

TEST_F(Cli, ConfigFileSitsBetweenFlagsAndEnvironment) {
  const auto cfg = path("sim.ini");
  std::ofstream(cfg) << "seed = 1\nn_control = 5\n";
  const auto from_file = run({"simulate", "--config", cfg.string(), "--n-experimental", "5"});
  ASSERT_EQ(from_file.code, ExitCode::kOk) << from_file.err;

  phasetip::SimConfig small;
  small.n_experimental = 5;
  small.n_control = 5;
  std::ostringstream expected;
  phasetip::write_dataset(expected, phasetip::simulate_trial(small, 1));
  EXPECT_EQ(from_file.out, expected.str());

  ::setenv("PHASETIP_SEED", "9", 1);
  const auto env_loses = run({"simulate", "--config", cfg.string(), "--n-experimental", "5"});
  ::unsetenv("PHASETIP_SEED");
  EXPECT_EQ(env_loses.out, expected.str());

  const auto flag_wins =
      run({"simulate", "--config", cfg.string(), "--n-experimental", "5", "--seed", "2"});
  EXPECT_NE(flag_wins.out, expected.str());
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({"tpa", "--data", data().string(), "--bogus"}).code, ExitCode::kUsage);
  EXPECT_EQ(run({}).code, ExitCode::kUsage);
  EXPECT_EQ(run({"nonsense"}).code, ExitCode::kUsage);
  EXPECT_EQ(run({"tpa", "--data", data().string(), "--effect", "3"}).code, ExitCode::kUsage);
  EXPECT_EQ(run({"analyze"}).code, ExitCode::kUsage);
  EXPECT_EQ(run({"--help"}).code, ExitCode::kOk);
}

TEST_F(Cli, DataErrorsExitTwo) {
  const auto missing = run({"analyze", "--data", path("nope.csv").string()});
  EXPECT_EQ(missing.code, ExitCode::kDataError);
  EXPECT_NE(missing.err.find("data error"), std::string::npos);

  const auto bad = path("bad.csv");
  std::ofstream(bad) << phasetip::kDatasetHeader << "\nA,E,10,1,12,20,\n";
  const auto r = run({"analyze", "--data", bad.string()});
  EXPECT_EQ(r.code, ExitCode::kDataError);
  EXPECT_NE(r.err.find("phase time exceeds follow-up"), std::string::npos) << r.err;

  EXPECT_EQ(run({"tpa", "--data", data().string(), "--effect", "1", "--threshold", "a",
                 "--replicates", "1", "--out", "/proc/phasetip_nope"})
                .code,
            ExitCode::kDataError);
}

TEST_F(Cli, SeparatedDataExitsThree) {
  const auto sep = path("separated.csv");
  std::ofstream out(sep);
  out << phasetip::kDatasetHeader << '\n';
  for (int i = 0; i < 5; ++i) {
    out << "E" << i << ",E," << 1 + i << ",1,,50,\n";
    out << "C" << i << ",C," << 20 + i << ",0,,50,\n";
  }
  out.close();
  const auto r = run({"analyze", "--data", sep.string()});
  EXPECT_EQ(r.code, ExitCode::kNumericalError) << r.out << r.err;
  EXPECT_NE(r.err.find("numerical failure"), std::string::npos);
}
