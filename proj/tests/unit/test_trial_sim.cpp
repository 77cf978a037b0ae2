#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <string>

#include "builders.hpp"
#include "phasetip/survival.hpp"
#include "phasetip/trial_sim.hpp"

using namespace phasetip;
using builders::rec;

namespace {

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  for (double x : xs) m.sd += (x - m.mean) * (x - m.mean);
  m.sd = std::sqrt(m.sd / static_cast<double>(xs.size() - 1));
  return m;
}

}  // namespace

TEST(SimConfig, RejectsBadSettings) {
  const auto bad = [](auto mutate) {
    SimConfig c;
    mutate(c);
    return c;
  };
  EXPECT_NO_THROW(SimConfig{}.validate());
  EXPECT_THROW(bad([](SimConfig& c) { c.lambda_combo = 0.0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](SimConfig& c) { c.dropout_hazard = -1.0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](SimConfig& c) { c.hr_mono = 0.0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](SimConfig& c) { c.cutoff_months = c.accrual_months; }).validate(),
               std::invalid_argument);
  EXPECT_THROW(simulate_trial(bad([](SimConfig& c) { c.n_control = -1; }), 1),
               std::invalid_argument);
}

TEST(SimulateTrial, DefaultArmSizes) {
  const auto d = simulate_trial(SimConfig{}, 1);
  const auto s = summarize_trial(d);
  EXPECT_EQ(s.experimental.n, 337);
  EXPECT_EQ(s.control.n, 172);
}

TEST(SimulateTrial, DeterministicPerSeed) {
  const auto a = simulate_trial(SimConfig{}, 11);
  EXPECT_EQ(a, simulate_trial(SimConfig{}, 11));
  EXPECT_NE(a, simulate_trial(SimConfig{}, 12));
}

TEST(SimulateTrial, SubjectsDoNotDependOnArmSize) {
  SimConfig small;
  small.n_experimental = 10;
  small.n_control = 5;
  const auto a = simulate_trial(small, 4);
  const auto b = simulate_trial(SimConfig{}, 4);
  for (const auto& r : a) {
    const auto it = std::find_if(b.begin(), b.end(),
                                 [&](const auto& x) { return x.subject_id == r.subject_id; });
    ASSERT_NE(it, b.end());
    EXPECT_EQ(*it, r);
  }
}

TEST(SimulateTrial, FuzzEveryRecordValid) {
  SimConfig c;
  c.n_experimental = 50'000;
  c.n_control = 50'000;
  c.n_strata = 3;
  const auto d = simulate_trial(c, 99);
  ASSERT_EQ(d.size(), 100'000u);
  for (const auto& r : d) {
    const auto v = check_record(r);
    ASSERT_FALSE(v.has_value()) << r.subject_id << ": " << v->message;
    ASSERT_TRUE(r.stratum && *r.stratum >= 1 && *r.stratum <= 3);
  }
}

TEST(SimulateTrial, NoDropoutMeansAdministrativeCensoring) {
  SimConfig c;
  c.dropout_hazard = 1e-12;
  int censored = 0;
  for (const auto& r : simulate_trial(c, 5)) {
    if (r.delta) continue;
    ++censored;
    EXPECT_EQ(r.s, r.cutoff) << r.subject_id;
  }
  EXPECT_GT(censored, 0);
}

TEST(SimulateTrial, NullEffectsGiveUnitHazardRatio) {
  SimConfig c;
  c.hr_combo = 1.0;
  c.hr_mono = 1.0;
  std::vector<double> log_hr;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    log_hr.push_back(cox_treatment_fit(simulate_trial(c, seed)).coefs[0]);
  }
  const auto m = moments(log_hr);
  const double mc_se = m.sd / std::sqrt(10.0);
  EXPECT_LT(std::abs(m.mean), 3.0 * mc_se) << "mean log HR " << m.mean;
}

TEST(SimulateTrial, DefaultsHitCalibrationTargets) {
  std::vector<double> mono_fraction, combo, mono, med_e, med_c;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto d = simulate_trial(SimConfig{}, seed);
    const auto s = summarize_trial(d);
    mono_fraction.push_back(static_cast<double>(s.experimental.ever_mono + s.control.ever_mono) /
                            static_cast<double>(d.size()));
    med_e.push_back(*s.experimental.median);
    med_c.push_back(*s.control.median);
    const auto ph = phase_hr(d);
    combo.push_back(ph.hr_combo);
    mono.push_back(*ph.hr_mono);
  }
  EXPECT_NEAR(moments(mono_fraction).mean, 0.369, 0.05);
  EXPECT_NEAR(moments(combo).mean, 0.811, 0.08);
  EXPECT_NEAR(moments(mono).mean, 0.493, 0.08);
  EXPECT_NEAR(moments(med_e).mean, 14.5, 2.0);
  EXPECT_NEAR(moments(med_c).mean, 12.6, 2.0);
}

// SE of the log-HR scales as 1/sqrt(n): doubling n shrinks it by sqrt(2),
// quadrupling halves it.
TEST(SimulateTrial, StandardErrorScaling) {
  const auto mean_se = [](int factor) {
    SimConfig c;
    c.n_experimental *= factor;
    c.n_control *= factor;
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      total += cox_treatment_fit(simulate_trial(c, seed)).se[0];
    }
    return total / 10.0;
  };
  const double se1 = mean_se(1);
  EXPECT_NEAR(mean_se(2) / se1, 1.0 / std::sqrt(2.0), 0.03);
  EXPECT_NEAR(mean_se(4) / se1, 0.5, 0.03);
}

TEST(SimulateTrial, FixtureMatchesDefaults) {
  std::ifstream in(std::string(PHASETIP_FIXTURE_DIR) + "/sim_calibration.txt");
  ASSERT_TRUE(in);
  std::map<std::string, double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    ASSERT_NE(eq, std::string::npos) << line;
    values[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
  }
  const SimConfig c;
  EXPECT_EQ(values.at("lambda_combo"), c.lambda_combo);
  EXPECT_EQ(values.at("lambda_switch"), c.lambda_switch);
  EXPECT_EQ(values.at("lambda_mono"), c.lambda_mono);
  EXPECT_EQ(values.at("dropout_hazard"), c.dropout_hazard);
  EXPECT_EQ(values.at("accrual_months"), c.accrual_months);
  EXPECT_EQ(values.at("cutoff_months"), c.cutoff_months);
}

TEST(SummarizeTrial, EmptyInputIsAllZero) {
  const auto s = summarize_trial({});
  for (const auto* a : {&s.experimental, &s.control}) {
    EXPECT_EQ(a->n, 0);
    EXPECT_EQ(a->events, 0);
    EXPECT_EQ(a->censored, 0);
    EXPECT_EQ(a->ever_mono, 0);
    EXPECT_FALSE(a->median.has_value());
    for (int k = 0; k < 5; ++k) {
      EXPECT_EQ(a->on_treatment[k], 0);
      EXPECT_EQ(a->on_mono[k], 0);
    }
  }
}

TEST(SummarizeTrial, FourSubjectHandTally) {
  const std::vector<SubjectRecord> d{
      rec("E1", Arm::Experimental, 20, 1, 10.0),
      rec("E2", Arm::Experimental, 30, 0),
      rec("C1", Arm::Control, 6, 1),
      rec("C2", Arm::Control, 40, 0, 25.0),
  };
  const auto s = summarize_trial(d);
  // Landmarks at 12, 18, 24, 30, 36 months.
  EXPECT_EQ(s.experimental.n, 2);
  EXPECT_EQ(s.experimental.events, 1);
  EXPECT_EQ(s.experimental.censored, 1);
  EXPECT_EQ(s.experimental.ever_mono, 1);
  EXPECT_EQ(s.experimental.on_treatment, (std::array<int, 5>{2, 2, 1, 0, 0}));
  EXPECT_EQ(s.experimental.on_mono, (std::array<int, 5>{1, 1, 0, 0, 0}));
  EXPECT_EQ(s.experimental.median, 20.0);

  EXPECT_EQ(s.control.n, 2);
  EXPECT_EQ(s.control.events, 1);
  EXPECT_EQ(s.control.censored, 1);
  EXPECT_EQ(s.control.ever_mono, 1);
  EXPECT_EQ(s.control.on_treatment, (std::array<int, 5>{1, 1, 1, 1, 1}));
  EXPECT_EQ(s.control.on_mono, (std::array<int, 5>{0, 0, 0, 1, 1}));
  EXPECT_EQ(s.control.median, 6.0);
}
