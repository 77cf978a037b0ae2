#include "phasetip/trial_sim.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "phasetip/rng.hpp"
#include "phasetip/survival.hpp"

namespace phasetip {
namespace {

constexpr std::uint64_t kSimPurpose = 3;

std::string subject_id(Arm arm, int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%s%04d", arm == Arm::Experimental ? "E" : "C", index + 1);
  return buf;
}

SubjectRecord simulate_subject(const SimConfig& c, std::uint64_t seed, Arm arm, int index) {
  SubjectRecord r;
  r.subject_id = subject_id(arm, index);
  r.arm = arm;
  CounterRng rng(stream_key(seed, 0, r.subject_id, kSimPurpose));

  const bool trt = arm == Arm::Experimental;
  const double entry = rng.uniform() * c.accrual_months;
  const double admin = c.cutoff_months - entry;
  const double dropout = rng.exponential(c.dropout_hazard);
  const double combo_event = rng.exponential(c.lambda_combo * (trt ? c.hr_combo : 1.0));
  const double switch_time =
      rng.exponential(c.lambda_switch * (trt ? c.switch_multiplier_experimental : 1.0));
  const double mono_residual = rng.exponential(c.lambda_mono * (trt ? c.hr_mono : 1.0));
  const int stratum = 1 + static_cast<int>(rng.uniform() * c.n_strata);

  const bool switches = switch_time < combo_event;
  const double event_time = switches ? switch_time + mono_residual : combo_event;
  const double censor_time = std::min(dropout, admin);

  r.delta = event_time <= censor_time ? 1 : 0;
  r.s = std::min(event_time, censor_time);
  if (switches && switch_time < r.s) r.mono_start = switch_time;
  r.cutoff = admin;
  if (c.n_strata > 0) r.stratum = stratum;
  return r;
}

}  // namespace

void SimConfig::validate() const {
  if (n_experimental < 0 || n_control < 0) throw std::invalid_argument("arm sizes must be >= 0");
  for (double h : {lambda_combo, lambda_switch, lambda_mono, dropout_hazard,
                   switch_multiplier_experimental}) {
    if (!(h > 0.0)) throw std::invalid_argument("hazards must be positive");
  }
  if (!(hr_combo > 0.0 && hr_mono > 0.0)) throw std::invalid_argument("HR targets must be positive");
  if (!(accrual_months >= 0.0)) throw std::invalid_argument("accrual window must be >= 0");
  if (!(cutoff_months > accrual_months)) {
    throw std::invalid_argument("cutoff must come after the accrual window");
  }
  if (n_strata < 0) throw std::invalid_argument("stratum count must be >= 0");
}

std::vector<SubjectRecord> simulate_trial(const SimConfig& config, std::uint64_t seed) {
  config.validate();
  std::vector<SubjectRecord> out;
  out.reserve(static_cast<std::size_t>(config.n_experimental + config.n_control));
  for (int i = 0; i < config.n_experimental; ++i) {
    out.push_back(simulate_subject(config, seed, Arm::Experimental, i));
  }
  for (int i = 0; i < config.n_control; ++i) {
    out.push_back(simulate_subject(config, seed, Arm::Control, i));
  }
  return out;
}

TrialSummary summarize_trial(std::span<const SubjectRecord> records) {
  TrialSummary summary;
  for (const auto& r : records) {
    auto& a = r.arm == Arm::Experimental ? summary.experimental : summary.control;
    ++a.n;
    a.events += r.delta;
    a.censored += 1 - r.delta;
    a.ever_mono += r.has_mono_phase();
    for (std::size_t k = 0; k < TrialSummary::kYears.size(); ++k) {
      const double t = TrialSummary::kYears[k] * 12.0;
      if (r.s <= t) continue;
      ++a.on_treatment[k];
      if (r.has_mono_phase() && *r.mono_start <= t) ++a.on_mono[k];
    }
  }
  if (summary.experimental.n > 0) {
    summary.experimental.median = km_estimate(records, Arm::Experimental).median;
  }
  if (summary.control.n > 0) summary.control.median = km_estimate(records, Arm::Control).median;
  return summary;
}

}  // namespace phasetip
