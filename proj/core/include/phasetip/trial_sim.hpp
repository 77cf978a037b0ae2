#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "phasetip/subject.hpp"

namespace phasetip {

// Two-phase trial generator. Hazards are per month. A subject starts in
// the combination phase where a PFS event competes with a transition to
// monotherapy; after a transition the event hazard switches to the mono
// hazard. Treatment multiplies each phase hazard by its phase HR.
//
// Default hazards come from tools/calibrate_sim (see
// tests/fixtures/sim_calibration.txt).
struct SimConfig {
  int n_experimental = 337;
  int n_control = 172;
  double lambda_combo = 0.0590829;
  double lambda_switch = 0.0409037;
  double switch_multiplier_experimental = 1.0;
  double lambda_mono = 0.0678902;
  double hr_combo = 0.811;
  double hr_mono = 0.493;
  double accrual_months = 67.0;
  double cutoff_months = 73.0;
  double dropout_hazard = 0.00736082;
  // Strata are drawn uniformly from {1..n_strata}; 0 leaves them empty.
  int n_strata = 0;

  // Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

std::vector<SubjectRecord> simulate_trial(const SimConfig& config, std::uint64_t seed);

struct TrialSummary {
  static constexpr std::array<double, 5> kYears{1.0, 1.5, 2.0, 2.5, 3.0};

  struct ArmCounts {
    int n = 0;
    int events = 0;
    int censored = 0;
    int ever_mono = 0;
    std::optional<double> median;
    // Still progression-free and followed at each landmark.
    std::array<int, 5> on_treatment{};
    // Of those, already in the mono phase.
    std::array<int, 5> on_mono{};
  };

  ArmCounts experimental;
  ArmCounts control;
};

TrialSummary summarize_trial(std::span<const SubjectRecord> records);

}  // namespace phasetip
