#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phasetip/counterfactual.hpp"
#include "phasetip/subject.hpp"
#include "phasetip/survival.hpp"

namespace phasetip {

enum class PValueSource { LogRank, CoxWald };

// Proper counterfactuals (with imputation) or the naive rescaling that
// keeps the event count fixed.
enum class Method { Proper, Naive };

struct AnalysisOptions {
  PValueSource p_source = PValueSource::LogRank;
  Ties ties = Ties::Efron;
  bool stratified = false;
};

// Per-arm and hazard-ratio summary of a dataset.
struct PrimaryAnalysis {
  struct ArmSummary {
    int n = 0;
    int events = 0;
    int censored = 0;
    std::optional<double> median;
  };
  ArmSummary experimental;
  ArmSummary control;
  LogRankResult logrank;
  double p_value = 1.0;  // from AnalysisOptions::p_source
  CoxFit overall;
  double hr_overall = 1.0;
  ConfidenceInterval ci_overall;
  PhaseHr phases;
};

PrimaryAnalysis analyze(std::span<const SubjectRecord> records, const AnalysisOptions& options = {});

// Two-sided p-value comparing arms under the selected test.
double treatment_p_value(std::span<const SubjectRecord> records, const AnalysisOptions& options);

struct SearchConfig {
  Effect effect = Effect::Effect1;
  Threshold threshold = Threshold::A_significance;
  Method method = Method::Proper;
  double alpha_level = 0.05;
  double grid_start = 1.0;
  double grid_step = 0.01;
  // Far end of the search; defaults to 10 (Effect1) or 0.01 (Effect2).
  std::optional<double> grid_bound;
  double bisection_tol = 1e-3;
  double neutralization_tol = 0.01;
  int replicates = 20;
  std::optional<double> mdd;
  std::uint64_t seed = 0;
  AnalysisOptions analysis;
  ImputationOptions imputation;
  // 0 picks std::thread::hardware_concurrency().
  unsigned threads = 0;

  double bound() const noexcept;
  // +1 for Effect1 (gamma grows), -1 for Effect2.
  double direction() const noexcept;
  // Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

struct TpaCurvePoint {
  double gamma = 1.0;
  double p_two_sided = 1.0;
  double hr_overall = 1.0;
  std::optional<double> hr_mono;
  int n_events = 0;
  bool evaluable = true;
  std::string message;
};

// Counterfactual dataset for one adjustment factor. Naive transforms
// ignore the draws.
std::vector<SubjectRecord> counterfactual_dataset(std::span<const SubjectRecord> records,
                                                  const TransformParams& params, Method method,
                                                  const ImputationDraws& draws);

// Transforms the dataset and computes p (per options.p_source), the {trt}
// Cox HR and the mono-phase HR. Estimator failures mark the point as not
// evaluable instead of throwing.
TpaCurvePoint evaluate_at(std::span<const SubjectRecord> records, const TransformParams& params,
                          const ImputationDraws& draws, const AnalysisOptions& options = {},
                          Method method = Method::Proper);

enum class ReplicateStatus { Tipped, AlreadyCrossed, NoCrossing };

struct ReplicateResult {
  std::uint64_t replicate_id = 0;
  ReplicateStatus status = ReplicateStatus::NoCrossing;
  std::optional<double> tip;
  // Final bracket: `inner` fails the threshold, `outer` meets it.
  double bracket_inner = 1.0;
  double bracket_outer = 1.0;
  double hr_at_tip = 1.0;
  double p_at_tip = 1.0;
  std::optional<double> hr_mono_at_tip;
  int n_events_at_tip = 0;
  int imputation_fallbacks = 0;
  std::vector<std::string> flags;
};

struct MiSummary {
  bool degenerate = true;
  std::optional<double> tip_median;
  double tip_min = 0.0;
  double tip_max = 0.0;
  double tip_sd = 0.0;
  double hr_at_tip_median = 1.0;
  double p_at_tip_median = 1.0;
  double events_at_tip_mean = 0.0;
  int n_replicates = 0;
  int n_with_tip = 0;
  int n_already_crossed = 0;
  int n_no_crossing = 0;
  int n_flagged = 0;
};

// Median/min/max/SD of the per-replicate tips (replicates without a tip
// are counted but excluded). SD uses the n-1 denominator and is 0 for a
// single tip.
MiSummary mi_aggregate(std::span<const ReplicateResult> replicates);

struct TpaResult {
  Effect effect = Effect::Effect1;
  Threshold threshold = Threshold::A_significance;
  Method method = Method::Proper;
  std::optional<double> tip_value;
  double hr_at_tip = 1.0;
  double p_at_tip = 1.0;
  double n_events_at_tip = 0.0;
  std::vector<ReplicateResult> replicates;
  MiSummary summary;
  std::vector<std::string> flags;
};

// One replicate of the search with fixed draws.
ReplicateResult search_replicate(std::span<const SubjectRecord> records, const SearchConfig& config,
                                 const ImputationDraws& draws);

// Threshold (a): walk the grid until p > alpha_level, then bisect.
TpaResult find_tipping_a(std::span<const SubjectRecord> records, SearchConfig config);

// Threshold (b): walk until the mono-phase HR reaches 1, then bisect to
// |hr_mono - 1| <= neutralization_tol. Throws DataError when the dataset
// has no mono phase on the transformed arm.
TpaResult find_tipping_b(std::span<const SubjectRecord> records, SearchConfig config);

// Dispatches on config.threshold.
TpaResult find_tipping(std::span<const SubjectRecord> records, const SearchConfig& config);

// Evaluates an explicit grid with replicate 0's draws.
std::vector<TpaCurvePoint> grid_scan(std::span<const SubjectRecord> records,
                                     const SearchConfig& config, std::span<const double> gammas);

// start, start +/- step, ... up to and including the bound.
std::vector<double> make_grid(double start, double bound, double step);

}  // namespace phasetip
