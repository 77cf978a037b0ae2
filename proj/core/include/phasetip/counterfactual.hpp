#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phasetip/rng.hpp"
#include "phasetip/subject.hpp"
#include "phasetip/survival.hpp"

namespace phasetip {

// Effect1 inflates the control arm's mono phase (gamma >= 1); Effect2
// shrinks the experimental arm's mono phase (0 < gamma <= 1).
enum class Effect { Effect1, Effect2 };

// Threshold A: significance lost. Threshold B: mono-phase HR neutralized
// (the factor is conventionally called alpha there).
enum class Threshold { A_significance, B_neutralize };

struct TransformParams {
  Effect effect = Effect::Effect1;
  double gamma = 1.0;
  Threshold threshold = Threshold::A_significance;
};

// Throws std::invalid_argument when gamma is outside the effect's range.
void check_gamma(Effect effect, double gamma);

//---------------------------------------------------------------------------//
// Censoring distribution G
//---------------------------------------------------------------------------//

enum class CensoringFamily { Exponential, KaplanMeier };

struct CensoringModel {
  CensoringFamily family = CensoringFamily::Exponential;
  double rate = 0.0;         // exponential
  KmCurve curve;             // Kaplan-Meier on reversed indicators
  double tail_time = 0.0;    // where mass beyond the last KM step sits
  int n_censored = 0;
  double exposure = 0.0;
};

// Fits G with censorings as events and events as censorings. Throws
// DataError when nothing is censored.
CensoringModel fit_censoring_model(std::span<const SubjectRecord> records,
                                   CensoringFamily family = CensoringFamily::Exponential);

struct CensoringDraw {
  double value = 0.0;
  bool fallback = false;
};

inline constexpr int kRejectionCap = 10'000;

// r ~ G conditioned on r >= floor. The exponential path adds a fresh
// draw to the floor; the Kaplan-Meier path uses rejection and returns
// `fallback_value` flagged when kRejectionCap draws all fall below floor.
CensoringDraw sample_censoring_conditional(const CensoringModel& model, double floor,
                                           CounterRng& rng, double fallback_value);

// Approach 1: the time from randomization to data cutoff.
double impute_censoring_cutoff(const SubjectRecord& record);

// Share of censored subjects whose follow-up ends at the data cutoff.
double cutoff_censoring_fraction(std::span<const SubjectRecord> records,
                                 double tolerance = 1e-9);

//---------------------------------------------------------------------------//
// Experimental mono-phase event model
//---------------------------------------------------------------------------//

struct MonoEventModel {
  double rate = 0.0;
  int events = 0;
  double exposure = 0.0;
};

// Exponential MLE on mono durations (s - mono_start) of experimental
// subjects. Throws DataError when no mono-phase event exists.
MonoEventModel fit_mono_event_model(std::span<const SubjectRecord> records);

// s + Exp(rate): the unobserved residual time to event.
double impute_event_time(const SubjectRecord& record, const MonoEventModel& model,
                         CounterRng& rng);

//---------------------------------------------------------------------------//
// Transforms
//---------------------------------------------------------------------------//

// Control mono subjects with an event: t' = x + gamma (s - x) stays an
// event when t' <= r, else becomes censored at r. Other records pass
// through. Throws std::invalid_argument when r is missing where needed.
SubjectRecord transform_effect1(const SubjectRecord& record, double gamma,
                                std::optional<double> imputed_censoring);

// Experimental mono subjects: events shrink to x + gamma (s - x); censored
// subjects become events at t' = x + gamma (t_hat - x) when t' <= s.
SubjectRecord transform_effect2(const SubjectRecord& record, double gamma,
                                std::optional<double> imputed_event);

// Rescales the mono phase of every applicable subject regardless of the
// event indicator. Events are never added or removed.
std::vector<SubjectRecord> naive_transform(std::span<const SubjectRecord> records,
                                           Effect effect, double gamma);

//---------------------------------------------------------------------------//
// Imputation draws
//---------------------------------------------------------------------------//

enum class CensoringImputation {
  Auto,    // cutoff when >= 50% of censorings sit at the cutoff, else fitted
  Cutoff,  // approach 1
  Fitted,  // approach 2
};

struct ImputationOptions {
  CensoringImputation censoring = CensoringImputation::Auto;
  CensoringFamily family = CensoringFamily::Exponential;
};

// Per-subject imputed values for one replicate, aligned with the dataset.
// Effect1 fills r_hat for control mono events; Effect2 fills t_hat for
// experimental mono censorings.
struct ImputationDraws {
  Effect effect = Effect::Effect1;
  std::uint64_t seed = 0;
  std::uint64_t replicate_id = 0;
  std::vector<std::optional<double>> values;
  CensoringImputation resolved = CensoringImputation::Cutoff;
  int fallbacks = 0;
};

CensoringImputation resolve_imputation(std::span<const SubjectRecord> records,
                                       CensoringImputation requested);

ImputationDraws draw_imputations(std::span<const SubjectRecord> records, Effect effect,
                                 std::uint64_t seed, std::uint64_t replicate_id,
                                 const ImputationOptions& options = {});

// Applies the effect's transform to every record with the given draws.
std::vector<SubjectRecord> apply_transform(std::span<const SubjectRecord> records,
                                           Effect effect, double gamma,
                                           const ImputationDraws& draws);

}  // namespace phasetip
