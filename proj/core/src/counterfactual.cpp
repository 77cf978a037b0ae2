#include "phasetip/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "phasetip/errors.hpp"

namespace phasetip {
namespace {

constexpr std::uint64_t kCensoringPurpose = 1;
constexpr std::uint64_t kEventPurpose = 2;

bool applies(const SubjectRecord& r, Effect effect) {
  const Arm arm = effect == Effect::Effect1 ? Arm::Control : Arm::Experimental;
  return r.arm == arm && r.has_mono_phase();
}

double draw_from_km(const CensoringModel& model, CounterRng& rng) {
  const double u = rng.uniform();
  const auto& c = model.curve;
  for (std::size_t j = 0; j < c.times.size(); ++j) {
    if (c.surv[j] <= 1.0 - u) return c.times[j];
  }
  // Mass the curve never reaches sits at the largest observed time.
  return model.tail_time;
}

}  // namespace

void check_gamma(Effect effect, double gamma) {
  if (!std::isfinite(gamma)) throw std::invalid_argument("adjustment factor must be finite");
  if (effect == Effect::Effect1 && gamma < 1.0) {
    throw std::invalid_argument("Effect 1 requires an adjustment factor >= 1");
  }
  if (effect == Effect::Effect2 && !(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("Effect 2 requires an adjustment factor in (0, 1]");
  }
}

CensoringModel fit_censoring_model(std::span<const SubjectRecord> records,
                                   CensoringFamily family) {
  CensoringModel model;
  model.family = family;
  std::vector<double> times;
  std::vector<int> reversed;
  double max_time = 0.0;
  for (const auto& r : records) {
    model.n_censored += r.delta == 0;
    model.exposure += r.s;
    times.push_back(r.s);
    reversed.push_back(1 - r.delta);
    max_time = std::max(max_time, r.s);
  }
  if (model.n_censored == 0) throw DataError("censoring model needs at least one censoring");
  model.rate = model.n_censored / model.exposure;
  if (family == CensoringFamily::KaplanMeier) {
    model.curve = km_estimate(times, reversed);
    model.tail_time = max_time;
  }
  return model;
}

CensoringDraw sample_censoring_conditional(const CensoringModel& model, double floor,
                                           CounterRng& rng, double fallback_value) {
  if (floor < 0.0) throw std::invalid_argument("conditioning floor must be >= 0");
  if (model.family == CensoringFamily::Exponential) {
    if (!(model.rate > 0.0)) throw std::invalid_argument("exponential rate must be positive");
    return {floor + rng.exponential(model.rate), false};
  }
  for (int attempt = 0; attempt < kRejectionCap; ++attempt) {
    const double r = draw_from_km(model, rng);
    if (r >= floor) return {r, false};
  }
  return {fallback_value, true};
}

double impute_censoring_cutoff(const SubjectRecord& record) {
  if (record.delta != 1) {
    throw std::invalid_argument("cutoff imputation applies to observed events only");
  }
  return record.cutoff;
}

double cutoff_censoring_fraction(std::span<const SubjectRecord> records, double tolerance) {
  int censored = 0;
  int at_cutoff = 0;
  for (const auto& r : records) {
    if (r.delta != 0) continue;
    ++censored;
    at_cutoff += std::abs(r.cutoff - r.s) <= tolerance;
  }
  return censored == 0 ? 0.0 : static_cast<double>(at_cutoff) / censored;
}

MonoEventModel fit_mono_event_model(std::span<const SubjectRecord> records) {
  MonoEventModel model;
  for (const auto& r : records) {
    if (!applies(r, Effect::Effect2)) continue;
    model.events += r.delta;
    model.exposure += r.mono_duration();
  }
  if (model.events == 0) throw DataError("no mono-phase events on the experimental arm");
  model.rate = model.events / model.exposure;
  return model;
}

double impute_event_time(const SubjectRecord& record, const MonoEventModel& model,
                         CounterRng& rng) {
  const double t_hat = record.s + rng.exponential(model.rate);
  // A very large rate can round the residual away; keep t_hat > s.
  return t_hat > record.s ? t_hat : std::nextafter(record.s, INFINITY);
}

SubjectRecord transform_effect1(const SubjectRecord& record, double gamma,
                                std::optional<double> imputed_censoring) {
  check_gamma(Effect::Effect1, gamma);
  if (!applies(record, Effect::Effect1) || record.delta == 0 || gamma == 1.0) return record;
  if (!imputed_censoring) {
    throw std::invalid_argument("subject '" + record.subject_id +
                                "': missing imputed censoring time");
  }
  const double x = *record.mono_start;
  const double r = *imputed_censoring;
  const double t_prime = x + gamma * (record.s - x);
  SubjectRecord out = record;
  if (t_prime <= r) {
    out.s = t_prime;
  } else {
    out.s = r;
    out.delta = 0;
  }
  out.cutoff = std::max(out.cutoff, out.s);
  return out;
}

SubjectRecord transform_effect2(const SubjectRecord& record, double gamma,
                                std::optional<double> imputed_event) {
  check_gamma(Effect::Effect2, gamma);
  if (!applies(record, Effect::Effect2) || gamma == 1.0) return record;
  const double x = *record.mono_start;
  SubjectRecord out = record;
  if (record.delta == 1) {
    out.s = x + gamma * (record.s - x);
    return out;
  }
  if (!imputed_event) {
    throw std::invalid_argument("subject '" + record.subject_id + "': missing imputed event time");
  }
  // The observed follow-up is the subject's censoring time.
  const double t_prime = x + gamma * (*imputed_event - x);
  if (t_prime <= record.s) {
    out.s = t_prime;
    out.delta = 1;
  }
  return out;
}

std::vector<SubjectRecord> naive_transform(std::span<const SubjectRecord> records,
                                           Effect effect, double gamma) {
  check_gamma(effect, gamma);
  std::vector<SubjectRecord> out(records.begin(), records.end());
  if (gamma == 1.0) return out;
  for (auto& r : out) {
    if (!applies(r, effect)) continue;
    const double x = *r.mono_start;
    r.s = x + gamma * (r.s - x);
    r.cutoff = std::max(r.cutoff, r.s);
  }
  return out;
}

CensoringImputation resolve_imputation(std::span<const SubjectRecord> records,
                                       CensoringImputation requested) {
  if (requested != CensoringImputation::Auto) return requested;
  const bool any_censored = std::any_of(records.begin(), records.end(),
                                        [](const SubjectRecord& r) { return r.delta == 0; });
  if (!any_censored || cutoff_censoring_fraction(records) >= 0.5) {
    return CensoringImputation::Cutoff;
  }
  return CensoringImputation::Fitted;
}

ImputationDraws draw_imputations(std::span<const SubjectRecord> records, Effect effect,
                                 std::uint64_t seed, std::uint64_t replicate_id,
                                 const ImputationOptions& options) {
  ImputationDraws draws;
  draws.effect = effect;
  draws.seed = seed;
  draws.replicate_id = replicate_id;
  draws.values.assign(records.size(), std::nullopt);

  if (effect == Effect::Effect1) {
    draws.resolved = resolve_imputation(records, options.censoring);
    std::optional<CensoringModel> g;
    if (draws.resolved == CensoringImputation::Fitted) {
      g = fit_censoring_model(records, options.family);
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (!applies(r, effect) || r.delta != 1) continue;
      if (!g) {
        draws.values[i] = impute_censoring_cutoff(r);
        continue;
      }
      CounterRng rng(stream_key(seed, replicate_id, r.subject_id, kCensoringPurpose));
      const auto draw = sample_censoring_conditional(*g, r.s, rng, r.cutoff);
      draws.fallbacks += draw.fallback;
      // Nobody can be followed past the data cutoff.
      draws.values[i] = std::min(draw.value, r.cutoff);
    }
    return draws;
  }

  const bool needed = std::any_of(records.begin(), records.end(), [&](const SubjectRecord& r) {
    return applies(r, effect) && r.delta == 0;
  });
  if (!needed) return draws;
  const auto model = fit_mono_event_model(records);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!applies(r, effect) || r.delta != 0) continue;
    CounterRng rng(stream_key(seed, replicate_id, r.subject_id, kEventPurpose));
    draws.values[i] = impute_event_time(r, model, rng);
  }
  return draws;
}

std::vector<SubjectRecord> apply_transform(std::span<const SubjectRecord> records,
                                           Effect effect, double gamma,
                                           const ImputationDraws& draws) {
  if (draws.values.size() != records.size()) {
    throw std::invalid_argument("imputation draws do not match the dataset");
  }
  std::vector<SubjectRecord> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.push_back(effect == Effect::Effect1
                      ? transform_effect1(records[i], gamma, draws.values[i])
                      : transform_effect2(records[i], gamma, draws.values[i]));
  }
  return out;
}

}  // namespace phasetip
