#include "phasetip/tipping.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "phasetip/errors.hpp"

namespace phasetip {
namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
// written to per-index slots; the first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::jthread> workers;
  for (unsigned w = 0; w < threads; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  workers.clear();
  if (error) std::rethrow_exception(error);
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string format_gamma(double g) {
  std::ostringstream os;
  os << g;
  return os.str();
}

Arm transformed_arm(Effect effect) {
  return effect == Effect::Effect1 ? Arm::Control : Arm::Experimental;
}

// What a search step needs from a point. Full evaluation is reserved for
// the tip itself.
enum class Need { PValue, MonoHr };

struct Probe {
  bool evaluable = true;
  double value = 0.0;
  std::string message;
};

}  // namespace

//---------------------------------------------------------------------------//
// Primary analysis
//---------------------------------------------------------------------------//

double treatment_p_value(std::span<const SubjectRecord> records, const AnalysisOptions& options) {
  if (options.p_source == PValueSource::LogRank) {
    return logrank_test(records, options.stratified).p_two_sided;
  }
  const auto fit = cox_treatment_fit(records, options.ties, options.stratified);
  const double z = fit.coefs[0] / fit.se[0];
  return chi2_1df_upper(z * z);
}

PrimaryAnalysis analyze(std::span<const SubjectRecord> records, const AnalysisOptions& options) {
  if (records.empty()) throw DataError("no subjects");
  PrimaryAnalysis out;
  for (const auto& r : records) {
    auto& arm = r.arm == Arm::Experimental ? out.experimental : out.control;
    ++arm.n;
    arm.events += r.delta;
    arm.censored += 1 - r.delta;
  }
  if (out.experimental.n > 0) out.experimental.median = km_estimate(records, Arm::Experimental).median;
  if (out.control.n > 0) out.control.median = km_estimate(records, Arm::Control).median;

  out.logrank = logrank_test(records, options.stratified);
  out.overall = cox_treatment_fit(records, options.ties, options.stratified);
  out.hr_overall = out.overall.hr("trt");
  out.ci_overall = wald_ci(out.overall.coefs[0], out.overall.se[0]);
  if (options.p_source == PValueSource::LogRank) {
    out.p_value = out.logrank.p_two_sided;
  } else {
    const double z = out.overall.coefs[0] / out.overall.se[0];
    out.p_value = chi2_1df_upper(z * z);
  }
  out.phases = phase_hr(records, options.ties, options.stratified);
  return out;
}

//---------------------------------------------------------------------------//
// Configuration
//---------------------------------------------------------------------------//

double SearchConfig::bound() const noexcept {
  if (grid_bound) return *grid_bound;
  return effect == Effect::Effect1 ? 10.0 : 0.01;
}

double SearchConfig::direction() const noexcept {
  return effect == Effect::Effect1 ? 1.0 : -1.0;
}

void SearchConfig::validate() const {
  if (!(grid_step > 0.0)) throw std::invalid_argument("grid step must be positive");
  if (!(alpha_level > 0.0 && alpha_level < 1.0)) {
    throw std::invalid_argument("alpha level must lie in (0, 1)");
  }
  if (replicates < 1) throw std::invalid_argument("at least one replicate is required");
  if (!(bisection_tol > 0.0)) throw std::invalid_argument("bisection tolerance must be positive");
  if (!(neutralization_tol > 0.0)) {
    throw std::invalid_argument("neutralization tolerance must be positive");
  }
  check_gamma(effect, grid_start);
  check_gamma(effect, bound());
  if ((bound() - grid_start) * direction() < 0.0) {
    throw std::invalid_argument("grid bound lies on the wrong side of the start");
  }
}

std::vector<double> make_grid(double start, double bound, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("grid step must be positive");
  const double dir = bound >= start ? 1.0 : -1.0;
  const double span = std::abs(bound - start);
  const auto n = static_cast<std::size_t>(std::floor(span / step + 1e-9));
  std::vector<double> grid;
  grid.reserve(n + 2);
  for (std::size_t k = 0; k <= n; ++k) grid.push_back(start + dir * static_cast<double>(k) * step);
  if (std::abs(grid.back() - bound) > 1e-12) grid.push_back(bound);
  return grid;
}

//---------------------------------------------------------------------------//
// Point evaluation
//---------------------------------------------------------------------------//

std::vector<SubjectRecord> counterfactual_dataset(std::span<const SubjectRecord> records,
                                                  const TransformParams& params, Method method,
                                                  const ImputationDraws& draws) {
  if (method == Method::Naive) return naive_transform(records, params.effect, params.gamma);
  return apply_transform(records, params.effect, params.gamma, draws);
}

TpaCurvePoint evaluate_at(std::span<const SubjectRecord> records, const TransformParams& params,
                          const ImputationDraws& draws, const AnalysisOptions& options,
                          Method method) {
  TpaCurvePoint point;
  point.gamma = params.gamma;
  const auto cf = counterfactual_dataset(records, params, method, draws);
  point.n_events = static_cast<int>(count_events(cf));
  try {
    point.p_two_sided = treatment_p_value(cf, options);
    point.hr_overall = cox_treatment_fit(cf, options.ties, options.stratified).hr("trt");
    point.hr_mono = phase_hr(cf, options.ties, options.stratified).hr_mono;
  } catch (const NumericalError& e) {
    point.evaluable = false;
    point.message = e.what();
  } catch (const DataError& e) {
    point.evaluable = false;
    point.message = e.what();
  }
  return point;
}

namespace {

Probe probe(std::span<const SubjectRecord> records, const SearchConfig& config,
            const ImputationDraws& draws, double gamma, Need need) {
  Probe out;
  const TransformParams params{config.effect, gamma, config.threshold};
  const auto cf = counterfactual_dataset(records, params, config.method, draws);
  try {
    if (need == Need::PValue) {
      out.value = treatment_p_value(cf, config.analysis);
    } else {
      const auto phases = phase_hr(cf, config.analysis.ties, config.analysis.stratified);
      if (!phases.hr_mono) {
        out.evaluable = false;
        out.message = "mono-phase HR undefined";
      } else {
        out.value = *phases.hr_mono;
      }
    }
  } catch (const NumericalError& e) {
    out.evaluable = false;
    out.message = e.what();
  } catch (const DataError& e) {
    out.evaluable = false;
    out.message = e.what();
  }
  return out;
}

}  // namespace

//---------------------------------------------------------------------------//
// Search
//---------------------------------------------------------------------------//

ReplicateResult search_replicate(std::span<const SubjectRecord> records, const SearchConfig& config,
                                 const ImputationDraws& draws) {
  const bool threshold_a = config.threshold == Threshold::A_significance;
  const Need need = threshold_a ? Need::PValue : Need::MonoHr;
  const auto crossed = [&](double v) { return threshold_a ? v > config.alpha_level : v >= 1.0; };
  const auto neutral = [&](double v) { return std::abs(v - 1.0) <= config.neutralization_tol; };

  ReplicateResult rep;
  rep.replicate_id = draws.replicate_id;
  rep.imputation_fallbacks = draws.fallbacks;
  if (draws.fallbacks > 0) {
    rep.flags.push_back(std::to_string(draws.fallbacks) +
                        " censoring draws fell back to cutoff imputation");
  }

  const auto finish = [&](double tip) {
    const TransformParams params{config.effect, tip, config.threshold};
    const auto point = evaluate_at(records, params, draws, config.analysis, config.method);
    rep.tip = tip;
    rep.hr_at_tip = point.hr_overall;
    rep.p_at_tip = point.p_two_sided;
    rep.hr_mono_at_tip = point.hr_mono;
    rep.n_events_at_tip = point.n_events;
    if (!point.evaluable) rep.flags.push_back("tip not evaluable: " + point.message);
  };

  const double start = config.grid_start;
  const Probe first = probe(records, config, draws, start, need);
  if (!first.evaluable) throw NumericalError("primary analysis failed: " + first.message);
  if (crossed(first.value)) {
    rep.status = ReplicateStatus::AlreadyCrossed;
    rep.flags.push_back(threshold_a ? "already non-significant" : "mono-phase HR already >= 1");
    rep.bracket_inner = rep.bracket_outer = start;
    finish(start);
    return rep;
  }

  const auto grid = make_grid(start, config.bound(), config.grid_step);
  double inner = start;
  double inner_value = first.value;
  std::optional<double> outer;
  double outer_value = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const Probe pr = probe(records, config, draws, grid[k], need);
    if (!pr.evaluable) {
      rep.flags.push_back("skipped gamma=" + format_gamma(grid[k]) + ": " + pr.message);
      continue;
    }
    if (crossed(pr.value)) {
      outer = grid[k];
      outer_value = pr.value;
      break;
    }
    inner = grid[k];
    inner_value = pr.value;
  }
  if (!outer) {
    rep.status = ReplicateStatus::NoCrossing;
    rep.flags.push_back("no tipping point in range");
    rep.bracket_inner = rep.bracket_outer = inner;
    return rep;
  }

  rep.status = ReplicateStatus::Tipped;
  double out_g = *outer;
  double tip = out_g;
  bool settled = !threshold_a && neutral(outer_value);
  if (!settled && !threshold_a && neutral(inner_value)) {
    // The last non-crossing point already sits within tolerance of 1.
    tip = inner;
    settled = true;
  }
  while (!settled && std::abs(out_g - inner) > (threshold_a ? config.bisection_tol : 1e-9)) {
    const double mid = 0.5 * (inner + out_g);
    const Probe pr = probe(records, config, draws, mid, need);
    if (!pr.evaluable) {
      rep.flags.push_back("bisection stopped at unevaluable gamma=" + format_gamma(mid));
      break;
    }
    if (!threshold_a && neutral(pr.value)) {
      tip = mid;
      settled = true;
      break;
    }
    if (crossed(pr.value)) {
      out_g = mid;
    } else {
      inner = mid;
    }
  }
  if (threshold_a || !settled) tip = out_g;
  if (!threshold_a && !settled) rep.flags.push_back("neutralization tolerance not met");
  rep.bracket_inner = inner;
  rep.bracket_outer = out_g;
  finish(tip);
  return rep;
}

MiSummary mi_aggregate(std::span<const ReplicateResult> replicates) {
  MiSummary s;
  s.n_replicates = static_cast<int>(replicates.size());
  std::vector<double> tips, hrs, ps;
  double events = 0.0;
  for (const auto& r : replicates) {
    s.n_already_crossed += r.status == ReplicateStatus::AlreadyCrossed;
    s.n_no_crossing += r.status == ReplicateStatus::NoCrossing;
    s.n_flagged += !r.flags.empty();
    if (!r.tip) continue;
    tips.push_back(*r.tip);
    hrs.push_back(r.hr_at_tip);
    ps.push_back(r.p_at_tip);
    events += r.n_events_at_tip;
  }
  s.n_with_tip = static_cast<int>(tips.size());
  if (tips.empty()) return s;

  s.degenerate = s.n_already_crossed == s.n_with_tip;
  s.tip_median = median_of(tips);
  s.tip_min = *std::min_element(tips.begin(), tips.end());
  s.tip_max = *std::max_element(tips.begin(), tips.end());
  if (tips.size() > 1) {
    const double mean = std::accumulate(tips.begin(), tips.end(), 0.0) / tips.size();
    double ss = 0.0;
    for (double t : tips) ss += (t - mean) * (t - mean);
    s.tip_sd = std::sqrt(ss / (tips.size() - 1));
  }
  s.hr_at_tip_median = median_of(hrs);
  s.p_at_tip_median = median_of(ps);
  s.events_at_tip_mean = events / tips.size();
  return s;
}

namespace {

TpaResult run_search(std::span<const SubjectRecord> records, const SearchConfig& config) {
  config.validate();
  TpaResult result;
  result.effect = config.effect;
  result.threshold = config.threshold;
  result.method = config.method;

  if (config.threshold == Threshold::B_neutralize) {
    const Arm arm = transformed_arm(config.effect);
    const bool any_mono = std::any_of(records.begin(), records.end(), [&](const SubjectRecord& r) {
      return r.arm == arm && r.has_mono_phase();
    });
    if (!any_mono) throw DataError("no mono phase to neutralize");
  }

  // The naive rescaling draws nothing, so one replicate says it all.
  const int m = config.method == Method::Naive ? 1 : config.replicates;
  result.replicates.resize(static_cast<std::size_t>(m));
  parallel_for(static_cast<std::size_t>(m), config.threads, [&](std::size_t i) {
    ImputationDraws draws;
    draws.effect = config.effect;
    draws.seed = config.seed;
    draws.replicate_id = i;
    if (config.method == Method::Proper) {
      draws = draw_imputations(records, config.effect, config.seed, i, config.imputation);
    } else {
      draws.values.assign(records.size(), std::nullopt);
    }
    result.replicates[i] = search_replicate(records, config, draws);
  });

  result.summary = mi_aggregate(result.replicates);
  if (result.summary.tip_median) {
    result.tip_value = result.summary.tip_median;
    result.hr_at_tip = result.summary.hr_at_tip_median;
    result.p_at_tip = result.summary.p_at_tip_median;
    result.n_events_at_tip = result.summary.events_at_tip_mean;
  }
  if (result.summary.degenerate) result.flags.push_back("degenerate");
  if (result.summary.n_already_crossed > 0) {
    result.flags.push_back(config.threshold == Threshold::A_significance
                               ? "already non-significant"
                               : "mono-phase HR already >= 1");
  }
  if (result.summary.n_no_crossing > 0) {
    result.flags.push_back(std::to_string(result.summary.n_no_crossing) +
                           " replicates with no tipping point in range");
  }
  return result;
}

}  // namespace

TpaResult find_tipping_a(std::span<const SubjectRecord> records, SearchConfig config) {
  config.threshold = Threshold::A_significance;
  return run_search(records, config);
}

TpaResult find_tipping_b(std::span<const SubjectRecord> records, SearchConfig config) {
  config.threshold = Threshold::B_neutralize;
  return run_search(records, config);
}

TpaResult find_tipping(std::span<const SubjectRecord> records, const SearchConfig& config) {
  return config.threshold == Threshold::A_significance ? find_tipping_a(records, config)
                                                       : find_tipping_b(records, config);
}

std::vector<TpaCurvePoint> grid_scan(std::span<const SubjectRecord> records,
                                     const SearchConfig& config, std::span<const double> gammas) {
  ImputationDraws draws;
  draws.values.assign(records.size(), std::nullopt);
  if (config.method == Method::Proper) {
    draws = draw_imputations(records, config.effect, config.seed, 0, config.imputation);
  }
  std::vector<TpaCurvePoint> points(gammas.size());
  parallel_for(gammas.size(), config.threads, [&](std::size_t i) {
    const TransformParams params{config.effect, gammas[i], config.threshold};
    points[i] = evaluate_at(records, params, draws, config.analysis, config.method);
  });
  return points;
}

}  // namespace phasetip
