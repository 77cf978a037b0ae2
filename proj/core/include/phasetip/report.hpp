#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "phasetip/tipping.hpp"

namespace phasetip {

// Tip summary columns first, MI spread after.
inline constexpr std::string_view kResultsHeader =
    "effect_method,threshold,adjustment_factor_at_tip,avg_events_at_tip,hr_at_tip,p_at_tip,"
    "hr_mono_at_tip,tip_min,tip_max,tip_sd,replicates,replicates_with_tip,replicates_flagged,"
    "flags";

inline constexpr std::string_view kCurveHeader = "gamma,p,hr_overall,hr_mono,n_events";

std::string effect_label(Effect effect);        // "1" / "2"
std::string threshold_label(Threshold threshold);  // "a" / "b"
std::string effect_method_label(const TpaResult& result);

void write_results_csv(std::ostream& out, std::span<const TpaResult> results);
void write_curve_csv(std::ostream& out, std::span<const TpaCurvePoint> points);

// Line plot of p (threshold a) or mono-phase HR (threshold b) against the
// adjustment factor, with a horizontal reference at alpha_level or 1 and a
// marker at every crossing of it.
std::string render_curve_svg(std::span<const TpaCurvePoint> points, Effect effect,
                             Threshold threshold, double alpha_level = 0.05);

// Number of times consecutive evaluable points straddle the reference.
int count_crossings(std::span<const TpaCurvePoint> points, Threshold threshold,
                    double alpha_level = 0.05);

struct CurveOutput {
  Effect effect = Effect::Effect1;
  Threshold threshold = Threshold::A_significance;
  double alpha_level = 0.05;
  std::vector<TpaCurvePoint> points;
};

// Writes results.csv (when `results` is non-empty) and, per curve,
// curve_<effect>_<threshold>.csv plus an .svg when the curve has points.
// Returns the written paths. Throws DataError when out_dir is unwritable.
std::vector<std::filesystem::path> emit_results(const std::filesystem::path& out_dir,
                                                std::span<const TpaResult> results,
                                                std::span<const CurveOutput> curves);

}  // namespace phasetip
