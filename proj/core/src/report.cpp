#include "phasetip/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "phasetip/dataset_io.hpp"
#include "phasetip/errors.hpp"

namespace phasetip {
namespace {

double plotted_value(const TpaCurvePoint& p, Threshold threshold) {
  return threshold == Threshold::A_significance ? p.p_two_sided : p.hr_mono.value_or(NAN);
}

double reference_level(Threshold threshold, double alpha_level) {
  return threshold == Threshold::A_significance ? alpha_level : 1.0;
}

std::vector<std::pair<double, double>> plotted(std::span<const TpaCurvePoint> points,
                                               Threshold threshold) {
  std::vector<std::pair<double, double>> xy;
  for (const auto& p : points) {
    const double v = plotted_value(p, threshold);
    if (p.evaluable && std::isfinite(v)) xy.emplace_back(p.gamma, v);
  }
  return xy;
}

std::string csv_flags(const std::vector<std::string>& flags) {
  std::string joined;
  for (const auto& f : flags) {
    if (!joined.empty()) joined += "; ";
    joined += f;
  }
  std::replace(joined.begin(), joined.end(), ',', ' ');
  std::replace(joined.begin(), joined.end(), '"', '\'');
  return joined;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

std::string effect_label(Effect effect) { return effect == Effect::Effect1 ? "1" : "2"; }

std::string threshold_label(Threshold threshold) {
  return threshold == Threshold::A_significance ? "a" : "b";
}

std::string effect_method_label(const TpaResult& r) {
  std::string label = "Effect " + effect_label(r.effect) + " / ";
  if (r.threshold == Threshold::B_neutralize) return label + "TPACE method (alpha)";
  return label + (r.method == Method::Naive ? "Naive variant" : "Proper counterfactuals");
}

void write_results_csv(std::ostream& out, std::span<const TpaResult> results) {
  out << kResultsHeader << '\n';
  for (const auto& r : results) {
    const auto& s = r.summary;
    const bool tipped = r.tip_value.has_value();
    std::optional<double> mono_median;
    {
      std::vector<double> monos;
      for (const auto& rep : r.replicates) {
        if (rep.tip && rep.hr_mono_at_tip) monos.push_back(*rep.hr_mono_at_tip);
      }
      if (!monos.empty()) {
        std::sort(monos.begin(), monos.end());
        const std::size_t n = monos.size();
        mono_median = n % 2 ? monos[n / 2] : 0.5 * (monos[n / 2 - 1] + monos[n / 2]);
      }
    }
    out << effect_method_label(r) << ',' << threshold_label(r.threshold) << ','
        << (tipped ? format_number(*r.tip_value) : "") << ','
        << (tipped ? format_number(r.n_events_at_tip) : "") << ','
        << (tipped ? format_number(r.hr_at_tip) : "") << ','
        << (tipped ? format_number(r.p_at_tip) : "") << ','
        << (mono_median ? format_number(*mono_median) : "") << ','
        << (tipped ? format_number(s.tip_min) : "") << ','
        << (tipped ? format_number(s.tip_max) : "") << ','
        << (tipped ? format_number(s.tip_sd) : "") << ',' << s.n_replicates << ','
        << s.n_with_tip << ',' << s.n_flagged << ',' << csv_flags(r.flags) << '\n';
  }
}

void write_curve_csv(std::ostream& out, std::span<const TpaCurvePoint> points) {
  out << kCurveHeader << '\n';
  for (const auto& p : points) {
    out << format_number(p.gamma) << ',';
    if (p.evaluable) {
      out << format_number(p.p_two_sided) << ',' << format_number(p.hr_overall);
    } else {
      out << ',';
    }
    out << ',' << (p.evaluable && p.hr_mono ? format_number(*p.hr_mono) : "") << ','
        << p.n_events << '\n';
  }
}

int count_crossings(std::span<const TpaCurvePoint> points, Threshold threshold,
                    double alpha_level) {
  const auto xy = plotted(points, threshold);
  const double ref = reference_level(threshold, alpha_level);
  const auto above = [&](double v) {
    return threshold == Threshold::A_significance ? v > ref : v >= ref;
  };
  int n = 0;
  for (std::size_t i = 1; i < xy.size(); ++i) n += above(xy[i - 1].second) != above(xy[i].second);
  return n;
}

std::string render_curve_svg(std::span<const TpaCurvePoint> points, Effect effect,
                             Threshold threshold, double alpha_level) {
  constexpr double kWidth = 640, kHeight = 400;
  constexpr double kLeft = 70, kRight = 20, kTop = 30, kBottom = 50;
  const auto xy = plotted(points, threshold);
  const double ref = reference_level(threshold, alpha_level);

  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  if (!xy.empty()) {
    x_min = x_max = xy.front().first;
    y_min = y_max = ref;
    for (const auto& [x, y] : xy) {
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
    if (x_max == x_min) x_max = x_min + 1.0;
    const double pad = 0.05 * (y_max - y_min > 0 ? y_max - y_min : 1.0);
    y_min = threshold == Threshold::A_significance ? 0.0 : y_min - pad;
    y_max += pad;
  }
  const auto px = [&](double x) {
    return kLeft + (x - x_min) / (x_max - x_min) * (kWidth - kLeft - kRight);
  };
  const auto py = [&](double y) {
    return kTop + (y_max - y) / (y_max - y_min) * (kHeight - kTop - kBottom);
  };

  const std::string factor = threshold == Threshold::A_significance ? "gamma" : "alpha";
  const std::string arm = effect == Effect::Effect1 ? "C" : "E";
  const std::string y_label =
      threshold == Threshold::A_significance ? "two-sided p-value" : "mono-phase hazard ratio";

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
      << "Effect " << effect_label(effect) << ", threshold " << threshold_label(threshold)
      << "</text>\n";
  svg << "<line class=\"axis\" x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\""
      << kWidth - kRight << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  svg << "<line class=\"axis\" x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
      << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">" << factor << "_" << arm << "</text>\n";
  svg << "<text x=\"16\" y=\"" << kHeight / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 "
      << kHeight / 2 << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
  for (double x : {x_min, x_max}) {
    svg << "<text x=\"" << px(x) << "\" y=\"" << kHeight - kBottom + 16
        << "\" text-anchor=\"middle\" font-size=\"10\">" << format_number(x) << "</text>\n";
  }
  for (double y : {y_min, y_max}) {
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(y) + 4
        << "\" text-anchor=\"end\" font-size=\"10\">" << format_number(std::round(y * 1e3) / 1e3)
        << "</text>\n";
  }

  svg << "<line class=\"reference\" x1=\"" << kLeft << "\" y1=\"" << py(ref) << "\" x2=\""
      << kWidth - kRight << "\" y2=\"" << py(ref)
      << "\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n";

  svg << "<polyline class=\"curve\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < xy.size(); ++i) {
    svg << (i ? " " : "") << px(xy[i].first) << ',' << py(xy[i].second);
  }
  svg << "\"/>\n";

  const auto above = [&](double v) {
    return threshold == Threshold::A_significance ? v > ref : v >= ref;
  };
  for (std::size_t i = 1; i < xy.size(); ++i) {
    const auto [x0, y0] = xy[i - 1];
    const auto [x1, y1] = xy[i];
    if (above(y0) == above(y1)) continue;
    const double t = y1 != y0 ? (ref - y0) / (y1 - y0) : 0.0;
    const double xc = x0 + std::clamp(t, 0.0, 1.0) * (x1 - x0);
    svg << "<circle class=\"crossing\" cx=\"" << px(xc) << "\" cy=\"" << py(ref)
        << "\" r=\"5\" fill=\"none\" stroke=\"firebrick\" stroke-width=\"2\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::filesystem::path> emit_results(const std::filesystem::path& out_dir,
                                                std::span<const TpaResult> results,
                                                std::span<const CurveOutput> curves) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw DataError("cannot create output directory '" + out_dir.string() + "'");
  }
  std::vector<std::filesystem::path> written;
  if (!results.empty()) {
    const auto path = out_dir / "results.csv";
    auto out = open_output(path);
    write_results_csv(out, results);
    written.push_back(path);
  }
  for (const auto& c : curves) {
    const std::string stem = "curve_" + effect_label(c.effect) + "_" + threshold_label(c.threshold);
    const auto csv = out_dir / (stem + ".csv");
    auto out = open_output(csv);
    write_curve_csv(out, c.points);
    written.push_back(csv);
    if (c.points.empty()) continue;
    const auto svg_path = out_dir / (stem + ".svg");
    auto svg = open_output(svg_path);
    svg << render_curve_svg(c.points, c.effect, c.threshold, c.alpha_level);
    written.push_back(svg_path);
  }
  return written;
}

}  // namespace phasetip
