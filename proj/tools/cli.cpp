#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

#include <CLI11.hpp>

#include "phasetip/dataset_io.hpp"
#include "phasetip/errors.hpp"
#include "phasetip/report.hpp"
#include "phasetip/tipping.hpp"
#include "phasetip/trial_sim.hpp"

namespace phasetip::cli {
namespace {

struct DataOptions {
  std::string path;
  bool lenient = false;
};

struct EstimatorOptions {
  PValueSource p_source = PValueSource::LogRank;
  Ties ties = Ties::Efron;
  bool stratified = false;

  AnalysisOptions analysis() const { return {p_source, ties, stratified}; }
};

const std::map<std::string, PValueSource> kPSources{{"logrank", PValueSource::LogRank},
                                                    {"cox", PValueSource::CoxWald}};
const std::map<std::string, Ties> kTies{{"efron", Ties::Efron}, {"breslow", Ties::Breslow}};
const std::map<std::string, CensoringImputation> kImputations{
    {"auto", CensoringImputation::Auto},
    {"cutoff", CensoringImputation::Cutoff},
    {"fitted", CensoringImputation::Fitted}};
const std::map<std::string, CensoringFamily> kFamilies{{"exponential", CensoringFamily::Exponential},
                                                       {"km", CensoringFamily::KaplanMeier}};
const std::map<std::string, Method> kMethods{{"proper", Method::Proper}, {"naive", Method::Naive}};

void add_data_options(CLI::App& app, DataOptions& o) {
  app.add_option("--data", o.path, "Subject-level CSV dataset")->required();
  app.add_flag("--lenient", o.lenient, "Skip invalid rows instead of failing");
}

void add_estimator_options(CLI::App& app, EstimatorOptions& o) {
  app.add_option("--p-source", o.p_source, "Test behind the p-value")
      ->transform(CLI::CheckedTransformer(kPSources, CLI::ignore_case));
  app.add_option("--ties", o.ties, "Cox tie handling")
      ->transform(CLI::CheckedTransformer(kTies, CLI::ignore_case));
  app.add_flag("--stratified", o.stratified, "Stratify tests and models by the stratum column");
}

// Config entries become `--key=value` tokens placed right after the
// subcommand, so flags typed later on the command line win.
std::vector<std::string> expand_config(std::span<const std::string> args,
                                       const std::vector<std::string>& subcommands) {
  std::vector<std::string> result(args.begin(), args.end());
  const auto sub = std::find_first_of(result.begin(), result.end(), subcommands.begin(),
                                      subcommands.end());
  if (sub == result.end()) return result;
  std::string path;
  for (auto it = sub; it != result.end(); ++it) {
    if (*it == "--config" && it + 1 != result.end()) path = *(it + 1);
    if (it->rfind("--config=", 0) == 0) path = it->substr(9);
  }
  if (path.empty()) return result;
  std::ifstream in(path);
  if (!in) throw CLI::FileError::Missing(path);
  std::vector<std::string> injected;
  for (const auto& item : CLI::ConfigINI().from_config(in)) {
    if (!item.parents.empty() && item.parents != std::vector<std::string>{*sub}) continue;
    if (item.name == "++" || item.name == "--" || item.inputs.empty()) continue;
    std::string key = item.name;
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config") continue;
    const std::string& value = item.inputs.front();
    if (value == "true") {
      injected.push_back("--" + key);
    } else if (value != "false") {
      injected.push_back("--" + key + "=" + value);
    }
  }
  result.insert(sub + 1, injected.begin(), injected.end());
  return result;
}

void add_seed_option(CLI::App& app, std::uint64_t& seed) {
  app.add_option("--seed", seed, "Random seed")->envname("PHASETIP_SEED");
}

std::vector<SubjectRecord> load(const DataOptions& o, std::ostream& err) {
  auto result = read_dataset(std::filesystem::path(o.path),
                             o.lenient ? ReadMode::Lenient : ReadMode::Strict);
  for (const auto& d : result.diagnostics) err << "skipped " << d.to_string() << '\n';
  if (result.records.empty()) throw DataError("no valid subjects in '" + o.path + "'");
  return std::move(result.records);
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string hr_text(double hr, const ConfidenceInterval& ci) {
  return fixed(hr, 3) + " (" + fixed(ci.lower, 3) + ", " + fixed(ci.upper, 3) + ")";
}

std::string median_text(const std::optional<double>& m) { return m ? fixed(*m, 1) : "NR"; }

void print_analysis(std::ostream& out, std::span<const SubjectRecord> data,
                    const PrimaryAnalysis& a, PValueSource source) {
  int mono_e = 0, mono_c = 0;
  for (const auto& r : data) {
    if (r.has_mono_phase()) ++(r.arm == Arm::Experimental ? mono_e : mono_c);
  }
  out << std::left << std::setw(14) << "Arm" << std::right << std::setw(6) << "N" << std::setw(8)
      << "Events" << std::setw(10) << "Censored" << std::setw(8) << "Mono" << std::setw(16)
      << "Median (months)" << '\n';
  const auto row = [&](std::string_view name, const PrimaryAnalysis::ArmSummary& s, int mono) {
    out << std::left << std::setw(14) << name << std::right << std::setw(6) << s.n << std::setw(8)
        << s.events << std::setw(10) << s.censored << std::setw(8) << mono << std::setw(16)
        << median_text(s.median) << '\n';
  };
  row("Experimental", a.experimental, mono_e);
  row("Control", a.control, mono_c);
  out << '\n';
  out << "Log-rank chi2 " << fixed(a.logrank.chi2, 3) << ", p = " << std::setprecision(4)
      << a.logrank.p_two_sided << '\n';
  out << "Treatment p (" << (source == PValueSource::LogRank ? "log-rank" : "Cox Wald")
      << ") = " << std::setprecision(4) << a.p_value << '\n';
  out << "Overall HR (E vs C)        " << hr_text(a.hr_overall, a.ci_overall) << '\n';
  out << "Combination-phase HR       " << hr_text(a.phases.hr_combo, a.phases.ci_combo) << '\n';
  if (a.phases.hr_mono) {
    out << "Monotherapy-phase HR       " << hr_text(*a.phases.hr_mono, *a.phases.ci_mono) << '\n';
  } else {
    out << "Monotherapy-phase HR       not estimable (no mono phase)\n";
  }
}

void write_analysis_csv(const std::filesystem::path& dir, const PrimaryAnalysis& a) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto path = dir / "analysis.csv";
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  const auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : ""; };
  out << "statistic,value\n";
  for (const auto& [name, s] : {std::pair{"experimental", a.experimental}, {"control", a.control}}) {
    out << "n_" << name << ',' << s.n << '\n';
    out << "events_" << name << ',' << s.events << '\n';
    out << "censored_" << name << ',' << s.censored << '\n';
    out << "median_" << name << ',' << opt(s.median) << '\n';
  }
  out << "logrank_chi2," << format_number(a.logrank.chi2) << '\n';
  out << "logrank_p," << format_number(a.logrank.p_two_sided) << '\n';
  out << "p_value," << format_number(a.p_value) << '\n';
  out << "hr_overall," << format_number(a.hr_overall) << '\n';
  out << "hr_overall_lower," << format_number(a.ci_overall.lower) << '\n';
  out << "hr_overall_upper," << format_number(a.ci_overall.upper) << '\n';
  out << "hr_combo," << format_number(a.phases.hr_combo) << '\n';
  out << "hr_combo_lower," << format_number(a.phases.ci_combo.lower) << '\n';
  out << "hr_combo_upper," << format_number(a.phases.ci_combo.upper) << '\n';
  out << "hr_mono," << opt(a.phases.hr_mono) << '\n';
  out << "hr_mono_lower,"
      << (a.phases.ci_mono ? format_number(a.phases.ci_mono->lower) : "") << '\n';
  out << "hr_mono_upper,"
      << (a.phases.ci_mono ? format_number(a.phases.ci_mono->upper) : "") << '\n';
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

std::vector<Effect> effects_for(const std::string& choice) {
  if (choice == "1") return {Effect::Effect1};
  if (choice == "2") return {Effect::Effect2};
  return {Effect::Effect1, Effect::Effect2};
}

std::vector<Threshold> thresholds_for(const std::string& choice) {
  if (choice == "a") return {Threshold::A_significance};
  if (choice == "b") return {Threshold::B_neutralize};
  return {Threshold::A_significance, Threshold::B_neutralize};
}

struct SearchOptions {
  std::uint64_t seed = 0;
  int replicates = 20;
  double grid_step = 0.01;
  double grid_max = 10.0;
  double grid_min = 0.01;
  double alpha_level = 0.05;
  double bisection_tol = 1e-3;
  double neutralization_tol = 0.01;
  CensoringImputation imputation = CensoringImputation::Auto;
  CensoringFamily family = CensoringFamily::Exponential;
  Method method = Method::Proper;
  unsigned threads = 0;
};

void add_search_options(CLI::App& app, SearchOptions& o) {
  add_seed_option(app, o.seed);
  app.add_option("--grid-step", o.grid_step, "Grid spacing of the adjustment factor")
      ->check(CLI::PositiveNumber);
  app.add_option("--imputation", o.imputation, "Censoring-time imputation for Effect 1")
      ->transform(CLI::CheckedTransformer(kImputations, CLI::ignore_case));
  app.add_option("--censoring-family", o.family, "Fitted censoring distribution")
      ->transform(CLI::CheckedTransformer(kFamilies, CLI::ignore_case));
  app.add_option("--alpha", o.alpha_level, "Two-sided significance level")
      ->check(CLI::Range(0.0, 1.0));
}

SearchConfig make_config(const SearchOptions& o, const EstimatorOptions& e, Effect effect,
                         Threshold threshold) {
  SearchConfig c;
  c.effect = effect;
  c.threshold = threshold;
  c.method = o.method;
  c.alpha_level = o.alpha_level;
  c.grid_step = o.grid_step;
  c.grid_bound = effect == Effect::Effect1 ? o.grid_max : o.grid_min;
  c.bisection_tol = o.bisection_tol;
  c.neutralization_tol = o.neutralization_tol;
  c.replicates = o.replicates;
  c.seed = o.seed;
  c.analysis = e.analysis();
  c.imputation = {o.imputation, o.family};
  c.threads = o.threads;
  c.validate();
  return c;
}

int run_analyze(const DataOptions& d, const EstimatorOptions& e, const std::string& out_dir,
                std::ostream& out, std::ostream& err) {
  const auto data = load(d, err);
  const auto a = analyze(data, e.analysis());
  print_analysis(out, data, a, e.p_source);
  if (!out_dir.empty()) write_analysis_csv(out_dir, a);
  return kOk;
}

int run_tpa(const DataOptions& d, const EstimatorOptions& e, const SearchOptions& s,
            const std::string& effect, const std::string& threshold, const std::string& out_dir,
            std::ostream& out, std::ostream& err) {
  const auto data = load(d, err);
  std::vector<SearchConfig> configs;
  for (auto ef : effects_for(effect)) {
    for (auto th : thresholds_for(threshold)) configs.push_back(make_config(s, e, ef, th));
  }
  std::vector<TpaResult> results;
  for (const auto& c : configs) {
    try {
      results.push_back(find_tipping(data, c));
    } catch (const DataError& ex) {
      // A dataset without a mono phase cannot be neutralized; report the
      // row as untipped when other searches were requested alongside it.
      if (configs.size() == 1) throw;
      err << "effect " << effect_label(c.effect) << " threshold " << threshold_label(c.threshold)
          << ": " << ex.what() << '\n';
      TpaResult r;
      r.effect = c.effect;
      r.threshold = c.threshold;
      r.method = c.method;
      r.flags.push_back(ex.what());
      results.push_back(std::move(r));
    }
  }
  if (out_dir.empty()) {
    write_results_csv(out, results);
  } else {
    for (const auto& p : emit_results(out_dir, results, {})) out << p.string() << '\n';
  }
  return kOk;
}

int run_curve(const DataOptions& d, const EstimatorOptions& e, const SearchOptions& s,
              const std::string& effect, const std::string& threshold,
              std::optional<double> grid_min, std::optional<double> grid_max,
              const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const auto data = load(d, err);
  const Effect ef = effect == "2" ? Effect::Effect2 : Effect::Effect1;
  const Threshold th = threshold == "b" ? Threshold::B_neutralize : Threshold::A_significance;
  const double lo = grid_min.value_or(ef == Effect::Effect1 ? 1.0 : 0.3);
  const double hi = grid_max.value_or(ef == Effect::Effect1 ? 3.0 : 1.0);
  if (!(lo <= hi)) throw std::invalid_argument("--grid-min must not exceed --grid-max");
  SearchConfig c = make_config(s, e, ef, th);
  // Effect 1 walks up from the low end, Effect 2 down from the high end.
  const auto gammas = ef == Effect::Effect1 ? make_grid(lo, hi, s.grid_step)
                                            : make_grid(hi, lo, s.grid_step);
  CurveOutput curve{ef, th, s.alpha_level, grid_scan(data, c, gammas)};
  if (out_dir.empty()) {
    write_curve_csv(out, curve.points);
  } else {
    for (const auto& p : emit_results(out_dir, {}, {&curve, 1})) out << p.string() << '\n';
  }
  return kOk;
}

int run_simulate(const SimConfig& config, std::uint64_t seed, const std::string& out_path,
                 std::ostream& out) {
  config.validate();
  const auto data = simulate_trial(config, seed);
  if (out_path.empty()) {
    write_dataset(out, data);
  } else {
    write_dataset(std::filesystem::path(out_path), data);
  }
  return kOk;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tipping-point analysis for two-phase survival trials", "phasetip"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  DataOptions data;
  EstimatorOptions est;
  SearchOptions search;
  std::string out_dir;
  std::string effect = "all";
  std::string threshold = "all";

  auto* analyze_cmd = app.add_subcommand("analyze", "KM medians, log-rank test and hazard ratios");
  analyze_cmd->add_option("--config", "key=value file with option defaults");
  add_data_options(*analyze_cmd, data);
  add_estimator_options(*analyze_cmd, est);
  analyze_cmd->add_option("--out", out_dir, "Directory for analysis.csv");

  auto* tpa_cmd = app.add_subcommand("tpa", "Tipping-point search");
  tpa_cmd->add_option("--config", "key=value file with option defaults");
  add_data_options(*tpa_cmd, data);
  add_estimator_options(*tpa_cmd, est);
  add_search_options(*tpa_cmd, search);
  tpa_cmd->add_option("--effect", effect, "1, 2 or all")
      ->check(CLI::IsMember({"1", "2", "all"}));
  tpa_cmd->add_option("--threshold", threshold, "a (significance), b (neutralization) or all")
      ->check(CLI::IsMember({"a", "b", "all"}, CLI::ignore_case));
  tpa_cmd->add_option("--replicates", search.replicates, "Multiple-imputation replicates")
      ->check(CLI::PositiveNumber);
  tpa_cmd->add_option("--method", search.method, "proper or naive")
      ->transform(CLI::CheckedTransformer(kMethods, CLI::ignore_case));
  tpa_cmd->add_option("--grid-max", search.grid_max, "Upper search bound for Effect 1");
  tpa_cmd->add_option("--grid-min", search.grid_min, "Lower search bound for Effect 2");
  tpa_cmd->add_option("--bisection-tol", search.bisection_tol, "Bisection tolerance")
      ->check(CLI::PositiveNumber);
  tpa_cmd->add_option("--neutralization-tol", search.neutralization_tol,
                      "Allowed |mono HR - 1| at a threshold-b tip")
      ->check(CLI::PositiveNumber);
  tpa_cmd->add_option("--threads", search.threads, "Worker threads (0 = all cores)");
  tpa_cmd->add_option("--out", out_dir, "Directory for results.csv (default: stdout)");

  std::optional<double> curve_min, curve_max;
  auto* curve_cmd = app.add_subcommand("curve", "p-value or mono-phase HR over a grid");
  curve_cmd->add_option("--config", "key=value file with option defaults");
  add_data_options(*curve_cmd, data);
  add_estimator_options(*curve_cmd, est);
  add_search_options(*curve_cmd, search);
  curve_cmd->add_option("--effect", effect, "1 or 2")->check(CLI::IsMember({"1", "2"}));
  curve_cmd->add_option("--threshold", threshold, "a or b")
      ->check(CLI::IsMember({"a", "b"}, CLI::ignore_case));
  curve_cmd->add_option("--grid-min", curve_min, "Lowest factor (default 1 or 0.3)");
  curve_cmd->add_option("--grid-max", curve_max, "Highest factor (default 3 or 1)");
  curve_cmd->add_option("--out", out_dir, "Directory for the curve CSV and SVG (default: stdout)");

  SimConfig sim;
  std::uint64_t sim_seed = 0;
  std::string sim_out;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a calibrated two-phase trial");
  sim_cmd->add_option("--config", "key=value file with option defaults");
  add_seed_option(*sim_cmd, sim_seed);
  sim_cmd->add_option("--n-experimental", sim.n_experimental, "Experimental-arm size");
  sim_cmd->add_option("--n-control", sim.n_control, "Control-arm size");
  sim_cmd->add_option("--hr-combo", sim.hr_combo, "Combination-phase hazard ratio");
  sim_cmd->add_option("--hr-mono", sim.hr_mono, "Monotherapy-phase hazard ratio");
  sim_cmd->add_option("--strata", sim.n_strata, "Number of strata (0 = none)");
  sim_cmd->add_option("--out", sim_out, "Output CSV (default: stdout)");

  try {
    const auto expanded = expand_config(args, {"analyze", "tpa", "curve", "simulate"});
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  if (curve_cmd->parsed() && threshold == "all") threshold = "a";
  if (curve_cmd->parsed() && effect == "all") effect = "1";
  std::transform(threshold.begin(), threshold.end(), threshold.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

  try {
    if (analyze_cmd->parsed()) return run_analyze(data, est, out_dir, out, err);
    if (tpa_cmd->parsed()) return run_tpa(data, est, search, effect, threshold, out_dir, out, err);
    if (curve_cmd->parsed()) {
      return run_curve(data, est, search, effect, threshold, curve_min, curve_max, out_dir, out,
                       err);
    }
    return run_simulate(sim, sim_seed, sim_out, out);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace phasetip::cli
