#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

#include "builders.hpp"
#include "phasetip/dataset_io.hpp"
#include "phasetip/errors.hpp"
#include "phasetip/report.hpp"
#include "phasetip/trial_sim.hpp"

using namespace phasetip;
using builders::rec;
namespace fs = std::filesystem;

namespace {

const std::string kHeader(kDatasetHeader);

DatasetReadResult read_text(const std::string& text, ReadMode mode = ReadMode::Strict) {
  std::istringstream in(text);
  return read_dataset(in, mode);
}

std::string error_of(const std::string& text) {
  try {
    read_text(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("phasetip_io_" + name);
  fs::remove_all(dir);
  return dir;
}

std::vector<TpaCurvePoint> curve(std::initializer_list<std::pair<double, double>> gp) {
  std::vector<TpaCurvePoint> out;
  for (auto [g, p] : gp) {
    TpaCurvePoint pt;
    pt.gamma = g;
    pt.p_two_sided = p;
    pt.hr_overall = 0.8;
    pt.hr_mono = 0.5 * g;
    pt.n_events = 10;
    out.push_back(pt);
  }
  return out;
}

}  // namespace

TEST(ReadDataset, ThreeRows) {
  const auto r = read_text(kHeader +
                           "\nA,E,10.5,1,4,20,\n"
                           "B,C,3,0,,3,2\n"
                           "C,C,7,1,,30,\n");
  ASSERT_EQ(r.records.size(), 3u);
  EXPECT_TRUE(r.diagnostics.empty());
  EXPECT_EQ(r.records[0], rec("A", Arm::Experimental, 10.5, 1, 4.0, 20.0));
  EXPECT_EQ(r.records[1], rec("B", Arm::Control, 3, 0, std::nullopt, 3.0, 2));
  EXPECT_EQ(r.records[2].subject_id, "C");
}

TEST(ReadDataset, HeaderOnlyGivesEmptyDataset) {
  EXPECT_TRUE(read_text(kHeader + "\n").records.empty());
  EXPECT_TRUE(read_text(kHeader).records.empty());
}

TEST(ReadDataset, EmptyFileIsAnError) {
  EXPECT_NE(error_of("").find("row 0"), std::string::npos);
}

TEST(ReadDataset, MissingColumnIsNamed) {
  const auto msg = error_of("subject_id,arm,pfs_months,event,cutoff_months,stratum\n");
  EXPECT_NE(msg.find("mono_start_months"), std::string::npos) << msg;
}

TEST(ReadDataset, ReorderedHeaderRejected) {
  const auto msg = error_of("arm,subject_id,pfs_months,event,mono_start_months,cutoff_months,stratum\n");
  EXPECT_NE(msg.find("row 0"), std::string::npos) << msg;
}

TEST(ReadDataset, DiagnosticsNameRowAndField) {
  struct Case {
    std::string row;
    std::string field;
    std::string fragment;
  };
  const Case cases[] = {
      {"X,E,abc,1,,20,", "pfs_months", "non-numeric"},
      {"X,E,10,1,12,20,", "mono_start_months", "phase time exceeds follow-up"},
      {"X,E,25,1,,20,", "cutoff_months", "follow-up exceeds data cutoff"},
      {"X,Q,10,1,,20,", "arm", "E or C"},
      {"X,E,10,2,,20,", "event", ""},
      {"X,E,10,1,,20", "row", "expected 7 fields"},
      {"X,E,10,1,,20,one", "stratum", ""},
      {"X,E,-1,1,,20,", "pfs_months", ""},
  };
  for (const auto& c : cases) {
    const auto msg = error_of(kHeader + "\nOK,C,5,1,,9,\n" + c.row + "\n");
    EXPECT_NE(msg.find("row 2"), std::string::npos) << c.row << " -> " << msg;
    EXPECT_NE(msg.find("field " + c.field), std::string::npos) << c.row << " -> " << msg;
    EXPECT_NE(msg.find(c.fragment), std::string::npos) << c.row << " -> " << msg;
  }
}

TEST(ReadDataset, LenientCollectsEveryDiagnostic) {
  const auto r = read_text(kHeader +
                               "\nA,E,10,1,12,20,\n"
                               "B,C,5,1,,9,\n"
                               "C,C,x,1,,9,\n"
                               "D,C,50,0,,9,\n",
                           ReadMode::Lenient);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].subject_id, "B");
  ASSERT_EQ(r.diagnostics.size(), 3u);
  EXPECT_EQ(r.diagnostics[0].row, 1u);
  EXPECT_EQ(r.diagnostics[0].field, "mono_start_months");
  EXPECT_EQ(r.diagnostics[1].row, 3u);
  EXPECT_EQ(r.diagnostics[2].row, 4u);
  EXPECT_EQ(r.diagnostics[2].field, "cutoff_months");
}

TEST(ReadDataset, DuplicateIdsRejected) {
  const auto msg = error_of(kHeader + "\nA,E,10,1,,20,\nA,C,5,1,,9,\n");
  EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;
  EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
}

TEST(ReadDataset, CrlfLineEndings) {
  const auto r = read_text(kHeader + "\r\nA,E,10,1,,20,\r\nB,C,5,0,2,9,1\r\n");
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.records[1].stratum, 1);
  EXPECT_EQ(r.records[1].mono_start, 2.0);
}

TEST(ReadDataset, MissingFileIsDataError) {
  EXPECT_THROW(read_dataset(fs::path("/nonexistent/phasetip.csv")), DataError);
}

TEST(WriteDataset, RoundTripIsIdentity) {
  SimConfig c;
  c.n_strata = 2;
  auto d = simulate_trial(c, 21);
  d.push_back(rec("odd", Arm::Control, 0.1 + 0.2, 0, std::nullopt, 1.0 / 3.0));
  std::stringstream ss;
  write_dataset(ss, d);
  const auto back = read_dataset(ss).records;
  EXPECT_EQ(back, d);

  std::stringstream again;
  write_dataset(again, back);
  std::stringstream first;
  write_dataset(first, d);
  EXPECT_EQ(again.str(), first.str());
}

TEST(WriteDataset, EmptyMonoStartWrittenAsEmptyField) {
  std::stringstream ss;
  const std::vector<SubjectRecord> d{rec("A", Arm::Control, 2.5, 1)};
  write_dataset(ss, d);
  EXPECT_EQ(ss.str(), kHeader + "\nA,C,2.5,1,,100,\n");
}

TEST(WriteDataset, RejectsIdsThatBreakCsv) {
  std::stringstream ss;
  const std::vector<SubjectRecord> d{rec("A,B", Arm::Control, 2.5, 1)};
  EXPECT_THROW(write_dataset(ss, d), DataError);
}

TEST(FormatNumber, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(73.0), "73");
  for (double v : {0.1 + 0.2, 1.0 / 3.0, 1e-300, 12345.678}) {
    EXPECT_EQ(std::stod(format_number(v)), v);
  }
}

TEST(Report, ResultsHeaderCarriesTipColumns) {
  std::stringstream ss;
  write_results_csv(ss, {});
  std::string header;
  std::getline(ss, header);
  for (const char* col : {"effect_method", "adjustment_factor_at_tip", "avg_events_at_tip",
                          "hr_at_tip", "p_at_tip"}) {
    EXPECT_NE(header.find(col), std::string::npos) << col;
  }
  EXPECT_EQ(header, kResultsHeader);
}

TEST(Report, ResultsRowLayout) {
  TpaResult r;
  r.effect = Effect::Effect2;
  r.tip_value = 0.82;
  r.hr_at_tip = 0.811;
  r.p_at_tip = 0.0536;
  r.n_events_at_tip = 379;
  r.summary.tip_min = 0.8;
  r.summary.tip_max = 0.84;
  r.summary.tip_sd = 0.01;
  r.summary.n_replicates = 3;
  r.summary.n_with_tip = 3;
  r.flags = {"a, b", "c"};
  std::stringstream ss;
  write_results_csv(ss, std::span(&r, 1));
  std::string header, row;
  std::getline(ss, header);
  std::getline(ss, row);
  EXPECT_EQ(row,
            "Effect 2 / Proper counterfactuals,a,0.82,379,0.811,0.0536,,0.8,0.84,0.01,3,3,0,a  b; c");
}

TEST(Report, EmptyCurveWritesHeaderOnlyAndNoSvg) {
  const auto dir = scratch_dir("empty");
  const CurveOutput c{};
  const auto written = emit_results(dir, {}, std::span(&c, 1));
  ASSERT_EQ(written.size(), 1u);
  EXPECT_EQ(slurp(dir / "curve_1_a.csv"), std::string(kCurveHeader) + "\n");
  EXPECT_FALSE(fs::exists(dir / "curve_1_a.svg"));
  EXPECT_FALSE(fs::exists(dir / "results.csv"));
  fs::remove_all(dir);
}

TEST(Report, ThreePointCurveHasOnePolylineWithThreeVertices) {
  const auto pts = curve({{1.0, 0.01}, {1.5, 0.03}, {2.0, 0.2}});
  const auto svg = render_curve_svg(pts, Effect::Effect1, Threshold::A_significance);
  const std::regex polyline(R"re(<polyline[^>]*points="([^"]*)")re");
  const auto begin = std::sregex_iterator(svg.begin(), svg.end(), polyline);
  ASSERT_EQ(std::distance(begin, std::sregex_iterator()), 1);
  std::istringstream vertices((*begin)[1].str());
  int n = 0;
  for (std::string v; vertices >> v;) {
    EXPECT_NE(v.find(','), std::string::npos);
    ++n;
  }
  EXPECT_EQ(n, 3);
}

TEST(Report, CrossingMarkersMatchCount) {
  const auto pts = curve({{1.0, 0.01}, {1.2, 0.06}, {1.4, 0.04}, {1.6, 0.2}});
  EXPECT_EQ(count_crossings(pts, Threshold::A_significance), 3);
  const auto svg = render_curve_svg(pts, Effect::Effect1, Threshold::A_significance);
  std::size_t markers = 0;
  for (auto pos = svg.find("class=\"crossing\""); pos != std::string::npos;
       pos = svg.find("class=\"crossing\"", pos + 1)) {
    ++markers;
  }
  EXPECT_EQ(markers, 3u);
  // hr_mono = gamma / 2 reaches 1 once, at gamma = 2.
  const auto mono = curve({{1.0, 0.0}, {1.5, 0.0}, {2.5, 0.0}});
  EXPECT_EQ(count_crossings(mono, Threshold::B_neutralize), 1);
}

TEST(Report, UnevaluablePointsSkippedInPlotAndBlankInCsv) {
  auto pts = curve({{1.0, 0.01}, {1.1, 0.02}, {1.2, 0.1}});
  pts[1].evaluable = false;
  pts[1].message = "separation";
  EXPECT_EQ(count_crossings(pts, Threshold::A_significance), 1);
  std::stringstream ss;
  write_curve_csv(ss, pts);
  std::string line;
  std::getline(ss, line);
  std::getline(ss, line);
  std::getline(ss, line);
  EXPECT_EQ(line, "1.1,,,,10");
}

TEST(Report, EmitWritesFixedFileNames) {
  const auto dir = scratch_dir("emit");
  TpaResult r;
  const CurveOutput c{Effect::Effect2, Threshold::B_neutralize, 0.05,
                      curve({{1.0, 0.01}, {0.9, 0.02}})};
  const auto written = emit_results(dir, std::span(&r, 1), std::span(&c, 1));
  EXPECT_EQ(written.size(), 3u);
  EXPECT_TRUE(fs::exists(dir / "results.csv"));
  EXPECT_TRUE(fs::exists(dir / "curve_2_b.csv"));
  EXPECT_TRUE(fs::exists(dir / "curve_2_b.svg"));
  fs::remove_all(dir);
}

TEST(Report, UnwritableDirectoryIsDataError) {
  TpaResult r;
  EXPECT_THROW(emit_results("/proc/phasetip_nope", std::span(&r, 1), {}), DataError);
  const auto file = fs::temp_directory_path() / "phasetip_io_plain_file";
  std::ofstream(file) << "x";
  EXPECT_THROW(emit_results(file / "sub", std::span(&r, 1), {}), DataError);
  fs::remove(file);
}
