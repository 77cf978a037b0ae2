#include "phasetip/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "phasetip/errors.hpp"

namespace phasetip {
namespace {

constexpr std::size_t kColumns = 7;
constexpr std::string_view kColumnNames[kColumns] = {
    "subject_id", "arm", "pfs_months", "event", "mono_start_months", "cutoff_months", "stratum"};

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    cells.push_back(line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return cells;
}

std::optional<double> parse_double(std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) return std::nullopt;
  return v;
}

std::optional<int> parse_int(std::string_view text) {
  int v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) return std::nullopt;
  return v;
}

void check_header(std::string_view header) {
  if (header == kDatasetHeader) return;
  const auto cells = split(header);
  for (std::size_t i = 0; i < kColumns; ++i) {
    bool found = false;
    for (auto c : cells) found = found || c == kColumnNames[i];
    if (!found) throw DataError("row 0, header: missing column '" + std::string(kColumnNames[i]) + "'");
  }
  throw DataError("row 0, header: expected '" + std::string(kDatasetHeader) + "'");
}

std::optional<Diagnostic> parse_row(std::string_view line, std::size_t row, SubjectRecord& r) {
  const auto fail = [&](std::string_view field, std::string message) {
    return Diagnostic{row, std::string(field), std::move(message)};
  };
  const auto cells = split(line);
  if (cells.size() != kColumns) {
    return fail("row", "expected 7 fields, found " + std::to_string(cells.size()));
  }
  if (cells[0].empty()) return fail("subject_id", "empty subject id");
  r.subject_id = std::string(cells[0]);

  if (cells[1] == "E") {
    r.arm = Arm::Experimental;
  } else if (cells[1] == "C") {
    r.arm = Arm::Control;
  } else {
    return fail("arm", "arm must be E or C");
  }

  const auto s = parse_double(cells[2]);
  if (!s) return fail("pfs_months", "non-numeric time '" + std::string(cells[2]) + "'");
  r.s = *s;

  const auto event = parse_int(cells[3]);
  if (!event) return fail("event", "non-numeric event indicator");
  r.delta = *event;

  r.mono_start.reset();
  if (!cells[4].empty()) {
    const auto m = parse_double(cells[4]);
    if (!m) return fail("mono_start_months", "non-numeric time '" + std::string(cells[4]) + "'");
    r.mono_start = *m;
  }

  const auto cutoff = parse_double(cells[5]);
  if (!cutoff) return fail("cutoff_months", "non-numeric time '" + std::string(cells[5]) + "'");
  r.cutoff = *cutoff;

  r.stratum.reset();
  if (!cells[6].empty()) {
    const auto st = parse_int(cells[6]);
    if (!st) return fail("stratum", "stratum must be an integer");
    r.stratum = *st;
  }

  if (auto v = check_record(r)) return fail(v->field, v->message);
  return std::nullopt;
}

}  // namespace

std::string Diagnostic::to_string() const {
  return "row " + std::to_string(row) + ", field " + field + ": " + message;
}

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

DatasetReadResult read_dataset(std::istream& in, ReadMode mode) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("row 0, header: file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  check_header(line);

  DatasetReadResult result;
  std::set<std::string, std::less<>> seen;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++row;
    if (line.empty()) continue;
    SubjectRecord r;
    auto diag = parse_row(line, row, r);
    if (!diag && !seen.insert(r.subject_id).second) {
      diag = Diagnostic{row, "subject_id", "duplicate subject id '" + r.subject_id + "'"};
    }
    if (diag) {
      if (mode == ReadMode::Strict) throw DataError(diag->to_string());
      result.diagnostics.push_back(std::move(*diag));
      continue;
    }
    result.records.push_back(std::move(r));
  }
  return result;
}

DatasetReadResult read_dataset(const std::filesystem::path& path, ReadMode mode) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  return read_dataset(in, mode);
}

void write_dataset(std::ostream& out, std::span<const SubjectRecord> records) {
  out << kDatasetHeader << '\n';
  for (const auto& r : records) {
    if (r.subject_id.find_first_of(",\r\n") != std::string::npos) {
      throw DataError("subject id '" + r.subject_id + "' cannot be written to CSV");
    }
    out << r.subject_id << ',' << to_string(r.arm) << ',' << format_number(r.s) << ','
        << r.delta << ',' << (r.mono_start ? format_number(*r.mono_start) : "") << ','
        << format_number(r.cutoff) << ',' << (r.stratum ? std::to_string(*r.stratum) : "")
        << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, std::span<const SubjectRecord> records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset '" + path.string() + "'");
  write_dataset(out, records);
  if (!out) throw DataError("failed writing dataset '" + path.string() + "'");
}

}  // namespace phasetip
