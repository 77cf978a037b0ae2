#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phasetip/subject.hpp"

namespace phasetip {

inline constexpr std::string_view kDatasetHeader =
    "subject_id,arm,pfs_months,event,mono_start_months,cutoff_months,stratum";

// One rejected row. `row` counts data rows from 1 (the header is row 0).
struct Diagnostic {
  std::size_t row = 0;
  std::string field;
  std::string message;

  std::string to_string() const;
};

struct DatasetReadResult {
  std::vector<SubjectRecord> records;
  std::vector<Diagnostic> diagnostics;
};

enum class ReadMode {
  Strict,   // throw DataError on the first bad row
  Lenient,  // skip bad rows and collect every diagnostic
};

DatasetReadResult read_dataset(std::istream& in, ReadMode mode = ReadMode::Strict);
DatasetReadResult read_dataset(const std::filesystem::path& path, ReadMode mode = ReadMode::Strict);

void write_dataset(std::ostream& out, std::span<const SubjectRecord> records);
void write_dataset(const std::filesystem::path& path, std::span<const SubjectRecord> records);

// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

}  // namespace phasetip
