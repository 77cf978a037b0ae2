#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace phasetip {

enum class Arm { Experimental, Control };

std::string_view to_string(Arm arm) noexcept;

// One subject's observed PFS outcome. Times are months from randomization.
//
// `s` is min(event time, censoring time) and `delta` flags an observed
// event. `mono_start` is the time the subject entered the monotherapy
// phase, when that happened before `s`. `cutoff` is the time from
// randomization to the analysis data cutoff.
struct SubjectRecord {
  std::string subject_id;
  Arm arm = Arm::Control;
  double s = 0.0;
  int delta = 0;
  std::optional<double> mono_start;
  double cutoff = 0.0;
  std::optional<int> stratum;

  // Mono phase with positive length. A transition exactly at `s` is
  // treated as no transition.
  bool has_mono_phase() const noexcept { return mono_start && *mono_start < s; }

  // Time spent in the monotherapy phase (zero without a mono phase).
  double mono_duration() const noexcept { return has_mono_phase() ? s - *mono_start : 0.0; }

  bool operator==(const SubjectRecord&) const = default;
};

// Empty when the record is valid; otherwise the offending field and a
// message. Used by ingestion to build row-numbered diagnostics.
struct FieldViolation {
  std::string field;
  std::string message;
};
std::optional<FieldViolation> check_record(const SubjectRecord& record);

// Throws DataError naming the subject and field on the first violation.
void validate_record(const SubjectRecord& record);
void validate_records(std::span<const SubjectRecord> records);

std::size_t count_events(std::span<const SubjectRecord> records) noexcept;

}  // namespace phasetip
