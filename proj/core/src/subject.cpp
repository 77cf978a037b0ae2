#include "phasetip/subject.hpp"

#include <cmath>

#include "phasetip/errors.hpp"

namespace phasetip {

std::string_view to_string(Arm arm) noexcept {
  return arm == Arm::Experimental ? "E" : "C";
}

std::optional<FieldViolation> check_record(const SubjectRecord& r) {
  if (!std::isfinite(r.s) || r.s <= 0.0) {
    return FieldViolation{"pfs_months", "follow-up time must be positive"};
  }
  if (r.delta != 0 && r.delta != 1) {
    return FieldViolation{"event", "event indicator must be 0 or 1"};
  }
  if (!std::isfinite(r.cutoff) || r.cutoff < r.s) {
    return FieldViolation{"cutoff_months", "follow-up exceeds data cutoff"};
  }
  if (r.mono_start) {
    const double m = *r.mono_start;
    if (!std::isfinite(m) || m <= 0.0) {
      return FieldViolation{"mono_start_months", "phase time must be positive"};
    }
    if (m > r.s) {
      return FieldViolation{"mono_start_months", "phase time exceeds follow-up"};
    }
  }
  return std::nullopt;
}

void validate_record(const SubjectRecord& record) {
  if (auto v = check_record(record)) {
    throw DataError("subject '" + record.subject_id + "', field " + v->field + ": " +
                    v->message);
  }
}

void validate_records(std::span<const SubjectRecord> records) {
  for (const auto& r : records) validate_record(r);
}

std::size_t count_events(std::span<const SubjectRecord> records) noexcept {
  std::size_t n = 0;
  for (const auto& r : records) n += r.delta == 1;
  return n;
}

}  // namespace phasetip
