#include "phasetip/errors.hpp"
#include "phasetip/survival.hpp"

namespace phasetip {

std::vector<CountingProcessRow> to_counting_process(std::span<const SubjectRecord> records) {
  std::vector<CountingProcessRow> rows;
  rows.reserve(records.size() * 2);
  for (const auto& r : records) {
    if (r.mono_start && *r.mono_start > r.s) {
      throw DataError("subject '" + r.subject_id + "': phase time exceeds follow-up");
    }
    const int trt = r.arm == Arm::Experimental ? 1 : 0;
    if (r.has_mono_phase()) {
      const double m = *r.mono_start;
      rows.push_back({r.subject_id, 0.0, m, 0, trt, 0, 0, r.stratum});
      rows.push_back({r.subject_id, m, r.s, r.delta, trt, 1, trt, r.stratum});
    } else {
      rows.push_back({r.subject_id, 0.0, r.s, r.delta, trt, 0, 0, r.stratum});
    }
  }
  return rows;
}

std::vector<CountingProcessRow> to_unsplit_rows(std::span<const SubjectRecord> records) {
  std::vector<CountingProcessRow> rows;
  rows.reserve(records.size());
  for (const auto& r : records) {
    const int trt = r.arm == Arm::Experimental ? 1 : 0;
    rows.push_back({r.subject_id, 0.0, r.s, r.delta, trt, 0, 0, r.stratum});
  }
  return rows;
}

}  // namespace phasetip
