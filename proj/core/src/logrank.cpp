#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "phasetip/errors.hpp"
#include "phasetip/survival.hpp"

namespace phasetip {

double chi2_1df_upper(double chi2) noexcept {
  if (!(chi2 > 0.0)) return 1.0;
  return std::erfc(std::sqrt(chi2 / 2.0));
}

LogRankResult logrank_test(std::span<const SubjectRecord> records, bool stratified) {
  std::size_t n_exp = 0;
  for (const auto& r : records) n_exp += r.arm == Arm::Experimental;
  if (n_exp == 0 || n_exp == records.size()) {
    throw DataError("log-rank test needs subjects in both arms");
  }
  if (count_events(records) == 0) throw DataError("log-rank test needs at least one event");

  std::map<std::optional<int>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < records.size(); ++i) {
    strata[stratified ? records[i].stratum : std::nullopt].push_back(i);
  }

  LogRankResult out;
  double o_minus_e = 0.0;
  for (auto& [key, idx] : strata) {
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return records[a].s < records[b].s; });
    double n = static_cast<double>(idx.size());
    double n1 = 0.0;
    for (auto i : idx) n1 += records[i].arm == Arm::Experimental;

    std::size_t k = 0;
    while (k < idx.size()) {
      const double t = records[idx[k]].s;
      double d = 0.0, d1 = 0.0, leave = 0.0, leave1 = 0.0;
      for (; k < idx.size() && records[idx[k]].s == t; ++k) {
        const auto& r = records[idx[k]];
        const bool exp_arm = r.arm == Arm::Experimental;
        d += r.delta;
        d1 += exp_arm ? r.delta : 0;
        leave += 1.0;
        leave1 += exp_arm;
      }
      if (d > 0.0) {
        const double e1 = d * n1 / n;
        o_minus_e += d1 - e1;
        out.observed[0] += d1;
        out.observed[1] += d - d1;
        out.expected[0] += e1;
        out.expected[1] += d - e1;
        if (n > 1.0) out.variance += d * (n1 / n) * (1.0 - n1 / n) * (n - d) / (n - 1.0);
      }
      n -= leave;
      n1 -= leave1;
    }
  }

  if (out.variance <= 0.0) throw NumericalError("log-rank variance is zero");
  out.chi2 = o_minus_e * o_minus_e / out.variance;
  out.p_two_sided = chi2_1df_upper(out.chi2);
  return out;
}

}  // namespace phasetip
