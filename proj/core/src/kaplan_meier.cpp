#include <algorithm>
#include <cmath>
#include <numeric>

#include "phasetip/errors.hpp"
#include "phasetip/survival.hpp"

namespace phasetip {
namespace {

// Survival values within this distance of 0.5 count as reaching it, so a
// product like 0.5000000000000001 still yields the conventional median.
constexpr double kMedianSlack = 1e-12;

}  // namespace

double KmCurve::survival_at(double t) const noexcept {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return surv[static_cast<std::size_t>(std::distance(times.begin(), it)) - 1];
}

KmCurve km_estimate(std::span<const double> times, std::span<const int> events) {
  if (times.empty()) throw DataError("no subjects");
  if (times.size() != events.size()) {
    throw std::invalid_argument("km_estimate: times and events differ in length");
  }

  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  KmCurve curve;
  int at_risk = static_cast<int>(times.size());
  double s = 1.0;
  double greenwood = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = times[order[i]];
    int d = 0;
    int leaving = 0;
    for (; i < order.size() && times[order[i]] == t; ++i) {
      d += events[order[i]];
      ++leaving;
    }
    if (d > 0) {
      s *= 1.0 - static_cast<double>(d) / at_risk;
      if (at_risk > d) greenwood += static_cast<double>(d) / (double(at_risk) * (at_risk - d));
      curve.times.push_back(t);
      curve.surv.push_back(s);
      curve.greenwood_se.push_back(s > 0.0 ? s * std::sqrt(greenwood) : 0.0);
      curve.n_risk.push_back(at_risk);
      curve.n_event.push_back(d);
      if (!curve.median && s <= 0.5 + kMedianSlack) curve.median = t;
    }
    at_risk -= leaving;
  }
  return curve;
}

KmCurve km_estimate(std::span<const SubjectRecord> records, std::optional<Arm> arm) {
  std::vector<double> times;
  std::vector<int> events;
  for (const auto& r : records) {
    if (arm && r.arm != *arm) continue;
    times.push_back(r.s);
    events.push_back(r.delta);
  }
  return km_estimate(times, events);
}

}  // namespace phasetip
