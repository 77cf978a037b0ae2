#pragma once

// Reference implementations written straight from the textbook formulas
// with plain loops. They share no code with the library.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "phasetip/subject.hpp"

namespace oracle {

struct Obs {
  double time;
  int event;
};

// Product of conditional survival over the distinct event times <= t.
inline double km_at(const std::vector<Obs>& data, double t) {
  std::set<double> event_times;
  for (const auto& o : data) {
    if (o.event && o.time <= t) event_times.insert(o.time);
  }
  double s = 1.0;
  for (double u : event_times) {
    int at_risk = 0, died = 0;
    for (const auto& o : data) {
      at_risk += o.time >= u;
      died += o.time == u && o.event;
    }
    s *= 1.0 - static_cast<double>(died) / at_risk;
  }
  return s;
}

struct LogRank {
  double observed_e = 0.0;
  double expected_e = 0.0;
  double variance = 0.0;
  double chi2() const { return std::pow(observed_e - expected_e, 2) / variance; }
};

// Hypergeometric O-E and variance for the experimental arm, summed over
// strata (a missing stratum is its own stratum).
inline LogRank logrank(const std::vector<phasetip::SubjectRecord>& records, bool stratified) {
  std::map<std::optional<int>, std::vector<const phasetip::SubjectRecord*>> groups;
  for (const auto& r : records) groups[stratified ? r.stratum : std::nullopt].push_back(&r);
  LogRank out;
  for (const auto& [key, members] : groups) {
    std::set<double> times;
    for (const auto* r : members) {
      if (r->delta) times.insert(r->s);
    }
    for (double t : times) {
      double n = 0, n_e = 0, d = 0, d_e = 0;
      for (const auto* r : members) {
        const bool exp_arm = r->arm == phasetip::Arm::Experimental;
        if (r->s >= t) {
          ++n;
          n_e += exp_arm;
        }
        if (r->s == t && r->delta) {
          ++d;
          d_e += exp_arm;
        }
      }
      out.observed_e += d_e;
      out.expected_e += d * n_e / n;
      if (n > 1) out.variance += d * (n_e / n) * (1 - n_e / n) * (n - d) / (n - 1);
    }
  }
  return out;
}

struct Row {
  double start, stop;
  int event;
  std::vector<double> x;
  int stratum = 0;
};

// Log partial likelihood over (start, stop] risk sets.
inline double partial_loglik(const std::vector<Row>& rows, const std::vector<double>& beta,
                             bool efron) {
  const auto eta = [&](const Row& r) {
    double v = 0.0;
    for (std::size_t j = 0; j < beta.size(); ++j) v += beta[j] * r.x[j];
    return v;
  };
  std::set<std::pair<int, double>> event_times;
  for (const auto& r : rows) {
    if (r.event) event_times.insert({r.stratum, r.stop});
  }
  double ll = 0.0;
  for (const auto& [stratum, t] : event_times) {
    double risk = 0.0, tied = 0.0, tied_eta = 0.0;
    int d = 0;
    for (const auto& r : rows) {
      if (r.stratum != stratum) continue;
      if (r.start < t && t <= r.stop) risk += std::exp(eta(r));
      if (r.event && r.stop == t) {
        ++d;
        tied += std::exp(eta(r));
        tied_eta += eta(r);
      }
    }
    ll += tied_eta;
    for (int k = 0; k < d; ++k) {
      ll -= std::log(risk - (efron ? static_cast<double>(k) / d * tied : 0.0));
    }
  }
  return ll;
}

// Coarse scan at `step`, then a fine scan around the best point.
inline double argmax_1d(const auto& f, double lo, double hi, double step) {
  double best = lo, best_v = f(lo);
  for (double b = lo; b <= hi + 1e-12; b += step) {
    const double v = f(b);
    if (v > best_v) {
      best_v = v;
      best = b;
    }
  }
  const double fine = step / 1000.0;
  double refined = best;
  for (double b = best - step; b <= best + step; b += fine) {
    const double v = f(b);
    if (v > best_v) {
      best_v = v;
      refined = b;
    }
  }
  return refined;
}

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

}  // namespace oracle
