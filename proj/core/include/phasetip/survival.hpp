#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "phasetip/subject.hpp"

namespace phasetip {

//---------------------------------------------------------------------------//
// Kaplan-Meier
//---------------------------------------------------------------------------//

// Product-limit curve evaluated at the distinct event times.
struct KmCurve {
  std::vector<double> times;
  std::vector<double> surv;
  std::vector<double> greenwood_se;
  std::vector<int> n_risk;
  std::vector<int> n_event;
  std::optional<double> median;

  // Right-continuous step function; 1 before the first event time.
  double survival_at(double t) const noexcept;
};

// Throws DataError("no subjects") when nothing survives the arm filter.
KmCurve km_estimate(std::span<const SubjectRecord> records,
                    std::optional<Arm> arm = std::nullopt);

// Same estimator on raw (time, event) pairs.
KmCurve km_estimate(std::span<const double> times, std::span<const int> events);

//---------------------------------------------------------------------------//
// Log-rank
//---------------------------------------------------------------------------//

struct LogRankResult {
  double chi2 = 0.0;
  double p_two_sided = 1.0;
  double variance = 0.0;
  // Indexed by Arm: [0] experimental, [1] control.
  std::array<double, 2> observed{};
  std::array<double, 2> expected{};
};

// Two-sample log-rank test between arms. When `stratified` is set the
// O-E and variance terms are summed over the record strata (records
// without a stratum form their own stratum).
LogRankResult logrank_test(std::span<const SubjectRecord> records, bool stratified = false);

// Upper tail of chi-square with one degree of freedom.
double chi2_1df_upper(double chi2) noexcept;

//---------------------------------------------------------------------------//
// Counting-process rows and Cox regression
//---------------------------------------------------------------------------//

struct CountingProcessRow {
  std::string subject_id;
  double start = 0.0;
  double stop = 0.0;
  int event_at_stop = 0;
  int trt = 0;
  int mono = 0;
  int trt_x_mono = 0;
  std::optional<int> stratum;

  bool operator==(const CountingProcessRow&) const = default;
};

// Splits each subject at its mono phase start. Throws DataError("phase
// time exceeds follow-up") when mono_start > s.
std::vector<CountingProcessRow> to_counting_process(std::span<const SubjectRecord> records);

// One (0, s] row per subject with mono = 0.
std::vector<CountingProcessRow> to_unsplit_rows(std::span<const SubjectRecord> records);

enum class CoxModel {
  Treatment,                  // {trt}
  TreatmentPhaseInteraction,  // {trt, mono, trt_x_mono}
};

enum class Ties { Efron, Breslow };

struct CoxOptions {
  CoxModel model = CoxModel::Treatment;
  Ties ties = Ties::Efron;
  bool stratified = false;
  int max_iterations = 50;
  double loglik_tol = 1e-9;
  double gradient_tol = 1e-8;
  // |beta_j| beyond this is reported as separation.
  double divergence_bound = 20.0;
};

std::vector<std::string> covariate_names(CoxModel model);

struct CoxFit {
  std::vector<std::string> names;
  Eigen::VectorXd coefs;
  Eigen::VectorXd se;
  Eigen::MatrixXd covariance;
  double loglik = 0.0;
  double loglik_null = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;

  // exp(beta) for a named covariate. Throws std::out_of_range.
  double hr(std::string_view name) const;
  double coef(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
};

// Log partial likelihood with its gradient and observed information.
struct PartialLikelihood {
  double loglik = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd information;
};

PartialLikelihood cox_partial_likelihood(std::span<const CountingProcessRow> rows,
                                         const CoxOptions& options,
                                         const Eigen::VectorXd& beta);

// Damped Newton-Raphson from beta = 0 with step halving. Throws
// NumericalError when no event exists or the information is singular,
// SeparationError on a monotone likelihood and ConvergenceError when the
// iteration limit is hit.
CoxFit cox_fit(std::span<const CountingProcessRow> rows, const CoxOptions& options);

// Cox {trt} fit on unsplit records.
CoxFit cox_treatment_fit(std::span<const SubjectRecord> records, Ties ties = Ties::Efron,
                         bool stratified = false);

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
};

// Phase-specific hazard ratios from the three-term time-varying model.
// hr_mono is empty when no subject enters a mono phase; the combination
// HR then comes from the plain {trt} model.
struct PhaseHr {
  double hr_combo = 1.0;
  ConfidenceInterval ci_combo;
  std::optional<double> hr_mono;
  std::optional<ConfidenceInterval> ci_mono;
  CoxFit fit;
};

PhaseHr phase_hr(std::span<const SubjectRecord> records, Ties ties = Ties::Efron,
                 bool stratified = false);

ConfidenceInterval wald_ci(double beta, double se, double level = 0.95);

}  // namespace phasetip
