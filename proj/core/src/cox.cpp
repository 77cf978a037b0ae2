#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

#include "phasetip/errors.hpp"
#include "phasetip/survival.hpp"

namespace phasetip {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Rows grouped by stratum, each group carrying its sweep orders: stop
// descending (rows enter the risk set) and start descending (rows leave).
class RiskSetLayout {
 public:
  RiskSetLayout(std::span<const CountingProcessRow> rows, const CoxOptions& options)
      : rows_(rows), p_(covariate_names(options.model).size()), x_(rows.size() * p_) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      if (!(r.start < r.stop)) throw DataError("counting-process row with start >= stop");
      double* xi = &x_[i * p_];
      xi[0] = r.trt;
      if (options.model == CoxModel::TreatmentPhaseInteraction) {
        xi[1] = r.mono;
        xi[2] = r.trt_x_mono;
      }
      n_events_ += r.event_at_stop;
    }

    std::map<std::optional<int>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      groups[options.stratified ? rows[i].stratum : std::nullopt].push_back(i);
    }
    for (auto& [key, idx] : groups) {
      Stratum s;
      s.by_stop = idx;
      s.by_start = idx;
      // Events first among equal stop times keeps death sums contiguous.
      std::stable_sort(s.by_stop.begin(), s.by_stop.end(), [&](std::size_t a, std::size_t b) {
        if (rows[a].stop != rows[b].stop) return rows[a].stop > rows[b].stop;
        return rows[a].event_at_stop > rows[b].event_at_stop;
      });
      std::stable_sort(s.by_start.begin(), s.by_start.end(),
                       [&](std::size_t a, std::size_t b) { return rows[a].start > rows[b].start; });
      strata_.push_back(std::move(s));
    }
  }

  std::size_t dim() const noexcept { return p_; }
  int n_events() const noexcept { return n_events_; }

  PartialLikelihood evaluate(const VectorXd& beta, Ties ties) const {
    const std::size_t p = p_;
    PartialLikelihood out;
    out.gradient = VectorXd::Zero(static_cast<Eigen::Index>(p));
    out.information = MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));

    std::vector<double> eta(rows_.size());
    std::vector<double> w(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      double e = 0.0;
      for (std::size_t j = 0; j < p; ++j) e += x_[i * p + j] * beta[static_cast<Eigen::Index>(j)];
      eta[i] = e;
      w[i] = std::exp(e);
    }

    VectorXd s1(p), d1(p), x_sum(p), a(p);
    MatrixXd s2(p, p), d2(p, p);
    for (const auto& st : strata_) {
      double s0 = 0.0;
      s1.setZero();
      s2.setZero();
      std::size_t next_in = 0;
      std::size_t next_out = 0;
      const std::size_t n = st.by_stop.size();
      while (next_in < n) {
        const double t = rows_[st.by_stop[next_in]].stop;
        double d0 = 0.0;
        int d = 0;
        double eta_sum = 0.0;
        d1.setZero();
        d2.setZero();
        x_sum.setZero();
        for (; next_in < n && rows_[st.by_stop[next_in]].stop == t; ++next_in) {
          const std::size_t i = st.by_stop[next_in];
          const Eigen::Map<const VectorXd> xi(&x_[i * p], static_cast<Eigen::Index>(p));
          s0 += w[i];
          s1 += w[i] * xi;
          s2.noalias() += w[i] * xi * xi.transpose();
          if (rows_[i].event_at_stop) {
            ++d;
            d0 += w[i];
            d1 += w[i] * xi;
            d2.noalias() += w[i] * xi * xi.transpose();
            x_sum += xi;
            eta_sum += eta[i];
          }
        }
        for (; next_out < n && rows_[st.by_start[next_out]].start >= t; ++next_out) {
          const std::size_t i = st.by_start[next_out];
          const Eigen::Map<const VectorXd> xi(&x_[i * p], static_cast<Eigen::Index>(p));
          s0 -= w[i];
          s1 -= w[i] * xi;
          s2.noalias() -= w[i] * xi * xi.transpose();
        }
        if (d == 0) continue;

        out.loglik += eta_sum;
        out.gradient += x_sum;
        if (ties == Ties::Breslow || d == 1) {
          a = s1 / s0;
          out.loglik -= d * std::log(s0);
          out.gradient -= d * a;
          out.information += d * (s2 / s0 - a * a.transpose());
        } else {
          for (int k = 0; k < d; ++k) {
            const double f = static_cast<double>(k) / d;
            const double den = s0 - f * d0;
            a = (s1 - f * d1) / den;
            out.loglik -= std::log(den);
            out.gradient -= a;
            out.information += (s2 - f * d2) / den - a * a.transpose();
          }
        }
      }
    }
    return out;
  }

 private:
  struct Stratum {
    std::vector<std::size_t> by_stop;
    std::vector<std::size_t> by_start;
  };

  std::span<const CountingProcessRow> rows_;
  std::size_t p_;
  std::vector<double> x_;
  std::vector<Stratum> strata_;
  int n_events_ = 0;
};

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::vector<std::string> covariate_names(CoxModel model) {
  if (model == CoxModel::Treatment) return {"trt"};
  return {"trt", "mono", "trt_x_mono"};
}

std::size_t CoxFit::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw std::out_of_range("no covariate named '" + std::string(name) + "'");
}

double CoxFit::coef(std::string_view name) const {
  return coefs[static_cast<Eigen::Index>(index_of(name))];
}

double CoxFit::hr(std::string_view name) const { return std::exp(coef(name)); }

PartialLikelihood cox_partial_likelihood(std::span<const CountingProcessRow> rows,
                                         const CoxOptions& options, const VectorXd& beta) {
  RiskSetLayout layout(rows, options);
  if (static_cast<std::size_t>(beta.size()) != layout.dim()) {
    throw std::invalid_argument("beta has the wrong dimension for the model");
  }
  return layout.evaluate(beta, options.ties);
}

CoxFit cox_fit(std::span<const CountingProcessRow> rows, const CoxOptions& options) {
  RiskSetLayout layout(rows, options);
  if (layout.n_events() == 0) throw NumericalError("Cox model needs at least one event");

  const auto p = static_cast<Eigen::Index>(layout.dim());
  VectorXd beta = VectorXd::Zero(p);
  PartialLikelihood cur = layout.evaluate(beta, options.ties);

  CoxFit fit;
  fit.names = covariate_names(options.model);
  fit.loglik_null = cur.loglik;

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    Eigen::LDLT<MatrixXd> ldlt(cur.information);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
      if (iter == 1) throw NumericalError("singular information matrix (collinear design)");
      throw SeparationError("separation detected");
    }
    VectorXd step = ldlt.solve(cur.gradient);
    VectorXd trial = beta + step;
    PartialLikelihood next = layout.evaluate(trial, options.ties);
    // Drops smaller than the convergence tolerance are rounding noise in the
    // risk-set sums, not a failed step.
    for (int halving = 0; halving < 30 && !(next.loglik >= cur.loglik - options.loglik_tol);
         ++halving) {
      step *= 0.5;
      trial = beta + step;
      next = layout.evaluate(trial, options.ties);
    }
    if (trial.cwiseAbs().maxCoeff() > options.divergence_bound) {
      throw SeparationError("separation detected");
    }

    const double dloglik = std::abs(next.loglik - cur.loglik);
    beta = trial;
    cur = std::move(next);
    fit.iterations = iter;
    if (dloglik < options.loglik_tol && cur.gradient.norm() < options.gradient_tol) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged) {
    throw ConvergenceError("Cox fit did not converge in " +
                               std::to_string(options.max_iterations) + " iterations",
                           to_std(beta));
  }

  Eigen::LDLT<MatrixXd> ldlt(cur.information);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw SeparationError("separation detected");
  }
  fit.coefs = beta;
  fit.loglik = cur.loglik;
  fit.gradient_norm = cur.gradient.norm();
  fit.covariance = ldlt.solve(MatrixXd::Identity(p, p));
  fit.se = fit.covariance.diagonal().cwiseSqrt();
  return fit;
}

CoxFit cox_treatment_fit(std::span<const SubjectRecord> records, Ties ties, bool stratified) {
  const auto rows = to_unsplit_rows(records);
  CoxOptions options;
  options.model = CoxModel::Treatment;
  options.ties = ties;
  options.stratified = stratified;
  return cox_fit(rows, options);
}

ConfidenceInterval wald_ci(double beta, double se, double level) {
  const boost::math::normal standard_normal;
  const double z = boost::math::quantile(standard_normal, 0.5 + level / 2.0);
  return {std::exp(beta - z * se), std::exp(beta + z * se)};
}

PhaseHr phase_hr(std::span<const SubjectRecord> records, Ties ties, bool stratified) {
  const auto rows = to_counting_process(records);
  const bool any_mono = std::any_of(rows.begin(), rows.end(),
                                    [](const CountingProcessRow& r) { return r.mono == 1; });
  CoxOptions options;
  options.ties = ties;
  options.stratified = stratified;

  PhaseHr out;
  if (!any_mono) {
    options.model = CoxModel::Treatment;
    out.fit = cox_fit(rows, options);
    out.hr_combo = out.fit.hr("trt");
    out.ci_combo = wald_ci(out.fit.coefs[0], out.fit.se[0]);
    return out;
  }

  options.model = CoxModel::TreatmentPhaseInteraction;
  out.fit = cox_fit(rows, options);
  const auto& b = out.fit.coefs;
  const auto& v = out.fit.covariance;
  out.hr_combo = std::exp(b[0]);
  out.ci_combo = wald_ci(b[0], out.fit.se[0]);
  const double mono_beta = b[0] + b[2];
  const double mono_var = v(0, 0) + v(2, 2) + 2.0 * v(0, 2);
  out.hr_mono = std::exp(mono_beta);
  out.ci_mono = wald_ci(mono_beta, std::sqrt(mono_var));
  return out;
}

}  // namespace phasetip
