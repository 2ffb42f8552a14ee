#pragma once

// Instrument strength and collinearity diagnostics.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "tviv/error.hpp"
#include "tviv/estimators.hpp"
#include "tviv/panel.hpp"
#include "tviv/regression.hpp"

namespace tviv {

inline constexpr double kBalanceThreshold = 0.08;

struct FirstStageDiagnostics {
  VectorXd f_stat;         // per period
  VectorXd conditional_f;  // per period; empty when T = 1
  VectorXd vif;            // second-stage regressors after the intercept
  std::vector<std::string> vif_labels;
  MatrixXd z_correlations;
};

namespace detail {

/// Nested-model F statistic. The full-model RSS is floored at 1e-15 of the restricted
/// RSS so that an exact fit reports a large finite value.
inline double nested_f(double rss_restricted, double rss_full, double df_num, double df_den) {
  if (!(df_num > 0.0) || !(df_den > 0.0)) throw InvalidConfig("degrees of freedom", "must be positive");
  rss_full = std::max(rss_full, 1e-15 * rss_restricted);
  if (!(rss_full > 0.0)) return 0.0;
  return std::max(0.0, (rss_restricted - rss_full) / df_num) / (rss_full / df_den);
}

inline double centered_ss(const VectorXd& v) { return (v.array() - v.mean()).square().sum(); }

inline VectorXd min_norm_solve(const MatrixXd& x, const VectorXd& y) {
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod;
  cod.setThreshold(kRankTol);
  cod.compute(x);
  return cod.solve(y);
}

}  // namespace detail

/// F statistic for the instrument block in the period-t first stage of `spec`.
inline double first_stage_f(const PanelDataset& data, const MethodSpec& spec, Index t) {
  require_valid(data);
  if (t < 1 || t > data.periods()) throw InvalidConfig("period", "out of range");
  const auto inst = prepare_instruments(data, spec);
  const VectorXd at = data.a.col(t - 1);
  if (detail::centered_ss(at) == 0.0) throw ConstantColumn("a" + std::to_string(t));
  const auto label = detail::period_label("first stage", t);
  const auto full = ols_fit(DesignMatrix::with_intercept(detail::hcat({&inst.instruments, &inst.controls})), at, label);
  const auto restricted = ols_fit(DesignMatrix::with_intercept(inst.controls), at, label);
  const auto n = static_cast<double>(data.subjects());
  const auto k = static_cast<double>(inst.instruments.cols());
  const auto p = static_cast<double>(1 + inst.instruments.cols() + inst.controls.cols());
  return detail::nested_f(restricted.rss(), full.rss(), k, n - p);
}

/// Conditional F for treatment t: A_t is regressed on the first-stage predictions of the
/// other treatments, the residual is formed with the observed other treatments, and the
/// instruments' remaining power over that residual is tested with k - (T - 1) numerator df.
inline double conditional_f(const PanelDataset& data, const MethodSpec& spec, Index t) {
  require_valid(data);
  const Index t_count = data.periods();
  if (t_count < 2) throw InvalidConfig("periods", "conditional F needs at least 2 treatments");
  if (t < 1 || t > t_count) throw InvalidConfig("period", "out of range");
  const auto inst = prepare_instruments(data, spec);
  const Index n = data.subjects();
  const Index k = inst.instruments.cols();
  const Index c = 1 + inst.controls.cols();

  MatrixXd w(n, c);
  w.col(0).setOnes();
  if (c > 1) w.rightCols(c - 1) = inst.controls;
  const MatrixXd zw = detail::hcat({&w, &inst.instruments});

  MatrixXd predicted_others(n, t_count - 1), observed_others(n, t_count - 1);
  for (Index j = 1, col = 0; j <= t_count; ++j) {
    if (j == t) continue;
    predicted_others.col(col) = projected_values(zw, data.a.col(j - 1));
    observed_others.col(col++) = data.a.col(j - 1);
  }
  const VectorXd at = data.a.col(t - 1);
  const VectorXd delta = detail::min_norm_solve(detail::hcat({&w, &predicted_others}), at);
  const VectorXd resid = at - detail::hcat({&w, &observed_others}) * delta;

  const double rss_full = (resid - projected_values(zw, resid)).squaredNorm();
  const double rss_restricted = (resid - projected_values(w, resid)).squaredNorm();
  const double df_num = static_cast<double>(k - (t_count - 1));
  const double df_den = static_cast<double>(n - k - c);
  return detail::nested_f(rss_restricted, rss_full, df_num, df_den);
}

/// VIF of each non-intercept column: 1 / (1 - R^2) from regressing it on an intercept
/// and the remaining non-intercept columns.
inline VectorXd vif(const DesignMatrix& design) {
  detail::checked_qr(design.values(), "vif");
  const Index first = design.has_intercept() ? 1 : 0;
  const MatrixXd x = design.values().rightCols(design.cols() - first);
  const Index p = x.cols();
  VectorXd out(p);
  for (Index j = 0; j < p; ++j) {
    MatrixXd others(x.rows(), p - 1);
    for (Index i = 0, col = 0; i < p; ++i)
      if (i != j) others.col(col++) = x.col(i);
    const VectorXd xj = x.col(j);
    const double tss = detail::centered_ss(xj);
    if (tss == 0.0) throw ConstantColumn("design column " + std::to_string(j + first));
    const double rss = ols_fit(DesignMatrix::with_intercept(others), xj, "vif").rss();
    if (!(rss > 0.0)) throw RankDeficient(static_cast<std::size_t>(j + first), "vif");
    out(j) = tss / rss;
  }
  return out;
}

/// Pearson correlation; ConstantColumn names whichever input has zero variance.
inline double pearson(const VectorXd& x, const VectorXd& y, const std::string& x_name = "x",
                      const std::string& y_name = "y") {
  if (x.size() != y.size()) throw InvalidConfig("correlation", "length mismatch");
  const VectorXd xc = x.array() - x.mean();
  const VectorXd yc = y.array() - y.mean();
  const double sx = xc.squaredNorm();
  const double sy = yc.squaredNorm();
  if (sx == 0.0) throw ConstantColumn(x_name);
  if (sy == 0.0) throw ConstantColumn(y_name);
  return std::clamp(xc.dot(yc) / std::sqrt(sx * sy), -1.0, 1.0);
}

/// T x T correlation matrix of the raw instruments.
inline MatrixXd z_correlations(const PanelDataset& data) {
  const Index t_count = data.periods();
  MatrixXd r = MatrixXd::Identity(t_count, t_count);
  for (Index i = 0; i < t_count; ++i)
    for (Index j = i + 1; j < t_count; ++j)
      r(i, j) = r(j, i) = pearson(data.z.col(i), data.z.col(j), "z" + std::to_string(i + 1),
                                  "z" + std::to_string(j + 1));
  return r;
}

inline FirstStageDiagnostics diagnose(const PanelDataset& data, const MethodSpec& spec) {
  require_valid(data);
  const Index t_count = data.periods();
  FirstStageDiagnostics out;
  out.f_stat.resize(t_count);
  for (Index t = 1; t <= t_count; ++t) out.f_stat(t - 1) = first_stage_f(data, spec, t);
  if (t_count >= 2) {
    out.conditional_f.resize(t_count);
    for (Index t = 1; t <= t_count; ++t) out.conditional_f(t - 1) = conditional_f(data, spec, t);
  }
  const auto inst = prepare_instruments(data, spec);
  const auto fs = detail::linear_first_stage(data, inst.instruments, inst.controls);
  out.vif = vif(detail::second_stage_design(fs.predicted, inst.controls));
  for (Index t = 1; t <= t_count; ++t) out.vif_labels.push_back("a" + std::to_string(t) + "_hat");
  for (Index j = 0; j < inst.controls.cols(); ++j) out.vif_labels.push_back("control_" + std::to_string(j + 1));
  out.z_correlations = z_correlations(data);
  return out;
}

struct BalanceRow {
  std::string covariate;
  double correlation = 0.0;
  bool flagged = false;
};

inline bool balance_flag(double correlation) { return std::abs(correlation) > kBalanceThreshold; }

inline std::vector<BalanceRow> balance_table(const VectorXd& instrument,
                                             const std::vector<std::pair<std::string, VectorXd>>& covariates,
                                             const std::string& instrument_name = "instrument") {
  std::vector<BalanceRow> rows;
  for (const auto& [name, values] : covariates) {
    const double r = pearson(instrument, values, instrument_name, name);
    rows.push_back({name, r, balance_flag(r)});
  }
  return rows;
}

}  // namespace tviv
