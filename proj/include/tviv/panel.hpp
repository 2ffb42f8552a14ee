#pragma once

// Wide-format longitudinal record: one row per subject, T periods of
// instrument Z, treatment A and q time-varying confounders L, plus
// time-fixed baseline covariates and an end-of-study outcome Y.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tviv/error.hpp"

namespace tviv {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct PanelDataset {
  MatrixXd z;                            // n x T
  MatrixXd a;                            // n x T, entries 0/1
  std::vector<MatrixXd> confounders;     // q blocks, each n x T
  std::vector<std::string> confounder_names;
  VectorXd y;                            // n
  MatrixXd baseline;                     // n x p
  std::vector<std::string> baseline_names;
  std::vector<std::string> ids;          // optional subject ids (empty or length n)

  Index subjects() const noexcept { return y.size(); }
  Index periods() const noexcept { return z.cols(); }
  std::size_t confounder_count() const noexcept { return confounders.size(); }

  /// Confounder variable `var` at 1-based period `t`.
  auto confounder(std::size_t var, Index t) const { return confounders.at(var).col(t - 1); }

  /// Rows `rows` of every block, in the given order (subject-level resampling).
  PanelDataset select_rows(const std::vector<Index>& rows) const {
    PanelDataset out;
    const auto m = static_cast<Index>(rows.size());
    out.z.resize(m, z.cols());
    out.a.resize(m, a.cols());
    out.y.resize(m);
    out.baseline.resize(m, baseline.cols());
    out.confounders.assign(confounders.size(), MatrixXd(m, z.cols()));
    for (Index i = 0; i < m; ++i) {
      const Index r = rows[static_cast<std::size_t>(i)];
      out.z.row(i) = z.row(r);
      out.a.row(i) = a.row(r);
      out.y(i) = y(r);
      if (baseline.cols() > 0) out.baseline.row(i) = baseline.row(r);
      for (std::size_t k = 0; k < confounders.size(); ++k) out.confounders[k].row(i) = confounders[k].row(r);
    }
    out.confounder_names = confounder_names;
    out.baseline_names = baseline_names;
    if (!ids.empty()) {
      out.ids.reserve(rows.size());
      for (Index r : rows) out.ids.push_back(ids[static_cast<std::size_t>(r)]);
    }
    return out;
  }
};

struct Violation {
  std::string block;
  std::optional<Index> subject;  // 0-based row
  std::optional<Index> period;   // 1-based
  std::string reason;

  std::string describe() const {
    std::string s = block;
    if (subject) s += " subject " + std::to_string(*subject);
    if (period) s += " period " + std::to_string(*period);
    return s + ": " + reason;
  }
};

class ValidationFailed : public Error {
 public:
  explicit ValidationFailed(std::vector<Violation> violations)
      : Error(ErrorCategory::data, summarize(violations)), violations_(std::move(violations)) {}
  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  static std::string summarize(const std::vector<Violation>& v) {
    std::string s = "dataset failed validation (" + std::to_string(v.size()) + " violations)";
    if (!v.empty()) s += "; first: " + v.front().describe();
    return s;
  }
  std::vector<Violation> violations_;
};

/// Every invariant breach in `data`; empty iff the dataset is well formed.
inline std::vector<Violation> validate(const PanelDataset& data) {
  std::vector<Violation> out;
  const Index n = data.y.size();
  const Index t_count = data.z.cols();

  auto shape = [&](const std::string& block, Index rows, Index cols, Index want_cols) {
    if (rows != n) out.push_back({block, {}, {}, "row count " + std::to_string(rows) + " != " + std::to_string(n)});
    if (want_cols >= 0 && cols != want_cols)
      out.push_back({block, {}, {}, "period count " + std::to_string(cols) + " != " + std::to_string(want_cols)});
  };
  shape("Z", data.z.rows(), data.z.cols(), -1);
  shape("A", data.a.rows(), data.a.cols(), t_count);
  shape("baseline", data.baseline.rows(), data.baseline.cols(), -1);
  for (std::size_t k = 0; k < data.confounders.size(); ++k)
    shape("L", data.confounders[k].rows(), data.confounders[k].cols(), t_count);
  if (data.confounder_names.size() != data.confounders.size())
    out.push_back({"L", {}, {}, "confounder name count does not match confounder blocks"});
  if (data.baseline_names.size() != static_cast<std::size_t>(data.baseline.cols()))
    out.push_back({"baseline", {}, {}, "baseline name count does not match columns"});
  if (!data.ids.empty() && data.ids.size() != static_cast<std::size_t>(n))
    out.push_back({"id", {}, {}, "id count does not match subjects"});
  if (!out.empty()) return out;  // cell checks assume consistent shapes

  auto scan = [&](const std::string& block, const MatrixXd& m, bool periods, bool binary) {
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i < n; ++i) {
        const double v = m(i, j);
        std::optional<Index> period;
        if (periods) period = j + 1;
        if (!std::isfinite(v)) out.push_back({block, i, period, "non-finite"});
        else if (binary && v != 0.0 && v != 1.0) out.push_back({block, i, period, "non-binary"});
      }
  };
  scan("Z", data.z, true, false);
  scan("A", data.a, true, true);
  for (const auto& l : data.confounders) scan("L", l, true, false);
  scan("baseline", data.baseline, false, false);
  for (Index i = 0; i < n; ++i)
    if (!std::isfinite(data.y(i))) out.push_back({"Y", i, {}, "non-finite"});
  return out;
}

inline void require_valid(const PanelDataset& data) {
  auto v = validate(data);
  if (!v.empty()) throw ValidationFailed(std::move(v));
}

/// Variables entering the period-t instrument model f(Z_t | M_t).
struct PeriodConditioning {
  bool lag_instrument = false;            // Z_{t-1}
  bool lag_treatment = false;             // A_{t-1}
  std::vector<std::size_t> confounders;   // indices of L variables at period t
  std::vector<std::size_t> baseline;      // baseline column indices
};

struct ConditioningSet {
  std::vector<PeriodConditioning> periods;  // one per period, index 0 = period 1

  /// M_t = Z_{t-1}.
  static ConditioningSet simple(Index t_count) {
    ConditioningSet c;
    for (Index t = 1; t <= t_count; ++t) c.periods.push_back({t > 1, false, {}, {}});
    return c;
  }

  /// M_t = (A_{t-1}, Z_{t-1}, L_t) using the listed confounder variables.
  static ConditioningSet complex(Index t_count, std::vector<std::size_t> confounders = {0}) {
    ConditioningSet c;
    for (Index t = 1; t <= t_count; ++t) c.periods.push_back({t > 1, t > 1, confounders, {}});
    return c;
  }

  /// Throws InvalidConfig if a period references missing columns or period 1 uses lags.
  void check(const PanelDataset& data) const {
    if (static_cast<Index>(periods.size()) != data.periods())
      throw InvalidConfig("conditioning", "needs one entry per period");
    if (!periods.empty() && (periods[0].lag_instrument || periods[0].lag_treatment))
      throw InvalidConfig("conditioning", "period 1 may reference only baseline and L_1");
    for (const auto& p : periods) {
      for (auto k : p.confounders)
        if (k >= data.confounder_count()) throw InvalidConfig("conditioning", "unknown confounder index");
      for (auto k : p.baseline)
        if (static_cast<Index>(k) >= data.baseline.cols())
          throw InvalidConfig("conditioning", "unknown baseline index");
    }
  }
};

/// Treatment-regime contrast E[Y(treated) - Y(control)].
struct CounterfactualTarget {
  VectorXd regime_treated;
  VectorXd regime_control;

  static CounterfactualTarget always_vs_never(Index t_count) {
    return {VectorXd::Ones(t_count), VectorXd::Zero(t_count)};
  }

  /// Under a model linear in A with per-period effects `beta`.
  double contrast(const VectorXd& beta) const {
    if (beta.size() != regime_treated.size() || beta.size() != regime_control.size())
      throw InvalidConfig("target", "regime length must equal the number of periods");
    return beta.dot(regime_treated - regime_control);
  }
};

}  // namespace tviv
