#pragma once

// Time-varying instrumental-variable estimators.
//
// All estimators share one skeleton:
//   instruments  raw Z (standard 2SLS) or residualized Z_t - E(Z_t | M_t)
//   first stage  each A_t on an intercept, all T instruments and controls
//   second stage Y on an intercept, the predicted A_1..A_T and controls
// The per-period effects are the second-stage coefficients on the predicted
// treatments, in period order, and the ATE is their sum.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tviv/error.hpp"
#include "tviv/glm.hpp"
#include "tviv/panel.hpp"
#include "tviv/regression.hpp"

namespace tviv {

enum class Method { standard_2sls, r2sls, gest_closed_form, ridge_r2sls, r2sls_probit, r2sls_probit_trick };

inline const std::vector<Method>& all_methods() {
  static const std::vector<Method> m{Method::standard_2sls,    Method::r2sls,
                                     Method::gest_closed_form, Method::ridge_r2sls,
                                     Method::r2sls_probit,     Method::r2sls_probit_trick};
  return m;
}

inline std::string to_string(Method m) {
  switch (m) {
    case Method::standard_2sls: return "standard_2sls";
    case Method::r2sls: return "r2sls";
    case Method::gest_closed_form: return "gest_closed_form";
    case Method::ridge_r2sls: return "ridge_r2sls";
    case Method::r2sls_probit: return "r2sls_probit";
    case Method::r2sls_probit_trick: return "r2sls_probit_trick";
  }
  return "unknown";
}

inline Method parse_method(const std::string& s) {
  for (Method m : all_methods())
    if (to_string(m) == s) return m;
  throw InvalidConfig("method", "unknown method '" + s + "'");
}

/// Family used for the instrument models f(Z_t | M_t).
enum class InstrumentModel { automatic, logistic, linear };

/// Columns entering both first- and second-stage models.
struct StageControls {
  std::vector<std::size_t> baseline;                   // baseline column indices
  std::vector<std::pair<std::size_t, Index>> confounders;  // (variable, 1-based period)

  bool empty() const noexcept { return baseline.empty() && confounders.empty(); }
  Index count() const noexcept { return static_cast<Index>(baseline.size() + confounders.size()); }
};

struct RidgeOptions {
  std::vector<double> grid;  // strictly increasing, non-negative
  double tolerance = 0.01;

  /// 0 followed by 50 log-spaced penalties from 1e-4 to 1e4.
  static RidgeOptions defaults() {
    RidgeOptions o;
    o.grid.push_back(0.0);
    for (int k = 0; k < 50; ++k) o.grid.push_back(std::pow(10.0, -4.0 + 8.0 * k / 49.0));
    return o;
  }
};

struct MethodSpec {
  Method method = Method::r2sls;
  ConditioningSet conditioning;
  StageControls controls;
  InstrumentModel instrument_model = InstrumentModel::automatic;
  std::optional<RidgeOptions> ridge;

  void check(const PanelDataset& data) const {
    if (ridge.has_value() != (method == Method::ridge_r2sls))
      throw InvalidConfig("ridge", "ridge options are required for, and only for, ridge_r2sls");
    if (method != Method::standard_2sls) conditioning.check(data);
    for (auto k : controls.baseline)
      if (static_cast<Index>(k) >= data.baseline.cols()) throw InvalidConfig("controls", "unknown baseline column");
    for (auto [k, t] : controls.confounders)
      if (k >= data.confounder_count() || t < 1 || t > data.periods())
        throw InvalidConfig("controls", "unknown confounder column");
    if (ridge) {
      const auto& g = ridge->grid;
      if (g.empty()) throw InvalidConfig("ridge.grid", "empty");
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(g[i] >= 0.0) || !std::isfinite(g[i])) throw InvalidConfig("ridge.grid", "penalties must be finite and >= 0");
        if (i > 0 && !(g[i] > g[i - 1])) throw InvalidConfig("ridge.grid", "must be strictly increasing");
      }
      if (!(ridge->tolerance > 0.0)) throw InvalidConfig("ridge.tolerance", "must be > 0");
    }
  }
};

using StageFit = std::variant<LinearFit, GlmFit>;

struct RidgeTrace {
  std::vector<double> lambdas;
  std::vector<VectorXd> betas;
};

struct EstimateResult {
  Method method = Method::r2sls;
  VectorXd beta;  // per-period effects
  double ate = 0.0;
  std::vector<StageFit> first_stage;        // fits producing the predicted treatments
  LinearFit second_stage;                   // coefficient order: intercept, A_1..A_T, controls
  std::vector<StageFit> instrument_models;  // f(Z_t | M_t), residualizing methods only
  std::optional<MatrixXd> instrument_residuals;
  MatrixXd instruments;                     // instrument block of the final first stage
  std::optional<std::vector<GlmFit>> probit_stage;  // stage A of the probit trick
  std::optional<double> ridge_lambda;
  std::optional<RidgeTrace> ridge_trace;
};

/// Left-to-right sum of the per-period effects.
inline double sum_effects(const VectorXd& beta) {
  return std::accumulate(beta.data(), beta.data() + beta.size(), 0.0);
}

// ---------------------------------------------------------------------------

namespace detail {

inline MatrixXd control_matrix(const PanelDataset& data, const StageControls& controls) {
  MatrixXd c(data.subjects(), controls.count());
  Index j = 0;
  for (auto k : controls.baseline) c.col(j++) = data.baseline.col(static_cast<Index>(k));
  for (auto [k, t] : controls.confounders) c.col(j++) = data.confounder(k, t);
  return c;
}

inline MatrixXd hcat(std::initializer_list<const MatrixXd*> blocks) {
  const Index rows = (*blocks.begin())->rows();
  Index cols = 0;
  for (auto* b : blocks) cols += b->cols();
  MatrixXd out(rows, cols);
  Index j = 0;
  for (auto* b : blocks) {
    if (b->cols() == 0) continue;
    out.middleCols(j, b->cols()) = *b;
    j += b->cols();
  }
  return out;
}

inline bool is_binary(const VectorXd& v) {
  return ((v.array() == 0.0) || (v.array() == 1.0)).all();
}

inline std::string period_label(const char* stage, Index t) {
  return std::string(stage) + " period " + std::to_string(t);
}

}  // namespace detail

/// Regressors M_t of the period-t instrument model, without intercept.
inline MatrixXd conditioning_columns(const PanelDataset& data, const ConditioningSet& cond, Index t) {
  const auto& p = cond.periods.at(static_cast<std::size_t>(t - 1));
  std::vector<VectorXd> cols;
  if (p.lag_instrument && t > 1) cols.emplace_back(data.z.col(t - 2));
  if (p.lag_treatment && t > 1) cols.emplace_back(data.a.col(t - 2));
  for (auto k : p.confounders) cols.emplace_back(data.confounder(k, t));
  for (auto k : p.baseline) cols.emplace_back(data.baseline.col(static_cast<Index>(k)));
  MatrixXd m(data.subjects(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) m.col(static_cast<Index>(j)) = cols[j];
  return m;
}

/// Instruments and controls feeding the first stage of a method.
struct InstrumentStage {
  MatrixXd instruments;  // n x T
  MatrixXd controls;     // n x c
  std::vector<StageFit> models;
  std::optional<MatrixXd> residuals;
};

/// Z_t - E(Z_t | M_t) per period. Binary instruments get a logistic model and
/// continuous ones OLS unless `family` forces a choice.
inline InstrumentStage residualize_instruments(const PanelDataset& data, const ConditioningSet& cond,
                                               InstrumentModel family) {
  const Index n = data.subjects();
  const Index t_count = data.periods();
  InstrumentStage out;
  out.instruments.resize(n, t_count);
  for (Index t = 1; t <= t_count; ++t) {
    const VectorXd zt = data.z.col(t - 1);
    const auto design = DesignMatrix::with_intercept(conditioning_columns(data, cond, t));
    const bool logistic = family == InstrumentModel::logistic ||
                          (family == InstrumentModel::automatic && detail::is_binary(zt));
    const auto label = detail::period_label("instrument model", t);
    if (logistic) {
      auto fit = glm_fit(design, zt, Link::logit, {}, label);
      out.instruments.col(t - 1) = zt - fit.fitted_probabilities;
      out.models.emplace_back(std::move(fit));
    } else {
      auto fit = ols_fit(design, zt, label);
      out.instruments.col(t - 1) = fit.residuals;
      out.models.emplace_back(std::move(fit));
    }
  }
  out.residuals = out.instruments;
  return out;
}

/// Instrument block and controls for `spec`, before any treatment model is fitted.
inline InstrumentStage prepare_instruments(const PanelDataset& data, const MethodSpec& spec) {
  if (spec.method == Method::standard_2sls) {
    InstrumentStage s;
    s.instruments = data.z;
    s.controls = detail::control_matrix(data, spec.controls);
    return s;
  }
  auto s = residualize_instruments(data, spec.conditioning, spec.instrument_model);
  s.controls = detail::control_matrix(data, spec.controls);
  return s;
}

namespace detail {

struct FirstStage {
  MatrixXd predicted;  // n x T
  std::vector<StageFit> fits;
};

inline FirstStage linear_first_stage(const PanelDataset& data, const MatrixXd& instruments,
                                     const MatrixXd& controls) {
  const auto design = DesignMatrix::with_intercept(hcat({&instruments, &controls}));
  FirstStage fs;
  fs.predicted.resize(data.subjects(), data.periods());
  for (Index t = 1; t <= data.periods(); ++t) {
    auto fit = ols_fit(design, data.a.col(t - 1), period_label("first stage", t));
    fs.predicted.col(t - 1) = fit.fitted;
    fs.fits.emplace_back(std::move(fit));
  }
  return fs;
}

inline std::vector<GlmFit> probit_first_stage(const PanelDataset& data, const MatrixXd& instruments,
                                              const MatrixXd& controls, MatrixXd& predicted) {
  const auto design = DesignMatrix::with_intercept(hcat({&instruments, &controls}));
  std::vector<GlmFit> fits;
  predicted.resize(data.subjects(), data.periods());
  for (Index t = 1; t <= data.periods(); ++t) {
    auto fit = glm_fit(design, data.a.col(t - 1), Link::probit, {}, period_label("probit first stage", t));
    predicted.col(t - 1) = fit.fitted_probabilities;
    fits.push_back(std::move(fit));
  }
  return fits;
}

inline DesignMatrix second_stage_design(const MatrixXd& predicted, const MatrixXd& controls) {
  return DesignMatrix::with_intercept(hcat({&predicted, &controls}));
}

inline EstimateResult finish(EstimateResult r, LinearFit second, Index t_count) {
  r.beta = second.coefficients.segment(1, t_count);
  r.ate = sum_effects(r.beta);
  r.second_stage = std::move(second);
  return r;
}

inline EstimateResult two_stage(const PanelDataset& data, Method method, InstrumentStage inst) {
  auto fs = linear_first_stage(data, inst.instruments, inst.controls);
  auto second = ols_fit(second_stage_design(fs.predicted, inst.controls), data.y, "second stage");
  EstimateResult r;
  r.method = method;
  r.first_stage = std::move(fs.fits);
  r.instrument_models = std::move(inst.models);
  r.instrument_residuals = std::move(inst.residuals);
  r.instruments = std::move(inst.instruments);
  return finish(std::move(r), std::move(second), data.periods());
}

inline void precheck(const PanelDataset& data, const MethodSpec& spec, Method expected) {
  if (spec.method != expected)
    throw InvalidConfig("method", "spec method " + to_string(spec.method) + " passed to " + to_string(expected));
  require_valid(data);
  spec.check(data);
}

}  // namespace detail

// ---------------------------------------------------------------------------

/// Multivariate 2SLS on the raw instruments, with the spec's controls in both stages.
inline EstimateResult standard_2sls(const PanelDataset& data, const MethodSpec& spec) {
  detail::precheck(data, spec, Method::standard_2sls);
  return detail::two_stage(data, Method::standard_2sls, prepare_instruments(data, spec));
}

/// Robust 2SLS: 2SLS on instruments residualized against their conditioning sets.
inline EstimateResult r2sls(const PanelDataset& data, const MethodSpec& spec) {
  detail::precheck(data, spec, Method::r2sls);
  return detail::two_stage(data, Method::r2sls, prepare_instruments(data, spec));
}

/// Closed-form g-estimator  beta' = Y'Z Z'A (A'Z Z'A)^{-1}  on residualized instruments,
/// evaluated on deviations from the intercept (and controls, if any).
inline EstimateResult gest_closed_form(const PanelDataset& data, const MethodSpec& spec) {
  detail::precheck(data, spec, Method::gest_closed_form);
  auto inst = prepare_instruments(data, spec);
  const auto exog = DesignMatrix::with_intercept(inst.controls);
  auto deviations = [&](const VectorXd& v) { return ols_fit(exog, v, "centering").residuals; };

  const Index t_count = data.periods();
  const VectorXd yc = deviations(data.y);
  MatrixXd ac(data.subjects(), t_count), zc(data.subjects(), t_count);
  for (Index t = 0; t < t_count; ++t) {
    ac.col(t) = deviations(data.a.col(t));
    zc.col(t) = deviations(inst.instruments.col(t));
  }
  // (A'ZZ'A) beta = A'Z Z'Y is the normal system of  (Z'A) beta ~ Z'Y.
  const MatrixXd za = zc.transpose() * ac;
  const VectorXd zy = zc.transpose() * yc;
  VectorXd beta;
  try {
    beta = detail::checked_qr(za, "Z'A").solve(zy);
  } catch (const RankDeficient&) {
    throw SingularMatrix("A'ZZ'A is singular");
  }

  // Structural fit of Y on (1, A, controls) at the estimated effects.
  const Index c = inst.controls.cols();
  LinearFit second;
  second.coefficients.resize(1 + t_count + c);
  second.coefficients.segment(1, t_count) = beta;
  const VectorXd offset = data.y - data.a * beta;
  const auto nuisance = ols_fit(exog, offset, "gest intercept");
  second.coefficients(0) = nuisance.coefficients(0);
  second.coefficients.tail(c) = nuisance.coefficients.tail(c);
  second.fitted = data.a * beta + nuisance.fitted;
  second.residuals = data.y - second.fitted;

  EstimateResult r;
  r.method = Method::gest_closed_form;
  r.instrument_models = std::move(inst.models);
  r.instrument_residuals = std::move(inst.residuals);
  r.instruments = std::move(inst.instruments);
  r.beta = beta;
  r.ate = sum_effects(beta);
  r.second_stage = std::move(second);
  return r;
}

/// R2SLS with a ridge second stage. The penalty is the first grid value whose effects
/// all moved by less than the tolerance from the previous grid value.
inline EstimateResult ridge_r2sls(const PanelDataset& data, const MethodSpec& spec) {
  detail::precheck(data, spec, Method::ridge_r2sls);
  auto inst = prepare_instruments(data, spec);
  auto fs = detail::linear_first_stage(data, inst.instruments, inst.controls);
  const auto design = detail::second_stage_design(fs.predicted, inst.controls);
  const Index t_count = data.periods();
  const Index c = inst.controls.cols();
  const auto& opts = *spec.ridge;

  RidgeTrace trace;
  std::optional<std::size_t> chosen;
  std::vector<LinearFit> fits;
  for (std::size_t k = 0; k < opts.grid.size(); ++k) {
    fits.push_back(ridge_fit(design, data.y, opts.grid[k], false, c, "ridge second stage"));
    trace.lambdas.push_back(opts.grid[k]);
    trace.betas.push_back(fits.back().coefficients.segment(1, t_count));
    if (opts.grid.size() == 1) {
      chosen = 0;
      break;
    }
    if (k > 0) {
      const double change = (trace.betas[k] - trace.betas[k - 1]).cwiseAbs().maxCoeff();
      if (change < opts.tolerance) {
        chosen = k;
        break;
      }
    }
  }
  if (!chosen) throw NoStableLambda();

  EstimateResult r;
  r.method = Method::ridge_r2sls;
  r.first_stage = std::move(fs.fits);
  r.instrument_models = std::move(inst.models);
  r.instrument_residuals = std::move(inst.residuals);
  r.instruments = std::move(inst.instruments);
  r.ridge_lambda = opts.grid[*chosen];
  r.ridge_trace = std::move(trace);
  return detail::finish(std::move(r), std::move(fits[*chosen]), t_count);
}

/// R2SLS with probit first-stage models; predicted treatments are fitted probabilities.
inline EstimateResult r2sls_probit(const PanelDataset& data, const MethodSpec& spec) {
  detail::precheck(data, spec, Method::r2sls_probit);
  auto inst = prepare_instruments(data, spec);
  MatrixXd predicted;
  auto fits = detail::probit_first_stage(data, inst.instruments, inst.controls, predicted);
  auto second = ols_fit(detail::second_stage_design(predicted, inst.controls), data.y, "second stage");
  EstimateResult r;
  r.method = Method::r2sls_probit;
  for (auto& f : fits) r.first_stage.emplace_back(std::move(f));
  r.instrument_models = std::move(inst.models);
  r.instrument_residuals = std::move(inst.residuals);
  r.instruments = std::move(inst.instruments);
  return detail::finish(std::move(r), std::move(second), data.periods());
}

/// Probit predictions of each A_t from the residualized instruments, then an all-OLS
/// 2SLS that uses those predictions as its instrument block.
inline EstimateResult r2sls_probit_trick(const PanelDataset& data, const MethodSpec& spec) {
  detail::precheck(data, spec, Method::r2sls_probit_trick);
  auto inst = prepare_instruments(data, spec);
  MatrixXd probabilities;
  auto stage_a = detail::probit_first_stage(data, inst.instruments, inst.controls, probabilities);

  InstrumentStage stage_b;
  stage_b.instruments = std::move(probabilities);
  stage_b.controls = inst.controls;
  stage_b.models = std::move(inst.models);
  stage_b.residuals = std::move(inst.residuals);
  auto r = detail::two_stage(data, Method::r2sls_probit_trick, std::move(stage_b));
  r.probit_stage = std::move(stage_a);
  return r;
}

inline EstimateResult estimate(const PanelDataset& data, const MethodSpec& spec) {
  switch (spec.method) {
    case Method::standard_2sls: return standard_2sls(data, spec);
    case Method::r2sls: return r2sls(data, spec);
    case Method::gest_closed_form: return gest_closed_form(data, spec);
    case Method::ridge_r2sls: return ridge_r2sls(data, spec);
    case Method::r2sls_probit: return r2sls_probit(data, spec);
    case Method::r2sls_probit_trick: return r2sls_probit_trick(data, spec);
  }
  throw InvalidConfig("method", "unhandled method");
}

}  // namespace tviv
