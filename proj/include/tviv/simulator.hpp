#pragma once

// Data-generating mechanism for the simple and complex time-varying IV setups.
//
// Per subject and period t = 1..T (lags at t = 1 are zero):
//   L_t   stationary AR(1): L_1 ~ N(0,1), L_t = rho L_{t-1} + sqrt(1 - rho^2) e_t
//   U_t   ~ N(0,1), unmeasured
//   Z_t   ~ Bernoulli(expit(mu_Z - mean(mu_Z)))
//           mu_Z = Z_{t-1}                                      (simple)
//           mu_Z = Z_{t-1} + A_{t-1} + 3 L_t + s_Z L_t^2        (complex)
//   A_t   ~ Bernoulli(Phi(mu_A - mean(mu_A)) (1 - Delta) + Z_t Delta),  Delta = Phi(alpha)
//           mu_A = A_{t-1} + L_t + U_t                          (simple)
//           mu_A = Z_{t-1} + A_{t-1} + L_t + U_t + s_A L_t^2    (complex)
//   Y     ~ N(sum_t (U_t + beta_t A_t + L_t) + s_Y L_1^2, 1)
// Centering means are taken over the generated sample.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tviv/error.hpp"
#include "tviv/estimators.hpp"
#include "tviv/glm.hpp"
#include "tviv/panel.hpp"
#include "tviv/random.hpp"

namespace tviv {

enum class Regime { simple, complex };

inline std::string to_string(Regime r) { return r == Regime::simple ? "simple" : "complex"; }

inline Regime parse_regime(const std::string& s) {
  if (s == "simple") return Regime::simple;
  if (s == "complex") return Regime::complex;
  throw InvalidConfig("regime", "expected simple or complex, got '" + s + "'");
}

struct SimConfig {
  Regime regime = Regime::simple;
  Index n = 1000;
  Index periods = 3;
  double alpha = 0.5;
  int sigma_z = 0;
  int sigma_a = 0;
  int sigma_y = 0;
  std::uint64_t seed = 1;
  std::optional<VectorXd> true_beta;  // defaults to (T, T-1, ..., 1)
  double confounder_autocorrelation = 0.8;

  VectorXd effects() const {
    if (true_beta) return *true_beta;
    VectorXd b(periods);
    for (Index t = 0; t < periods; ++t) b(t) = static_cast<double>(periods - t);
    return b;
  }

  void check() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidConfig("alpha", "must lie in (0, 1)");
    if (n < 2) throw InvalidConfig("n", "need at least 2 subjects");
    if (periods < 1) throw InvalidConfig("periods", "must be >= 1");
    auto knob = [](int v, const char* name) {
      if (v != 0 && v != 1) throw InvalidConfig(name, "must be 0 or 1");
    };
    knob(sigma_z, "sigma_z");
    knob(sigma_a, "sigma_a");
    knob(sigma_y, "sigma_y");
    if (true_beta && true_beta->size() != periods) throw InvalidConfig("true_beta", "length must equal periods");
    if (!(std::abs(confounder_autocorrelation) < 1.0))
      throw InvalidConfig("confounder_autocorrelation", "must lie in (-1, 1)");
  }
};

struct SimTruth {
  VectorXd true_beta;
  double true_ate = 0.0;
  VectorXd delta;
};

/// Coefficients of the lagged and confounder terms in mu_Z and mu_A.
struct RegimeCoefficients {
  double z_lag_z = 1.0;
  double z_lag_a = 0.0;
  double z_confounder = 0.0;
  double a_lag_z = 0.0;
  double a_lag_a = 1.0;
  double a_confounder = 1.0;
  double a_unmeasured = 1.0;

  static RegimeCoefficients of(Regime r) {
    RegimeCoefficients c;
    if (r == Regime::complex) {
      c.z_lag_a = 1.0;
      c.z_confounder = 3.0;
      c.a_lag_z = 1.0;
    }
    return c;
  }
};

inline SimTruth true_values(const SimConfig& config) {
  config.check();
  SimTruth t;
  t.true_beta = config.effects();
  t.true_ate = sum_effects(t.true_beta);
  t.delta = VectorXd::Constant(config.periods, normal_cdf(config.alpha));
  return t;
}

struct Simulation {
  PanelDataset data;
  SimTruth truth;
};

/// Draws one dataset with explicit regime coefficients.
inline Simulation simulate(const SimConfig& config, const RegimeCoefficients& coef) {
  config.check();
  const Index n = config.n;
  const Index t_count = config.periods;
  const VectorXd beta = config.effects();
  const double delta = normal_cdf(config.alpha);
  const double rho = config.confounder_autocorrelation;
  const double innovation_sd = std::sqrt(1.0 - rho * rho);

  Rng rng(splitmix64(config.seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  PanelDataset d;
  d.z = MatrixXd::Zero(n, t_count);
  d.a = MatrixXd::Zero(n, t_count);
  d.confounders.assign(1, MatrixXd::Zero(n, t_count));
  d.confounder_names = {""};
  d.baseline.resize(n, 0);
  d.y.resize(n);
  MatrixXd& l = d.confounders[0];

  MatrixXd u(n, t_count);
  for (Index t = 0; t < t_count; ++t)
    for (Index i = 0; i < n; ++i) u(i, t) = normal(rng);

  VectorXd mu(n);
  for (Index t = 0; t < t_count; ++t) {
    for (Index i = 0; i < n; ++i) {
      const double e = normal(rng);
      l(i, t) = t == 0 ? e : rho * l(i, t - 1) + innovation_sd * e;
    }
    auto lag = [&](const MatrixXd& m, Index i) { return t == 0 ? 0.0 : m(i, t - 1); };

    for (Index i = 0; i < n; ++i) {
      const double li = l(i, t);
      mu(i) = coef.z_lag_z * lag(d.z, i) + coef.z_lag_a * lag(d.a, i) + coef.z_confounder * li +
              config.sigma_z * li * li;
    }
    double centre = mu.mean();
    for (Index i = 0; i < n; ++i) d.z(i, t) = uniform(rng) < expit(mu(i) - centre) ? 1.0 : 0.0;

    for (Index i = 0; i < n; ++i) {
      const double li = l(i, t);
      mu(i) = coef.a_lag_z * lag(d.z, i) + coef.a_lag_a * lag(d.a, i) + coef.a_confounder * li +
              coef.a_unmeasured * u(i, t) + config.sigma_a * li * li;
    }
    centre = mu.mean();
    for (Index i = 0; i < n; ++i) {
      const double p = normal_cdf(mu(i) - centre) * (1.0 - delta) + d.z(i, t) * delta;
      d.a(i, t) = uniform(rng) < p ? 1.0 : 0.0;
    }
  }

  for (Index i = 0; i < n; ++i) {
    double mean = config.sigma_y * l(i, 0) * l(i, 0);
    for (Index t = 0; t < t_count; ++t) mean += u(i, t) + beta(t) * d.a(i, t) + l(i, t);
    d.y(i) = mean + normal(rng);
  }
  return {std::move(d), true_values(config)};
}

inline Simulation simulate(const SimConfig& config) {
  return simulate(config, RegimeCoefficients::of(config.regime));
}

/// Method configuration used in the simulation study: instrument models condition on
/// Z_{t-1} (simple) or (Z_{t-1}, A_{t-1}, L_t) (complex); standard 2SLS controls for L_1.
inline MethodSpec study_method_spec(Method method, Regime regime, Index periods) {
  MethodSpec spec;
  spec.method = method;
  spec.conditioning =
      regime == Regime::simple ? ConditioningSet::simple(periods) : ConditioningSet::complex(periods, {0});
  if (method == Method::standard_2sls) spec.controls.confounders.push_back({0, 1});
  if (method == Method::ridge_r2sls) spec.ridge = RidgeOptions::defaults();
  return spec;
}

}  // namespace tviv
