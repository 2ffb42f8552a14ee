#pragma once

// Binary-response GLMs (logit and probit links) fitted by iteratively
// reweighted least squares. Each IRLS step is a weighted least-squares
// solve on sqrt(W) X, so the Fisher information is never inverted.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "tviv/error.hpp"
#include "tviv/regression.hpp"

namespace tviv {

enum class Link { logit, probit };

inline std::string to_string(Link link) { return link == Link::logit ? "logit" : "probit"; }

struct GlmOptions {
  double tolerance = 1e-8;      // on max |change in coefficient|
  int max_iterations = 100;
  double divergence_bound = 1e3;  // on max |coefficient|
};

struct GlmFit {
  VectorXd coefficients;
  VectorXd fitted_probabilities;
  Link link = Link::logit;
  bool converged = false;
  int iterations = 0;
};

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Standard normal density.
inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

namespace detail {

// Keeps fitted probabilities strictly inside (0, 1).
inline constexpr double kProbFloor = 1e-12;

inline double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

inline double inverse_link(Link link, double eta) {
  return clamp_prob(link == Link::logit ? expit(eta) : normal_cdf(eta));
}

// d mu / d eta
inline double link_derivative(Link link, double eta, double mu) {
  if (link == Link::logit) return mu * (1.0 - mu);
  return std::max(normal_pdf(eta), 1e-300);
}

inline double bernoulli_deviance(const VectorXd& y, const VectorXd& mu) {
  return -2.0 * (y.array() > 0.5).select(mu.array(), 1.0 - mu.array()).log().sum();
}

inline void inverse_link(Link link, const VectorXd& eta, VectorXd& mu) {
  if (link == Link::logit) {
    mu = (1.0 + (-eta.array()).exp()).inverse().max(kProbFloor).min(1.0 - kProbFloor).matrix();
    return;
  }
  mu.resize(eta.size());
  for (Index i = 0; i < eta.size(); ++i) mu(i) = inverse_link(link, eta(i));
}

}  // namespace detail

/// Score vector X'(y - mu) scaled by the link's weight, i.e. the gradient of the
/// Bernoulli log-likelihood with respect to the coefficients.
inline VectorXd glm_score(const DesignMatrix& x, const VectorXd& y, const GlmFit& fit) {
  const MatrixXd& xv = x.values();
  const VectorXd eta = xv * fit.coefficients;
  VectorXd g(y.size());
  for (Index i = 0; i < y.size(); ++i) {
    const double mu = fit.fitted_probabilities(i);
    const double d = detail::link_derivative(fit.link, eta(i), mu);
    g(i) = (y(i) - mu) * d / (mu * (1.0 - mu));
  }
  return xv.transpose() * g;
}

/// Maximum-likelihood fit of a binary response under `link`.
inline GlmFit glm_fit(const DesignMatrix& x, const VectorXd& y, Link link,
                      const GlmOptions& options = {}, const std::string& context = "glm") {
  detail::check_response(y, x.rows(), "response");
  const Index n = x.rows();
  const Index p = x.cols();
  double ones = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (y(i) != 0.0 && y(i) != 1.0) throw InvalidConfig("response", "glm response must be 0/1");
    ones += y(i);
  }
  if (ones == 0.0 || ones == static_cast<double>(n)) throw NoVariation();
  // Rank check once up front; the weighted designs share its column space.
  (void)detail::checked_qr(x.values(), context);

  const MatrixXd& xv = x.values();
  GlmFit fit;
  fit.link = link;
  fit.coefficients = VectorXd::Zero(p);
  // Start from mu = (y + 1/2) / 2; the first update is always taken in full.
  VectorXd mu = (y.array() + 0.5) / 2.0;
  const double start = link == Link::logit ? logit(0.75) : 0.6744897501960817;  // probit: Phi^{-1}(0.75)
  VectorXd eta = (y.array() > 0.5).select(VectorXd::Constant(n, start), VectorXd::Constant(n, -start));
  double deviance = std::numeric_limits<double>::infinity();

  MatrixXd wx(n, p);
  VectorXd wz(n), w(n);
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    fit.iterations = iter;
    const auto var = mu.array() * (1.0 - mu.array());
    if (link == Link::logit) {
      // d mu / d eta equals the variance, so the working weight is sqrt(var).
      w = var.sqrt().matrix();
      wz = (w.array() * eta.array() + (y.array() - mu.array()) / w.array()).matrix();
    } else {
      const auto d = ((-0.5 * eta.array().square()).exp() / std::sqrt(2.0 * std::numbers::pi)).max(1e-300);
      w = (d / var.sqrt()).matrix();
      wz = (w.array() * (eta.array() + (y.array() - mu.array()) / d)).matrix();
    }
    // Weighted normal equations; the design's rank was checked above.
    wx = xv.array().colwise() * w.array();
    const MatrixXd xtwx = wx.transpose() * wx;
    VectorXd proposal = xtwx.ldlt().solve(wx.transpose() * wz);
    if (!proposal.allFinite()) throw Separation(context + ": non-finite IRLS update");

    // Step-halving guards against deviance increases far from the optimum.
    VectorXd step = proposal - fit.coefficients;
    VectorXd next_eta, next_mu(n);
    double next_deviance = 0.0;
    for (int half = 0; half < 30; ++half) {
      next_eta = xv * (fit.coefficients + step);
      detail::inverse_link(link, next_eta, next_mu);
      next_deviance = detail::bernoulli_deviance(y, next_mu);
      if (next_deviance <= deviance * (1.0 + 1e-12) + 1e-12) break;
      step *= 0.5;
    }
    fit.coefficients += step;
    eta = std::move(next_eta);
    mu = next_mu;
    deviance = next_deviance;

    if (fit.coefficients.cwiseAbs().maxCoeff() > options.divergence_bound)
      throw Separation(context + ": coefficients diverged");
    if (step.cwiseAbs().maxCoeff() < options.tolerance) {
      fit.converged = true;
      break;
    }
  }
  // A fit that never settles while probabilities pile up at the boundary is separated.
  if (!fit.converged) {
    const bool at_boundary = ((mu.array() <= 1e-8) || (mu.array() >= 1.0 - 1e-8)).any();
    if (at_boundary) throw Separation(context + ": fitted probabilities reached 0 or 1");
  }
  fit.fitted_probabilities = mu;
  return fit;
}

}  // namespace tviv
