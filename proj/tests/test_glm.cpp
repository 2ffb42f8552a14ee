#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "tviv/glm.hpp"

using namespace tviv;
using tviv::testing::random_normal;

namespace {

VectorXd bernoulli_sample(const MatrixXd& x, const VectorXd& beta, Link link, std::uint64_t seed) {
  Rng rng(splitmix64(seed));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VectorXd y(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    const double eta = x.row(i).dot(beta);
    const double p = link == Link::logit ? 1.0 / (1.0 + std::exp(-eta)) : 0.5 * std::erfc(-eta / std::sqrt(2.0));
    y(i) = u(rng) < p ? 1.0 : 0.0;
  }
  return y;
}

// Independent oracle: plain Newton-Raphson on the log-likelihood with the exact Hessian,
// starting from zero, no step control.
VectorXd newton_logit(const MatrixXd& x, const VectorXd& y) {
  VectorXd b = VectorXd::Zero(x.cols());
  for (int it = 0; it < 100; ++it) {
    VectorXd grad = VectorXd::Zero(x.cols());
    MatrixXd hess = MatrixXd::Zero(x.cols(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-x.row(i).dot(b)));
      grad += (y(i) - p) * x.row(i).transpose();
      hess -= p * (1 - p) * x.row(i).transpose() * x.row(i);
    }
    const VectorXd step = hess.inverse() * grad;
    b -= step;
    if (step.cwiseAbs().maxCoeff() < 1e-13) break;
  }
  return b;
}

// Newton-Raphson for probit with the exact (observed-information) Hessian.
VectorXd newton_probit(const MatrixXd& x, const VectorXd& y) {
  auto pdf = [](double e) { return std::exp(-0.5 * e * e) / std::sqrt(2.0 * M_PI); };
  auto cdf = [](double e) { return 0.5 * std::erfc(-e / std::sqrt(2.0)); };
  VectorXd b = VectorXd::Zero(x.cols());
  for (int it = 0; it < 100; ++it) {
    VectorXd grad = VectorXd::Zero(x.cols());
    MatrixXd hess = MatrixXd::Zero(x.cols(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
      const double e = x.row(i).dot(b);
      const double f = pdf(e), F = cdf(e);
      // d/de log-lik: y f/F - (1-y) f/(1-F)
      const double g = y(i) * f / F - (1 - y(i)) * f / (1 - F);
      const double h = y(i) * (-e * f / F - f * f / (F * F)) + (1 - y(i)) * (e * f / (1 - F) - f * f / ((1 - F) * (1 - F)));
      grad += g * x.row(i).transpose();
      hess += h * x.row(i).transpose() * x.row(i);
    }
    const VectorXd step = hess.inverse() * grad;
    b -= step;
    if (step.cwiseAbs().maxCoeff() < 1e-13) break;
  }
  return b;
}

}  // namespace

TEST(GlmFit, InterceptOnlyLogitIsLogitOfMean) {
  VectorXd y = VectorXd::Zero(40);
  y.head(10).setOnes();
  const auto fit = glm_fit(DesignMatrix::intercept_only(40), y, Link::logit);
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.coefficients(0), std::log(0.25 / 0.75), 1e-8);
  EXPECT_NEAR(fit.coefficients(0), -1.0986, 1e-4);
}

TEST(GlmFit, InterceptOnlyProbitBalancedIsZero) {
  VectorXd y = VectorXd::Zero(30);
  y.head(15).setOnes();
  const auto fit = glm_fit(DesignMatrix::intercept_only(30), y, Link::probit);
  EXPECT_NEAR(fit.coefficients(0), 0.0, 1e-8);
}

TEST(GlmFit, InterceptOnlyFittedMeanEqualsResponseMean) {
  for (Link link : {Link::logit, Link::probit}) {
    const VectorXd y = bernoulli_sample(MatrixXd::Ones(123, 1), VectorXd::Constant(1, 0.4), link, 9);
    const auto fit = glm_fit(DesignMatrix::intercept_only(123), y, link);
    EXPECT_NEAR(fit.fitted_probabilities.mean(), y.mean(), 1e-8);
  }
}

TEST(GlmFit, LogitMatchesNewtonOracle) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto x = DesignMatrix::with_intercept(random_normal(200, 1, seed));
    VectorXd beta(2);
    beta << -0.3, 1.2;
    const VectorXd y = bernoulli_sample(x.values(), beta, Link::logit, seed + 1000);
    const auto fit = glm_fit(x, y, Link::logit);
    EXPECT_TRUE(fit.converged);
    EXPECT_LT((fit.coefficients - newton_logit(x.values(), y)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(GlmFit, ProbitMatchesNewtonOracle) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto x = DesignMatrix::with_intercept(random_normal(200, 1, seed + 20));
    VectorXd beta(2);
    beta << 0.2, -0.8;
    const VectorXd y = bernoulli_sample(x.values(), beta, Link::probit, seed + 2000);
    const auto fit = glm_fit(x, y, Link::probit);
    EXPECT_TRUE(fit.converged);
    EXPECT_LT((fit.coefficients - newton_probit(x.values(), y)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(GlmFit, ScoreVanishesAndProbabilitiesInterior) {
  for (Link link : {Link::logit, Link::probit}) {
    const auto x = DesignMatrix::with_intercept(random_normal(500, 3, 77));
    VectorXd beta(4);
    beta << 0.1, 0.5, -0.5, 1.0;
    const VectorXd y = bernoulli_sample(x.values(), beta, link, 78);
    const auto fit = glm_fit(x, y, link);
    EXPECT_TRUE(fit.converged);
    EXPECT_LT(glm_score(x, y, fit).norm(), 1e-6);
    EXPECT_TRUE((fit.fitted_probabilities.array() > 0.0).all());
    EXPECT_TRUE((fit.fitted_probabilities.array() < 1.0).all());
    EXPECT_LE(fit.iterations, 100);
  }
}

TEST(GlmFit, ConstantResponseIsNoVariation) {
  EXPECT_THROW(glm_fit(DesignMatrix::intercept_only(10), VectorXd::Ones(10), Link::logit), NoVariation);
  EXPECT_THROW(glm_fit(DesignMatrix::intercept_only(10), VectorXd::Zero(10), Link::probit), NoVariation);
}

TEST(GlmFit, NonBinaryResponseRejected) {
  VectorXd y = VectorXd::Zero(10);
  y(0) = 0.5;
  EXPECT_THROW(glm_fit(DesignMatrix::intercept_only(10), y, Link::logit), InvalidConfig);
}

TEST(GlmFit, PerfectSeparationDetected) {
  MatrixXd c(20, 1);
  VectorXd y(20);
  for (Index i = 0; i < 20; ++i) {
    c(i, 0) = static_cast<double>(i) - 9.5;
    y(i) = i >= 10 ? 1.0 : 0.0;
  }
  for (Link link : {Link::logit, Link::probit})
    EXPECT_THROW(glm_fit(DesignMatrix::with_intercept(c), y, link), Separation);
}

TEST(GlmFit, RankDeficientDesign) {
  MatrixXd c = random_normal(50, 2, 3);
  c.col(1) = c.col(0);
  VectorXd y = VectorXd::Zero(50);
  y.head(20).setOnes();
  EXPECT_THROW(glm_fit(DesignMatrix::with_intercept(c), y, Link::logit), RankDeficient);
}

TEST(LinkFunctions, Values) {
  EXPECT_NEAR(normal_cdf(0.5), 0.6915, 1e-4);
  EXPECT_NEAR(normal_cdf(0.0), 0.5, 1e-15);
  EXPECT_NEAR(expit(logit(0.3)), 0.3, 1e-15);
  EXPECT_NEAR(expit(-800.0), 0.0, 1e-300);
  EXPECT_NEAR(expit(800.0), 1.0, 1e-15);
}
