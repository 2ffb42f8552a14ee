#include <gtest/gtest.h>

#include <cmath>

#include "tviv/simulator.hpp"

using namespace tviv;

namespace {

double corr(const VectorXd& x, const VectorXd& y) {
  const VectorXd a = x.array() - x.mean();
  const VectorXd b = y.array() - y.mean();
  return a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm());
}

SimConfig config(Regime r, Index n, std::uint64_t seed, double alpha = 0.5) {
  SimConfig c;
  c.regime = r;
  c.n = n;
  c.seed = seed;
  c.alpha = alpha;
  return c;
}

}  // namespace

TEST(Simulate, SameSeedIsBitIdentical) {
  for (auto r : {Regime::simple, Regime::complex}) {
    const auto a = simulate(config(r, 300, 99)).data;
    const auto b = simulate(config(r, 300, 99)).data;
    EXPECT_EQ(a.z, b.z);
    EXPECT_EQ(a.a, b.a);
    EXPECT_EQ(a.y, b.y);
    EXPECT_EQ(a.confounders[0], b.confounders[0]);
  }
}

TEST(Simulate, DifferentSeedsDiffer) {
  const auto a = simulate(config(Regime::complex, 300, 1)).data;
  const auto b = simulate(config(Regime::complex, 300, 2)).data;
  EXPECT_NE(a.y, b.y);
  EXPECT_NE(a.z, b.z);
}

TEST(Simulate, ShapesAndValidity) {
  auto c = config(Regime::complex, 123, 3);
  c.periods = 5;
  const auto s = simulate(c);
  EXPECT_EQ(s.data.subjects(), 123);
  EXPECT_EQ(s.data.periods(), 5);
  EXPECT_EQ(s.data.confounder_count(), 1u);
  EXPECT_EQ(s.data.baseline.cols(), 0);
  EXPECT_TRUE(validate(s.data).empty());
  EXPECT_TRUE(((s.data.z.array() == 0) || (s.data.z.array() == 1)).all());
}

TEST(Simulate, InstrumentTreatmentCorrelationIncreasesWithAlpha) {
  double previous = -1.0;
  for (double alpha : {0.1, 0.3, 0.5, 0.9}) {
    double total = 0.0;
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
      const auto d = simulate(config(Regime::simple, 1000, derive_seed(31, rep), alpha)).data;
      for (Index t = 0; t < 3; ++t) total += corr(d.z.col(t), d.a.col(t));
    }
    const double mean = total / 150.0;
    EXPECT_GT(mean, previous) << "alpha " << alpha;
    previous = mean;
  }
}

TEST(TrueValues, DefaultEffectsAndDelta) {
  const auto t = true_values(config(Regime::simple, 10, 1, 0.5));
  ASSERT_EQ(t.true_beta.size(), 3);
  EXPECT_EQ(t.true_beta(0), 3.0);
  EXPECT_EQ(t.true_beta(2), 1.0);
  EXPECT_EQ(t.true_ate, 6.0);
  EXPECT_NEAR(t.delta(0), 0.6915, 1e-4);
}

TEST(TrueValues, CustomEffects) {
  auto c = config(Regime::complex, 10, 1);
  c.true_beta = VectorXd::Ones(3);
  EXPECT_EQ(true_values(c).true_ate, 3.0);
  c.true_beta = VectorXd::Ones(2);
  EXPECT_THROW(true_values(c), InvalidConfig);
}

TEST(Simulate, MarginalsAreInterior) {
  for (auto r : {Regime::simple, Regime::complex})
    for (double alpha : {0.1, 0.5, 0.9}) {
      const auto d = simulate(config(r, 20000, 5, alpha)).data;
      for (Index t = 0; t < 3; ++t) {
        EXPECT_GT(d.z.col(t).mean(), 0.05);
        EXPECT_LT(d.z.col(t).mean(), 0.95);
        EXPECT_GT(d.a.col(t).mean(), 0.05);
        EXPECT_LT(d.a.col(t).mean(), 0.95);
      }
    }
}

TEST(Simulate, ConfounderIsStationaryAr1) {
  const auto d = simulate(config(Regime::simple, 50000, 6)).data;
  const MatrixXd& l = d.confounders[0];
  for (Index t = 0; t < 3; ++t) {
    const VectorXd c = l.col(t).array() - l.col(t).mean();
    EXPECT_NEAR(c.squaredNorm() / 50000.0, 1.0, 0.03);
  }
  EXPECT_NEAR(corr(l.col(0), l.col(1)), 0.8, 0.01);
  EXPECT_NEAR(corr(l.col(1), l.col(2)), 0.8, 0.01);
}

TEST(Simulate, ComplexInstrumentDependsOnConfounder) {
  const auto simple = simulate(config(Regime::simple, 20000, 7)).data;
  const auto complex = simulate(config(Regime::complex, 20000, 7)).data;
  for (Index t = 0; t < 3; ++t) {
    EXPECT_LT(std::abs(corr(simple.z.col(t), simple.confounder(0, t + 1))), 0.03);
    EXPECT_GT(corr(complex.z.col(t), complex.confounder(0, t + 1)), 0.3);
  }
}

TEST(Simulate, SimpleRegimeNestsInComplexMechanism) {
  // The complex mechanism with the extra coefficients switched off is the simple regime.
  auto c = config(Regime::complex, 500, 8);
  auto coef = RegimeCoefficients::of(Regime::complex);
  coef.z_lag_a = 0.0;
  coef.z_confounder = 0.0;
  coef.a_lag_z = 0.0;
  const auto nested = simulate(c, coef).data;
  const auto simple = simulate(config(Regime::simple, 500, 8)).data;
  EXPECT_EQ(nested.z, simple.z);
  EXPECT_EQ(nested.a, simple.a);
  EXPECT_EQ(nested.y, simple.y);
}

TEST(Simulate, OutcomeMisspecificationAddsSquaredBaselineConfounder) {
  auto c = config(Regime::complex, 400, 9);
  const auto base = simulate(c).data;
  c.sigma_y = 1;
  const auto shifted = simulate(c).data;
  const VectorXd l1 = base.confounder(0, 1);
  EXPECT_LT((shifted.y - base.y - l1.cwiseAbs2()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(shifted.a, base.a);
}

TEST(Simulate, InvalidConfigNamesField) {
  auto c = config(Regime::simple, 100, 1, 1.5);
  try {
    simulate(c);
    FAIL();
  } catch (const InvalidConfig& e) {
    EXPECT_EQ(e.field(), "alpha");
  }
  c.alpha = 0.5;
  c.sigma_z = 2;
  EXPECT_THROW(simulate(c), InvalidConfig);
  c.sigma_z = 0;
  c.n = 1;
  EXPECT_THROW(simulate(c), InvalidConfig);
  EXPECT_THROW(parse_regime("medium"), InvalidConfig);
}
