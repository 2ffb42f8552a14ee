#include <gtest/gtest.h>

#include <atomic>
#include <numeric>

#include "support.hpp"
#include "tviv/bootstrap.hpp"
#include "tviv/simulator.hpp"

using namespace tviv;

namespace {

PanelDataset sim(Index n, std::uint64_t seed) {
  SimConfig c;
  c.regime = Regime::complex;
  c.n = n;
  c.seed = seed;
  return simulate(c).data;
}

EstimateResult constant_estimate(const PanelDataset&) {
  EstimateResult r;
  r.beta = VectorXd::Constant(2, 5.0);
  r.ate = 10.0;
  return r;
}

// Mean outcome as a one-parameter "estimator".
EstimateResult mean_outcome(const PanelDataset& d) {
  EstimateResult r;
  r.beta = VectorXd::Constant(1, d.y.mean());
  r.ate = r.beta(0);
  return r;
}

}  // namespace

TEST(Quantile, Type7Oracle) {
  std::vector<double> v(1000);
  std::iota(v.begin(), v.end(), 1.0);
  EXPECT_NEAR(quantile_type7(v, 0.025), 25.975, 1e-12);
  EXPECT_NEAR(quantile_type7(v, 0.975), 975.025, 1e-12);
  EXPECT_EQ(quantile_type7(v, 0.0), 1.0);
  EXPECT_EQ(quantile_type7(v, 1.0), 1000.0);
  EXPECT_EQ(quantile_type7({3.0, 1.0, 2.0}, 0.5), 2.0);
  EXPECT_EQ(quantile_type7({7.0}, 0.3), 7.0);
  EXPECT_THROW(quantile_type7({}, 0.5), InvalidConfig);
}

TEST(BootstrapRows, DeterministicAndInRange) {
  const auto a = bootstrap_rows(50, 9, 3);
  EXPECT_EQ(a, bootstrap_rows(50, 9, 3));
  EXPECT_NE(a, bootstrap_rows(50, 9, 4));
  for (auto r : a) {
    EXPECT_GE(r, 0);
    EXPECT_LT(r, 50);
  }
}

TEST(Bootstrap, ConstantEstimatorGivesDegenerateInterval) {
  const auto d = sim(40, 1);
  const auto b = percentile_bootstrap(d, constant_estimate, 50, 0.95, 1);
  EXPECT_EQ(b.ci_lower, b.ci_upper);
  EXPECT_EQ(b.ci_lower(0), 5.0);
  EXPECT_EQ(b.ci_upper(2), 10.0);
  EXPECT_EQ(b.replicates.rows(), 50);
  EXPECT_EQ(b.replicates.cols(), 3);
}

TEST(Bootstrap, SameSeedSameInterval) {
  const auto d = sim(300, 2);
  const auto spec = study_method_spec(Method::r2sls, Regime::complex, 3);
  const auto a = percentile_bootstrap(d, spec, 30, 0.95, 77, 1);
  const auto b = percentile_bootstrap(d, spec, 30, 0.95, 77, 1);
  EXPECT_EQ(a.replicates, b.replicates);
  EXPECT_EQ(a.ci_lower, b.ci_lower);
  const auto c = percentile_bootstrap(d, spec, 30, 0.95, 78, 1);
  EXPECT_NE(a.replicates, c.replicates);
}

TEST(Bootstrap, ThreadCountDoesNotChangeResult) {
  const auto d = sim(300, 3);
  const auto spec = study_method_spec(Method::r2sls, Regime::complex, 3);
  const auto one = percentile_bootstrap(d, spec, 24, 0.9, 5, 1);
  const auto four = percentile_bootstrap(d, spec, 24, 0.9, 5, 4);
  EXPECT_EQ(one.replicates, four.replicates);
  EXPECT_EQ(one.ci_upper, four.ci_upper);
}

TEST(Bootstrap, ResamplesKeepSubjectsIntact) {
  // Each resample row must be an existing subject: (z, a, L, y) travel together.
  const auto d = sim(60, 4);
  for (std::size_t k = 0; k < 5; ++k) {
    const auto rows = bootstrap_rows(60, 11, k);
    const auto r = d.select_rows(rows);
    for (Index i = 0; i < 60; ++i) {
      const Index src = rows[static_cast<std::size_t>(i)];
      EXPECT_EQ(r.y(i), d.y(src));
      EXPECT_EQ(r.z.row(i), d.z.row(src));
      EXPECT_EQ(r.a.row(i), d.a.row(src));
      EXPECT_EQ(r.confounders[0].row(i), d.confounders[0].row(src));
    }
  }
}

TEST(Bootstrap, MeanOfOutcomeIntervalMatchesReplicateQuantiles) {
  const auto d = sim(200, 5);
  const auto b = percentile_bootstrap(d, mean_outcome, 400, 0.9, 3);
  std::vector<double> reps;
  for (std::size_t k = 0; k < 400; ++k) reps.push_back(d.select_rows(bootstrap_rows(200, 3, k)).y.mean());
  EXPECT_NEAR(b.ci_lower(0), quantile_type7(reps, 0.05), 1e-12);
  EXPECT_NEAR(b.ci_upper(0), quantile_type7(reps, 0.95), 1e-12);
  EXPECT_EQ(b.point.beta(0), d.y.mean());
}

TEST(Bootstrap, HigherLevelWidensInterval) {
  const auto d = sim(200, 6);
  const auto spec = study_method_spec(Method::r2sls, Regime::complex, 3);
  const auto narrow = percentile_bootstrap(d, spec, 60, 0.8, 9);
  const auto wide = percentile_bootstrap(d, spec, 60, 0.95, 9);
  for (Index j = 0; j < 4; ++j) {
    EXPECT_LE(wide.ci_lower(j), narrow.ci_lower(j));
    EXPECT_GE(wide.ci_upper(j), narrow.ci_upper(j));
  }
}

TEST(Bootstrap, FailuresAreDroppedAndCounted) {
  const auto d = sim(100, 7);
  std::atomic<int> calls{0};
  auto flaky = [&](const PanelDataset& x) {
    // Fails on roughly a third of resamples, keyed on the data so it is thread-safe.
    if (calls++ > 0 && static_cast<long>(std::abs(x.y.sum()) * 1000) % 3 == 0) throw NoVariation();
    return mean_outcome(x);
  };
  const auto b = percentile_bootstrap(d, flaky, 90, 0.95, 1, 1);
  EXPECT_GT(b.failures, 0u);
  EXPECT_EQ(static_cast<std::size_t>(b.replicates.rows()), b.b - b.failures);
}

TEST(Bootstrap, TooManyFailures) {
  const auto d = sim(50, 8);
  bool first = true;
  auto failing = [&](const PanelDataset& x) {
    if (!first) throw Separation("always");
    first = false;
    return mean_outcome(x);
  };
  EXPECT_THROW(percentile_bootstrap(d, failing, 20, 0.95, 1, 1), TooManyFailures);
}

TEST(Bootstrap, RejectsBadArguments) {
  const auto d = sim(20, 9);
  EXPECT_THROW(percentile_bootstrap(d, mean_outcome, 1, 0.95, 1), InvalidConfig);
  EXPECT_THROW(percentile_bootstrap(d, mean_outcome, 10, 1.0, 1), InvalidConfig);
}
