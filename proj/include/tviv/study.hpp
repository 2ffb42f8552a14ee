#pragma once

// Monte Carlo study: replication loop, performance metrics and scenario grids.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tviv/bootstrap.hpp"
#include "tviv/error.hpp"
#include "tviv/estimators.hpp"
#include "tviv/parallel.hpp"
#include "tviv/random.hpp"
#include "tviv/simulator.hpp"

namespace tviv {

using Estimator = std::function<EstimateResult(const PanelDataset&)>;

struct StudyMethod {
  std::string name;
  Estimator estimator;

  static StudyMethod of(MethodSpec spec) {
    auto name = to_string(spec.method);
    return {std::move(name), [spec = std::move(spec)](const PanelDataset& d) { return estimate(d, spec); }};
  }
};

struct Scenario {
  SimConfig sim;  // sim.seed is ignored; replication r uses derive_seed(base_seed, r)
  std::vector<StudyMethod> methods;
  std::size_t n_reps = 200;
  std::size_t b_boot = 200;  // 0 disables the bootstrap (no coverage)
  std::uint64_t base_seed = 1;
  double level = 0.95;
  double max_failure_rate = 0.2;

  void check() const {
    sim.check();
    if (n_reps < 2) throw InvalidConfig("n_reps", "need at least 2 replications");
    if (methods.empty()) throw InvalidConfig("methods", "no methods");
    if (b_boot == 1) throw InvalidConfig("b_boot", "use 0 (no bootstrap) or at least 2");
    if (!(level > 0.0 && level < 1.0)) throw InvalidConfig("level", "must lie in (0, 1)");
  }
};

struct StudyMetrics {
  std::string method;
  std::string target;      // "ATE" or "beta_<t>"
  double truth = 0.0;
  double abs_bias = 0.0;   // |mean(estimate) - truth|
  double rmse = 0.0;
  double mce = 0.0;        // sd(estimate) / sqrt(n_successful)
  std::optional<double> coverage;  // percent
  double mean_abs_error = 0.0;     // mean |estimate - truth|
  std::size_t n_successful = 0;
  std::size_t n_failed = 0;
};

inline std::string target_name(Index j, Index t_count) {
  return j == t_count ? std::string("ATE") : "beta_" + std::to_string(j + 1);
}

/// Metrics of one target from the successful replications' estimates.
/// `intervals`, if given, holds the matching (lower, upper) bounds.
inline StudyMetrics compute_metrics(std::string method, std::string target, double truth,
                                    const std::vector<double>& estimates,
                                    const std::vector<std::pair<double, double>>* intervals = nullptr,
                                    std::size_t failed = 0) {
  StudyMetrics m;
  m.method = std::move(method);
  m.target = std::move(target);
  m.truth = truth;
  m.n_successful = estimates.size();
  m.n_failed = failed;
  const auto k = static_cast<double>(estimates.size());
  if (estimates.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    m.abs_bias = m.rmse = m.mce = m.mean_abs_error = nan;
    return m;
  }
  double mean = 0.0, sq = 0.0, absdev = 0.0;
  for (double e : estimates) {
    mean += e;
    sq += (e - truth) * (e - truth);
    absdev += std::abs(e - truth);
  }
  mean /= k;
  double var = 0.0;
  for (double e : estimates) var += (e - mean) * (e - mean);
  m.abs_bias = std::abs(mean - truth);
  m.rmse = std::sqrt(sq / k);
  m.mean_abs_error = absdev / k;
  m.mce = estimates.size() > 1 ? std::sqrt(var / (k - 1.0)) / std::sqrt(k) : 0.0;
  if (intervals) {
    std::size_t hit = 0;
    for (const auto& [lo, hi] : *intervals) hit += (lo <= truth && truth <= hi);
    m.coverage = 100.0 * static_cast<double>(hit) / k;
  }
  return m;
}

/// Per-method metrics in method order; within a method beta_1..beta_T then ATE.
inline std::vector<StudyMetrics> run_scenario(const Scenario& scenario, unsigned threads = 0) {
  scenario.check();
  const Index t_count = scenario.sim.periods;
  const std::size_t reps = scenario.n_reps;
  const std::size_t n_methods = scenario.methods.size();
  const SimTruth truth = true_values(scenario.sim);

  struct Cell {
    VectorXd estimate;  // beta_1..beta_T, ATE
    VectorXd lower, upper;
  };
  std::vector<std::optional<Cell>> cells(reps * n_methods);

  parallel_for(reps, threads, [&](std::size_t r) {
    SimConfig cfg = scenario.sim;
    cfg.seed = derive_seed(scenario.base_seed, r);
    const auto sim = simulate(cfg);
    for (std::size_t m = 0; m < n_methods; ++m) {
      const auto& est = scenario.methods[m].estimator;
      try {
        Cell cell;
        if (scenario.b_boot > 0) {
          const auto boot = percentile_bootstrap(sim.data, est, scenario.b_boot, scenario.level,
                                                 derive_seed(cfg.seed, m + 1), 1);
          cell.estimate.resize(t_count + 1);
          cell.estimate << boot.point.beta, boot.point.ate;
          cell.lower = boot.ci_lower;
          cell.upper = boot.ci_upper;
        } else {
          const auto point = est(sim.data);
          cell.estimate.resize(t_count + 1);
          cell.estimate << point.beta, point.ate;
        }
        cells[r * n_methods + m] = std::move(cell);
      } catch (const Error&) {
      }
    }
  });

  std::vector<StudyMetrics> out;
  for (std::size_t m = 0; m < n_methods; ++m) {
    const auto& name = scenario.methods[m].name;
    std::size_t failed = 0;
    for (std::size_t r = 0; r < reps; ++r) failed += !cells[r * n_methods + m].has_value();
    if (static_cast<double>(failed) > scenario.max_failure_rate * static_cast<double>(reps))
      throw ScenarioFailed(name + ": " + std::to_string(failed) + " of " + std::to_string(reps) +
                           " replications failed");
    for (Index j = 0; j <= t_count; ++j) {
      std::vector<double> est;
      std::vector<std::pair<double, double>> ci;
      for (std::size_t r = 0; r < reps; ++r) {
        const auto& c = cells[r * n_methods + m];
        if (!c) continue;
        est.push_back(c->estimate(j));
        if (scenario.b_boot > 0) ci.emplace_back(c->lower(j), c->upper(j));
      }
      const double target_truth = j == t_count ? truth.true_ate : truth.true_beta(j);
      out.push_back(compute_metrics(name, target_name(j, t_count), target_truth, est,
                                    scenario.b_boot > 0 ? &ci : nullptr, failed));
    }
  }
  return out;
}

struct GridRow {
  std::string scenario;  // free-form label
  Regime regime = Regime::simple;
  int sigma_z = 0, sigma_a = 0, sigma_y = 0;
  Index n = 0;
  double alpha = 0.0;
  StudyMetrics metrics;
  std::string status = "ok";
};

struct LabelledScenario {
  std::string label;
  Scenario scenario;
};

/// Runs every scenario in order. A failed scenario yields one NaN row per method whose
/// status carries the error, and the grid continues.
inline std::vector<GridRow> run_grid(const std::vector<LabelledScenario>& scenarios, unsigned threads = 0) {
  if (scenarios.empty()) throw InvalidConfig("scenarios", "empty grid");
  std::vector<GridRow> rows;
  for (const auto& [label, sc] : scenarios) {
    GridRow base;
    base.scenario = label;
    base.regime = sc.sim.regime;
    base.sigma_z = sc.sim.sigma_z;
    base.sigma_a = sc.sim.sigma_a;
    base.sigma_y = sc.sim.sigma_y;
    base.n = sc.sim.n;
    base.alpha = sc.sim.alpha;
    try {
      for (auto& m : run_scenario(sc, threads)) {
        GridRow row = base;
        row.metrics = std::move(m);
        rows.push_back(std::move(row));
      }
    } catch (const ScenarioFailed& e) {
      for (const auto& method : sc.methods) {
        GridRow row = base;
        row.metrics = compute_metrics(method.name, "ATE", std::numeric_limits<double>::quiet_NaN(), {});
        row.status = std::string("failed: ") + e.what();
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

}  // namespace tviv
