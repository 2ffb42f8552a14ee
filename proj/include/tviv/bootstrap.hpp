#pragma once

// Subject-level percentile bootstrap for any estimator.

#include <Eigen/Dense>

#include <algorithm>
#include <concepts>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "tviv/error.hpp"
#include "tviv/estimators.hpp"
#include "tviv/panel.hpp"
#include "tviv/parallel.hpp"
#include "tviv/random.hpp"

namespace tviv {

struct BootstrapResult {
  EstimateResult point;
  MatrixXd replicates;  // successful resamples x (T + 1): beta_1..beta_T, ATE
  VectorXd ci_lower;
  VectorXd ci_upper;
  double level = 0.95;
  std::size_t b = 0;
  std::size_t failures = 0;
};

/// Sample quantile by linear interpolation between order statistics (type 7):
/// h = (N - 1) p, value = x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
inline double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidConfig("quantile", "no values");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

/// Row indices of resample `k`: n draws with replacement.
inline std::vector<Index> bootstrap_rows(Index n, std::uint64_t seed, std::size_t k) {
  Rng rng(derive_seed(seed, k));
  std::uniform_int_distribution<Index> pick(0, n - 1);
  std::vector<Index> rows(static_cast<std::size_t>(n));
  for (auto& r : rows) r = pick(rng);
  return rows;
}

/// `estimator` maps a PanelDataset to an EstimateResult. Resamples whose estimation
/// throws a tviv::Error are counted as failures and dropped.
template <class Estimator>
  requires std::invocable<Estimator&, const PanelDataset&>
BootstrapResult percentile_bootstrap(const PanelDataset& data, Estimator&& estimator, std::size_t b,
                                     double level, std::uint64_t seed, unsigned threads = 0) {
  if (b < 2) throw InvalidConfig("b", "need at least 2 resamples");
  if (!(level > 0.0 && level < 1.0)) throw InvalidConfig("level", "must lie in (0, 1)");

  BootstrapResult out;
  out.point = estimator(data);
  out.level = level;
  out.b = b;
  const Index width = out.point.beta.size() + 1;

  std::vector<std::optional<VectorXd>> draws(b);
  parallel_for(b, threads, [&](std::size_t k) {
    const auto resample = data.select_rows(bootstrap_rows(data.subjects(), seed, k));
    try {
      const auto est = estimator(resample);
      VectorXd row(width);
      row.head(width - 1) = est.beta;
      row(width - 1) = est.ate;
      draws[k] = std::move(row);
    } catch (const Error&) {
    }
  });

  std::size_t ok = 0;
  for (const auto& d : draws) ok += d.has_value();
  out.failures = b - ok;
  if (out.failures * 2 > b || ok == 0) throw TooManyFailures(out.failures, b);

  out.replicates.resize(static_cast<Index>(ok), width);
  Index r = 0;
  for (const auto& d : draws)
    if (d) out.replicates.row(r++) = d->transpose();

  const double tail = (1.0 - level) / 2.0;
  out.ci_lower.resize(width);
  out.ci_upper.resize(width);
  for (Index j = 0; j < width; ++j) {
    std::vector<double> col(out.replicates.col(j).data(), out.replicates.col(j).data() + ok);
    out.ci_lower(j) = quantile_type7(col, tail);
    out.ci_upper(j) = quantile_type7(std::move(col), 1.0 - tail);
  }
  return out;
}

inline BootstrapResult percentile_bootstrap(const PanelDataset& data, const MethodSpec& spec, std::size_t b,
                                            double level, std::uint64_t seed, unsigned threads = 0) {
  return percentile_bootstrap(
      data, [&spec](const PanelDataset& d) { return estimate(d, spec); }, b, level, seed, threads);
}

}  // namespace tviv
