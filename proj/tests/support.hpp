#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>

#include "tviv/panel.hpp"
#include "tviv/random.hpp"

namespace tviv::testing {

inline MatrixXd random_normal(Index rows, Index cols, std::uint64_t seed) {
  Rng rng(splitmix64(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

inline VectorXd random_vector(Index n, std::uint64_t seed) { return random_normal(n, 1, seed).col(0); }

/// Max-abs difference scaled by the larger magnitude (floored at 1).
inline double rel_diff(const MatrixXd& a, const MatrixXd& b) {
  const double scale = std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

/// Panel with continuous instruments that drive binary treatments, no confounders.
inline PanelDataset toy_panel(Index n, Index t_count, std::uint64_t seed, double strength = 1.0) {
  Rng rng(splitmix64(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  PanelDataset d;
  d.z.resize(n, t_count);
  d.a.resize(n, t_count);
  d.y.resize(n);
  d.baseline.resize(n, 0);
  for (Index i = 0; i < n; ++i) {
    const double u = normal(rng);
    double y = u;
    for (Index t = 0; t < t_count; ++t) {
      d.z(i, t) = normal(rng);
      const double p = 1.0 / (1.0 + std::exp(-(strength * d.z(i, t) + u)));
      d.a(i, t) = uniform(rng) < p ? 1.0 : 0.0;
      y += static_cast<double>(t_count - t) * d.a(i, t);
    }
    d.y(i) = y + normal(rng);
  }
  return d;
}

}  // namespace tviv::testing
