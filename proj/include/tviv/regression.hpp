#pragma once

// Dense least-squares kernels: OLS, ridge, projection matrices.
//
// Every solve goes through a column-pivoted Householder QR of the design;
// the normal equations are never formed. Rank is judged on the singular
// values of the triangular factor, which equal those of the design.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "tviv/error.hpp"

namespace tviv {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Relative singular-value cutoff below which a design is rank deficient.
inline constexpr double kRankTol = 1e-10;

namespace detail {

inline bool all_finite(const MatrixXd& m) { return m.allFinite(); }

}  // namespace detail

/// Regressor matrix with an optional explicit intercept in column 0.
class DesignMatrix {
 public:
  DesignMatrix() = default;

  explicit DesignMatrix(MatrixXd values, bool has_intercept = false)
      : values_(std::move(values)), intercept_(has_intercept) {
    if (!detail::all_finite(values_)) throw NonFinite("design matrix");
    if (intercept_) {
      if (values_.cols() == 0 || !(values_.col(0).array() == 1.0).all())
        throw InvalidConfig("design", "intercept column must be column 0 and all ones");
    }
  }

  /// Prepends a column of ones to `columns`.
  static DesignMatrix with_intercept(const MatrixXd& columns) {
    MatrixXd v(columns.rows(), columns.cols() + 1);
    v.col(0).setOnes();
    v.rightCols(columns.cols()) = columns;
    return DesignMatrix(std::move(v), true);
  }

  static DesignMatrix intercept_only(Index n) { return DesignMatrix(MatrixXd::Ones(n, 1), true); }

  const MatrixXd& values() const noexcept { return values_; }
  Index rows() const noexcept { return values_.rows(); }
  Index cols() const noexcept { return values_.cols(); }
  bool has_intercept() const noexcept { return intercept_; }

 private:
  MatrixXd values_;
  bool intercept_ = false;
};

struct LinearFit {
  VectorXd coefficients;
  VectorXd residuals;
  VectorXd fitted;

  double rss() const { return residuals.squaredNorm(); }
};

namespace detail {

using PivotedQr = Eigen::ColPivHouseholderQR<MatrixXd>;

/// Factorizes `x` and throws RankDeficient (naming the original column index of the
/// weakest pivot) when its smallest singular value is below kRankTol times the largest.
inline PivotedQr checked_qr(const MatrixXd& x, const std::string& context) {
  const Index p = x.cols();
  if (p == 0) throw InvalidConfig("design", "no columns");
  if (x.rows() < p) throw RankDeficient(static_cast<std::size_t>(p - 1), context + " (n < p)");
  PivotedQr qr(x);
  MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<MatrixXd> svd(r);
  const VectorXd& sv = svd.singularValues();
  const double largest = sv(0);
  const double smallest = sv(p - 1);
  if (!(largest > 0.0) || smallest <= kRankTol * largest) {
    // The weakest pivot is the last column in the pivot order.
    const auto col = static_cast<std::size_t>(qr.colsPermutation().indices()(p - 1));
    throw RankDeficient(col, context);
  }
  return qr;
}

inline void check_response(const VectorXd& y, Index n, const char* what) {
  if (y.size() != n) throw InvalidConfig(what, "response length does not match design rows");
  if (!y.allFinite()) throw NonFinite(what);
}

}  // namespace detail

/// Ordinary least squares of `y` on the columns of `x`.
inline LinearFit ols_fit(const DesignMatrix& x, const VectorXd& y,
                         const std::string& context = "ols") {
  detail::check_response(y, x.rows(), "response");
  const auto qr = detail::checked_qr(x.values(), context);
  LinearFit fit;
  fit.coefficients = qr.solve(y);
  fit.fitted = x.values() * fit.coefficients;
  fit.residuals = y - fit.fitted;
  return fit;
}

/// Ridge regression: minimizes |y - Xb|^2 + lambda * sum of squared penalized coefficients.
/// The intercept (column 0 of an intercept-bearing design) is left unpenalized unless
/// `penalize_intercept` is set. Solved as an augmented least-squares problem.
/// `unpenalized_tail` exempts that many trailing columns (control variables) as well.
inline LinearFit ridge_fit(const DesignMatrix& x, const VectorXd& y, double lambda,
                           bool penalize_intercept = false, Index unpenalized_tail = 0,
                           const std::string& context = "ridge") {
  if (!std::isfinite(lambda)) throw NonFinite("ridge penalty");
  if (lambda < 0.0) throw InvalidConfig("lambda", "must be non-negative");
  if (lambda == 0.0) return ols_fit(x, y, context);
  detail::check_response(y, x.rows(), "response");

  const Index n = x.rows();
  const Index p = x.cols();
  MatrixXd aug = MatrixXd::Zero(n + p, p);
  aug.topRows(n) = x.values();
  const double root = std::sqrt(lambda);
  for (Index j = 0; j < p; ++j) {
    const bool is_intercept = x.has_intercept() && j == 0;
    const bool exempt = j >= p - unpenalized_tail;
    if ((is_intercept && !penalize_intercept) || exempt) continue;
    aug(n + j, j) = root;
  }
  VectorXd rhs = VectorXd::Zero(n + p);
  rhs.head(n) = y;

  const auto qr = detail::checked_qr(aug, context);
  LinearFit fit;
  fit.coefficients = qr.solve(rhs);
  fit.fitted = x.values() * fit.coefficients;
  fit.residuals = y - fit.fitted;
  return fit;
}

/// Orthogonal projector onto the column space of `z`: Z (Z'Z)^{-1} Z'.
inline MatrixXd projection_matrix(const DesignMatrix& z) {
  const auto qr = detail::checked_qr(z.values(), "projection");
  const Index n = z.rows();
  const Index p = z.cols();
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, p);
  return q * q.transpose();
}

/// Least-squares fitted values that tolerate rank deficiency (minimum-norm solution).
/// Used where only the projection matters and collinear instruments are expected.
inline VectorXd projected_values(const MatrixXd& x, const VectorXd& y) {
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod;
  cod.setThreshold(kRankTol);
  cod.compute(x);
  return x * cod.solve(y);
}

}  // namespace tviv
