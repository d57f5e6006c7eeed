#ifndef ERPCA_PROX_HPP
#define ERPCA_PROX_HPP

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "erpca/error.hpp"
#include "erpca/types.hpp"

namespace erpca {

/// Singular values at or below this fraction of the largest one count as
/// zero when reporting rank.
inline constexpr double kRankTolerance = 1e-12;

template <typename Scalar>
struct ThinSvd {
  Matrix<Scalar> U;
  Vector<Scalar> singular_values;  // nonincreasing
  Matrix<Scalar> V;
};

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& x, const char* what) {
  if (!x.allFinite()) {
    fail(ErrorCode::Numeric, std::string(what) + ": non-finite entry in " + std::to_string(x.rows()) + "x" +
                                 std::to_string(x.cols()) + " matrix");
  }
}

template <typename Scalar>
void require_threshold(Scalar tau) {
  if (!(tau >= Scalar(0))) fail(ErrorCode::InvalidConfig, "threshold must be nonnegative");
}

}  // namespace detail

/// Entrywise shrinkage sgn(x) max(|x| - tau, 0), the proximal map of
/// tau * ||.||_1.
template <typename Derived>
Matrix<typename Derived::Scalar> soft_threshold(const Eigen::MatrixBase<Derived>& x,
                                                typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  detail::require_threshold(tau);
  return x.unaryExpr([tau](Scalar v) {
    const Scalar mag = std::abs(v) - tau;
    if (mag <= Scalar(0)) return Scalar(0);
    return v > Scalar(0) ? mag : -mag;
  });
}

template <typename Derived>
ThinSvd<typename Derived::Scalar> thin_svd(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  detail::require_finite(x, "thin_svd");
  Eigen::BDCSVD<Matrix<Scalar>> svd(x.derived(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    fail(ErrorCode::Numeric, "SVD failed on " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                                 " matrix");
  }
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

template <typename Scalar>
Index numeric_rank(const Vector<Scalar>& singular_values, double rel_tol = kRankTolerance) {
  if (singular_values.size() == 0) return 0;
  const Scalar cutoff = Scalar(rel_tol) * singular_values.maxCoeff();
  Index rank = 0;
  for (Index i = 0; i < singular_values.size(); ++i) {
    if (singular_values(i) > cutoff) ++rank;
  }
  return rank;
}

template <typename Derived>
Index numeric_rank(const Eigen::MatrixBase<Derived>& x, double rel_tol = kRankTolerance) {
  return numeric_rank(thin_svd(x).singular_values, rel_tol);
}

template <typename Derived>
typename Derived::Scalar nuclear_norm(const Eigen::MatrixBase<Derived>& x) {
  return thin_svd(x).singular_values.sum();
}

template <typename Derived>
typename Derived::Scalar l1_norm(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseAbs().sum();
}

template <typename Scalar>
struct SvtResult {
  Matrix<Scalar> value;
  Vector<Scalar> singular_values;  // after shrinkage, nonincreasing
  Index rank = 0;
};

/// Singular value thresholding U S_tau(Sigma) V^T, the proximal map of
/// tau * ||.||_*. Also returns the shrunk spectrum so callers can read the
/// nuclear norm of the result without a second factorisation.
template <typename Derived>
SvtResult<typename Derived::Scalar> svt_with_spectrum(const Eigen::MatrixBase<Derived>& x,
                                                      typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  detail::require_threshold(tau);
  const ThinSvd<Scalar> svd = thin_svd(x);
  SvtResult<Scalar> out;
  out.singular_values = (svd.singular_values.array() - tau).max(Scalar(0)).matrix();
  Index keep = 0;
  while (keep < out.singular_values.size() && out.singular_values(keep) > Scalar(0)) ++keep;
  out.rank = keep;
  out.value = svd.U.leftCols(keep) * out.singular_values.head(keep).asDiagonal() * svd.V.leftCols(keep).transpose();
  return out;
}

template <typename Derived>
Matrix<typename Derived::Scalar> svt(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar tau) {
  return svt_with_spectrum(x, tau).value;
}

/// Best rank-k approximation in Frobenius norm.
template <typename Derived>
Matrix<typename Derived::Scalar> truncate_rank(const Eigen::MatrixBase<Derived>& x, Index k) {
  const auto svd = thin_svd(x);
  k = std::clamp<Index>(k, 0, svd.singular_values.size());
  return svd.U.leftCols(k) * svd.singular_values.head(k).asDiagonal() * svd.V.leftCols(k).transpose();
}

}  // namespace erpca

#endif  // ERPCA_PROX_HPP
