#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>

#include "icmm/common.hpp"

namespace icmm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace detail {

// In-place lower Cholesky. Returns 0 on success, or the 1-based index of the
// first leading minor that is not positive definite.
inline int cholesky_in_place(MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  for (int j = 0; j < n; ++j) {
    double d = a(j, j);
    for (int k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return j + 1;
    d = std::sqrt(d);
    a(j, j) = d;
    for (int i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / d;
    }
  }
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < j; ++i) a(i, j) = 0.0;
  return 0;
}

inline bool is_symmetric(const MatrixXd& m, double rel_tol = 1e-10) {
  if (m.rows() != m.cols()) return false;
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

}  // namespace detail

// Lower Cholesky factor L with L*L^T = m. Throws NumericalError naming the
// first non-positive-definite leading minor.
inline MatrixXd cholesky(const MatrixXd& m) {
  if (!detail::is_symmetric(m))
    throw NumericalError("cholesky: matrix is not symmetric");
  MatrixXd l = m;
  if (int minor = detail::cholesky_in_place(l); minor != 0)
    throw NumericalError("cholesky: leading minor " + std::to_string(minor) +
                         " is not positive definite");
  return l;
}

// Symmetric positive-definite matrix. Construction validates symmetry
// (1e-10 relative tolerance) and positive definiteness via Cholesky.
class SpdMatrix {
 public:
  explicit SpdMatrix(MatrixXd m) : mat_(std::move(m)) {
    if (mat_.rows() != mat_.cols() || mat_.rows() < 1)
      throw NumericalError("SpdMatrix: matrix must be square and non-empty");
    if (!detail::is_symmetric(mat_))
      throw NumericalError("SpdMatrix: matrix is not symmetric");
    mat_ = ((mat_ + mat_.transpose()) / 2.0).eval();  // exact symmetry
    MatrixXd probe = mat_;
    if (int minor = detail::cholesky_in_place(probe); minor != 0)
      throw NumericalError("SpdMatrix: leading minor " + std::to_string(minor) +
                           " is not positive definite");
  }

  static SpdMatrix identity(int dim) {
    return SpdMatrix(MatrixXd::Identity(dim, dim));
  }

  int dim() const { return static_cast<int>(mat_.rows()); }
  const MatrixXd& mat() const { return mat_; }
  double operator()(int i, int j) const { return mat_(i, j); }

 private:
  MatrixXd mat_;
};

inline MatrixXd cholesky(const SpdMatrix& m) { return cholesky(m.mat()); }

}  // namespace icmm
