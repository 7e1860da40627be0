#pragma once

// The two objectives minimized by the soft SVD:
//   ridge form    : 1/2 ||X - A B^T||_F^2 + lambda/2 (||A||_F^2 + ||B||_F^2)
//   nuclear form  : 1/2 ||X - Z||_F^2 + lambda ||Z||_*,   Z = A B^T
// X is never densified: the residual uses
//   ||X - AB^T||^2 = ||X||^2 - 2 tr(A^T X B) + tr((A^T A)(B^T B)).

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

#include "rrss/linalg.hpp"

namespace rrss {

namespace detail {

inline void check_factor_shapes(const SparseMatrix& x, const DenseMatrix& a,
                                const DenseMatrix& b, const char* who) {
  if (static_cast<std::size_t>(a.rows()) != x.rows() ||
      static_cast<std::size_t>(b.rows()) != x.cols() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(who) + ": X is " +
                                shape_string(x.rows(), x.cols()) + ", A is " +
                                shape_string(a) + ", B is " + shape_string(b));
  }
}

/// Pieces of ||X - A B^T||^2 that share the product X B.
struct ResidualParts {
  Eigen::VectorXd column_inner;  // diag(A^T X B)
  double residual_sq = 0.0;
};

inline ResidualParts residual_parts(const SparseMatrix& x, const DenseMatrix& a,
                                    const DenseMatrix& b) {
  const DenseMatrix xb = spmm(x, b);
  ResidualParts out;
  out.column_inner.resize(a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    out.column_inner[j] = a.col(j).dot(xb.col(j));
  }
  const Eigen::MatrixXd ga = a.transpose() * a;
  const Eigen::MatrixXd gb = b.transpose() * b;
  const double r2 = x.frobenius_norm_sq() - 2.0 * out.column_inner.sum() +
                    ga.cwiseProduct(gb).sum();
  out.residual_sq = r2 > 0.0 ? r2 : 0.0;
  return out;
}

}  // namespace detail

/// Singular values of A B^T (nonincreasing), from the r x r core R_A R_B^T.
inline Diagonal product_singular_values(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("product_singular_values: A is " + shape_string(a) +
                                ", B is " + shape_string(b));
  }
  const Eigen::Index r = a.cols();
  if (r == 0) return Diagonal(0);
  if (a.rows() < r || b.rows() < r) {
    const Eigen::MatrixXd z = a * b.transpose();
    return Eigen::BDCSVD<Eigen::MatrixXd>(z).singularValues();
  }
  const Eigen::MatrixXd ac = a;
  const Eigen::MatrixXd bc = b;
  const Eigen::HouseholderQR<Eigen::MatrixXd> qa(ac);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qb(bc);
  const Eigen::MatrixXd ra = qa.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd rb = qb.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  const DenseMatrix core = ra * rb.transpose();
  return thin_svd(core).S;
}

/// ||X - A B^T||_F without forming A B^T.
inline double residual_norm(const SparseMatrix& x, const DenseMatrix& a,
                            const DenseMatrix& b) {
  detail::check_factor_shapes(x, a, b, "residual_norm");
  return std::sqrt(detail::residual_parts(x, a, b).residual_sq);
}

inline double cost_rrss(const SparseMatrix& x, const DenseMatrix& a,
                        const DenseMatrix& b, double lambda) {
  detail::check_factor_shapes(x, a, b, "cost_rrss");
  const auto parts = detail::residual_parts(x, a, b);
  return 0.5 * parts.residual_sq +
         0.5 * lambda * (a.squaredNorm() + b.squaredNorm());
}

/// Nuclear-norm objective of Z = A B^T (Z given in factored form).
inline double cost_nuclear(const SparseMatrix& x, const DenseMatrix& a,
                           const DenseMatrix& b, double lambda) {
  detail::check_factor_shapes(x, a, b, "cost_nuclear");
  const auto parts = detail::residual_parts(x, a, b);
  return 0.5 * parts.residual_sq + lambda * product_singular_values(a, b).sum();
}

}  // namespace rrss
