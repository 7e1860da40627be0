#pragma once

// Dense/sparse kernels used by the rank-restricted soft SVD iterations.
//
// Everything here is a pure function of its inputs. Summation orders are
// fixed (storage order for sparse products) so repeated runs are bitwise
// reproducible on one platform.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rrss/rng.hpp"

namespace rrss {

/// Row-major dense storage for the tall-skinny factors.
using DenseMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Diagonal values (S, D, D squared, ...) stored as a vector.
using Diagonal = Eigen::VectorXd;

inline std::string shape_string(std::size_t rows, std::size_t cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <class Derived>
std::string shape_string(const Eigen::MatrixBase<Derived>& m) {
  return shape_string(static_cast<std::size_t>(m.rows()),
                      static_cast<std::size_t>(m.cols()));
}

// ---------------------------------------------------------------------------
// SparseMatrix
// ---------------------------------------------------------------------------

struct Triplet {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Immutable compressed-row sparse matrix.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  /// Builds a CSR matrix from unordered triplets. Rejects out-of-range
  /// indices, duplicate (row, col) pairs and non-finite values.
  static SparseMatrix from_triplets(std::size_t nrows, std::size_t ncols,
                                    std::vector<Triplet> entries) {
    for (const auto& t : entries) {
      if (t.row >= nrows || t.col >= ncols) {
        throw std::out_of_range("SparseMatrix: entry (" + std::to_string(t.row) +
                                ", " + std::to_string(t.col) +
                                ") outside " + shape_string(nrows, ncols));
      }
      if (!std::isfinite(t.value)) {
        throw std::invalid_argument("SparseMatrix: non-finite value at (" +
                                    std::to_string(t.row) + ", " +
                                    std::to_string(t.col) + ")");
      }
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Triplet& a, const Triplet& b) {
                       return a.row != b.row ? a.row < b.row : a.col < b.col;
                     });
    for (std::size_t k = 1; k < entries.size(); ++k) {
      if (entries[k].row == entries[k - 1].row &&
          entries[k].col == entries[k - 1].col) {
        throw std::invalid_argument("SparseMatrix: duplicate entry (" +
                                    std::to_string(entries[k].row) + ", " +
                                    std::to_string(entries[k].col) + ")");
      }
    }

    SparseMatrix x;
    x.nrows_ = nrows;
    x.ncols_ = ncols;
    x.row_ptr_.assign(nrows + 1, 0);
    x.col_idx_.reserve(entries.size());
    x.values_.reserve(entries.size());
    for (const auto& t : entries) {
      ++x.row_ptr_[t.row + 1];
      x.col_idx_.push_back(t.col);
      x.values_.push_back(t.value);
    }
    std::partial_sum(x.row_ptr_.begin(), x.row_ptr_.end(), x.row_ptr_.begin());
    return x;
  }

  /// Stores every nonzero of a dense matrix (all entries if keep_zeros).
  template <class Derived>
  static SparseMatrix from_dense(const Eigen::MatrixBase<Derived>& m,
                                 bool keep_zeros = false) {
    std::vector<Triplet> entries;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double v = m(i, j);
        if (keep_zeros || v != 0.0) {
          entries.push_back({static_cast<std::size_t>(i),
                             static_cast<std::size_t>(j), v});
        }
      }
    }
    return from_triplets(static_cast<std::size_t>(m.rows()),
                         static_cast<std::size_t>(m.cols()), std::move(entries));
  }

  std::size_t rows() const { return nrows_; }
  std::size_t cols() const { return ncols_; }
  std::size_t nnz() const { return values_.size(); }
  bool empty() const { return nrows_ == 0 || ncols_ == 0; }

  std::span<const std::size_t> row_ptr() const { return row_ptr_; }
  std::span<const std::size_t> col_index() const { return col_idx_; }
  std::span<const double> values() const { return values_; }

  double density() const {
    return empty() ? 0.0
                   : static_cast<double>(nnz()) /
                         (static_cast<double>(nrows_) * static_cast<double>(ncols_));
  }

  double frobenius_norm_sq() const {
    double acc = 0.0;
    for (double v : values_) acc += v * v;
    return acc;
  }

  std::vector<Triplet> triplets() const {
    std::vector<Triplet> out;
    out.reserve(nnz());
    for (std::size_t i = 0; i < nrows_; ++i) {
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
        out.push_back({i, col_idx_[p], values_[p]});
      }
    }
    return out;
  }

  DenseMatrix to_dense() const {
    DenseMatrix d = DenseMatrix::Zero(static_cast<Eigen::Index>(nrows_),
                                      static_cast<Eigen::Index>(ncols_));
    for (std::size_t i = 0; i < nrows_; ++i) {
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
        d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col_idx_[p])) =
            values_[p];
      }
    }
    return d;
  }

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  std::size_t nrows_ = 0;
  std::size_t ncols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// SignMatrix
// ---------------------------------------------------------------------------

/// Diagonal matrix with entries in {+1, -1}.
class SignMatrix {
 public:
  SignMatrix() = default;

  explicit SignMatrix(std::vector<int> signs) : signs_(std::move(signs)) {
    for (int s : signs_) {
      if (s != 1 && s != -1) {
        throw std::invalid_argument("SignMatrix: entries must be +1 or -1");
      }
    }
  }

  static SignMatrix identity(std::size_t dim) {
    return SignMatrix(std::vector<int>(dim, 1));
  }

  /// Parses a pattern such as "+-+".
  static SignMatrix parse(std::string_view pattern) {
    std::vector<int> s;
    for (char c : pattern) {
      if (c == '+') {
        s.push_back(1);
      } else if (c == '-') {
        s.push_back(-1);
      } else {
        throw std::invalid_argument("SignMatrix: bad sign pattern '" +
                                    std::string(pattern) + "'");
      }
    }
    return SignMatrix(std::move(s));
  }

  /// sign(v_j) per entry, with sign(0) = +1.
  static SignMatrix from_signs_of(const Eigen::Ref<const Eigen::VectorXd>& v) {
    std::vector<int> s(static_cast<std::size_t>(v.size()));
    for (Eigen::Index j = 0; j < v.size(); ++j) s[j] = v[j] < 0.0 ? -1 : 1;
    return SignMatrix(std::move(s));
  }

  std::size_t dim() const { return signs_.size(); }
  int operator[](std::size_t i) const { return signs_[i]; }
  std::span<const int> signs() const { return signs_; }

  bool is_identity() const {
    return std::all_of(signs_.begin(), signs_.end(), [](int s) { return s == 1; });
  }

  Eigen::VectorXd as_vector() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(signs_.size()));
    for (std::size_t i = 0; i < signs_.size(); ++i) v[i] = signs_[i];
    return v;
  }

  std::string to_string() const {
    std::string out;
    for (int s : signs_) out += s > 0 ? '+' : '-';
    return out;
  }

  friend SignMatrix operator*(const SignMatrix& a, const SignMatrix& b) {
    if (a.dim() != b.dim()) {
      throw std::invalid_argument("SignMatrix: dimension mismatch");
    }
    std::vector<int> s(a.dim());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = a[i] * b[i];
    return SignMatrix(std::move(s));
  }

  friend bool operator==(const SignMatrix&, const SignMatrix&) = default;

 private:
  std::vector<int> signs_;
};

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// X * M, or X^T * M when transpose_x. Entries are accumulated in storage
/// order.
inline DenseMatrix spmm(const SparseMatrix& x, const DenseMatrix& m,
                        bool transpose_x = false) {
  const std::size_t inner = transpose_x ? x.rows() : x.cols();
  if (inner != static_cast<std::size_t>(m.rows())) {
    throw std::invalid_argument(
        std::string("spmm: dimension mismatch, X") + (transpose_x ? "^T" : "") +
        " is " +
        (transpose_x ? shape_string(x.cols(), x.rows())
                     : shape_string(x.rows(), x.cols())) +
        " and M is " + shape_string(m));
  }
  const auto out_rows =
      static_cast<Eigen::Index>(transpose_x ? x.cols() : x.rows());
  DenseMatrix out = DenseMatrix::Zero(out_rows, m.cols());
  const auto rp = x.row_ptr();
  const auto ci = x.col_index();
  const auto vals = x.values();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) {
      const auto jj = static_cast<Eigen::Index>(ci[p]);
      if (transpose_x) {
        out.row(jj).noalias() += vals[p] * m.row(ii);
      } else {
        out.row(ii).noalias() += vals[p] * m.row(jj);
      }
    }
  }
  return out;
}

/// Thin SVD M = U diag(S) V^T of a tall n x r matrix.
struct ThinSVD {
  DenseMatrix U;  // n x r, orthonormal columns
  Diagonal S;     // r, nonincreasing, >= 0
  DenseMatrix V;  // r x r, orthogonal
};

namespace detail {

// Columns of `basis` (k x r) with index in `missing` are filled with unit
// vectors orthogonal to all other columns, drawn from e_0, e_1, ... in order.
inline void complete_orthonormal(Eigen::MatrixXd& basis,
                                 const std::vector<Eigen::Index>& missing) {
  const Eigen::Index k = basis.rows();
  std::vector<bool> filled(static_cast<std::size_t>(basis.cols()), true);
  for (auto j : missing) filled[static_cast<std::size_t>(j)] = false;
  Eigen::Index next_unit = 0;
  for (auto j : missing) {
    while (next_unit < k) {
      Eigen::VectorXd v = Eigen::VectorXd::Unit(k, next_unit++);
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index c = 0; c < basis.cols(); ++c) {
          if (filled[static_cast<std::size_t>(c)]) {
            v -= basis.col(c).dot(v) * basis.col(c);
          }
        }
      }
      const double nv = v.norm();
      if (nv > 0.5) {
        basis.col(j) = v / nv;
        filled[static_cast<std::size_t>(j)] = true;
        break;
      }
    }
  }
}

}  // namespace detail

/// Thin SVD by Householder QR followed by one-sided (Hestenes) Jacobi on the
/// r x r triangular factor.
///
/// Sign convention: each left singular vector is flipped (together with its
/// right singular vector) so that its largest-magnitude entry, first index on
/// ties, is positive. Singular values are sorted nonincreasing with a stable
/// sort. A zero matrix yields U = first r canonical basis columns, S = 0,
/// V = I.
inline ThinSVD thin_svd(const DenseMatrix& m) {
  const Eigen::Index n = m.rows();
  const Eigen::Index r = m.cols();
  if (n < r) {
    throw std::invalid_argument("thin_svd: need rows >= cols, got " +
                                shape_string(m));
  }
  if (!m.allFinite()) {
    throw std::invalid_argument("thin_svd: non-finite input");
  }
  if (r == 0) return {DenseMatrix(n, 0), Diagonal(0), DenseMatrix(0, 0)};

  const Eigen::MatrixXd mc = m;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(mc);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, r);
  Eigen::MatrixXd g = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();

  const double scale = g.cwiseAbs().maxCoeff();
  if (scale > 0.0) g /= scale;

  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(r, r);
  const double tol = 2.0 * static_cast<double>(r) *
                     std::numeric_limits<double>::epsilon();
  constexpr int kMaxSweeps = 80;
  bool rotated = true;
  for (int sweep = 0; rotated && sweep < kMaxSweeps; ++sweep) {
    rotated = false;
    for (Eigen::Index p = 0; p + 1 < r; ++p) {
      for (Eigen::Index k = p + 1; k < r; ++k) {
        const double alpha = g.col(p).squaredNorm();
        const double beta = g.col(k).squaredNorm();
        const double gamma = g.col(p).dot(g.col(k));
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) {
          continue;
        }
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::hypot(1.0, zeta));
        if (t == 0.0) continue;
        rotated = true;
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Eigen::MatrixXd* w : {&g, &v}) {
          Eigen::VectorXd colp = w->col(p);
          w->col(p) = c * colp - s * w->col(k);
          w->col(k) = s * colp + c * w->col(k);
        }
      }
    }
  }
  if (rotated) {
    throw std::runtime_error("thin_svd: Jacobi sweeps did not converge");
  }

  // Columns below this relative size are treated as exact zeros.
  constexpr double kNegligible = 1e-150;
  Eigen::VectorXd sigma(r);
  Eigen::MatrixXd ur(r, r);
  std::vector<Eigen::Index> zero_cols;
  for (Eigen::Index j = 0; j < r; ++j) {
    const double nj = g.col(j).stableNorm();
    if (nj > kNegligible) {
      sigma[j] = nj * scale;
      ur.col(j) = g.col(j) / nj;
    } else {
      sigma[j] = 0.0;
      ur.col(j).setZero();
      zero_cols.push_back(j);
    }
  }
  detail::complete_orthonormal(ur, zero_cols);

  Eigen::MatrixXd u = q * ur;
  for (Eigen::Index j = 0; j < r; ++j) {
    Eigen::Index imax = 0;
    u.col(j).cwiseAbs().maxCoeff(&imax);
    if (u(imax, j) < 0.0) {
      u.col(j) = -u.col(j);
      v.col(j) = -v.col(j);
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(r));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return sigma[a] > sigma[b]; });

  ThinSVD out{DenseMatrix(n, r), Diagonal(r), DenseMatrix(r, r)};
  for (Eigen::Index j = 0; j < r; ++j) {
    const Eigen::Index src = order[static_cast<std::size_t>(j)];
    out.U.col(j) = u.col(src);
    out.S[j] = sigma[src];
    out.V.col(j) = v.col(src);
  }
  return out;
}

/// M (G + lambda I)^{-1} for symmetric positive-semidefinite G (lower
/// triangle is read).
inline DenseMatrix ridge_solve(const DenseMatrix& m, const Eigen::MatrixXd& gram,
                               double lambda) {
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("ridge_solve: lambda must be positive");
  }
  if (gram.rows() != gram.cols() || gram.rows() != m.cols()) {
    throw std::invalid_argument("ridge_solve: M is " + shape_string(m) +
                                " but G is " + shape_string(gram));
  }
  Eigen::MatrixXd shifted = gram;
  shifted.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("ridge_solve: G + lambda I is not positive definite");
  }
  const Eigen::MatrixXd rhs = m.transpose();
  return llt.solve(rhs).transpose();
}

/// M (diag(g) + lambda I)^{-1}.
inline DenseMatrix ridge_solve(const DenseMatrix& m, const Diagonal& g,
                               double lambda) {
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("ridge_solve: lambda must be positive");
  }
  if (g.size() != m.cols()) {
    throw std::invalid_argument("ridge_solve: M is " + shape_string(m) +
                                " but G has dimension " + std::to_string(g.size()));
  }
  DenseMatrix out = m;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double denom = g[j] + lambda;
    if (!(denom > 0.0)) {
      throw std::invalid_argument("ridge_solve: G + lambda I is not positive definite");
    }
    out.col(j) /= denom;
  }
  return out;
}

/// Entrywise sqrt(max(0, s - lambda)).
inline Diagonal soft_threshold(const Diagonal& s, double lambda) {
  if (!(lambda >= 0.0)) {
    throw std::invalid_argument("soft_threshold: lambda must be nonnegative");
  }
  if ((s.array() < 0.0).any()) {
    throw std::invalid_argument("soft_threshold: negative singular value");
  }
  return (s.array() - lambda).max(0.0).sqrt().matrix();
}

/// Seeded n x r matrix with orthonormal columns (Gaussian draw, Householder
/// QR, diag(R) made nonnegative).
inline DenseMatrix random_orthonormal(std::size_t n, std::size_t r,
                                      std::uint64_t seed) {
  if (r > n) {
    throw std::invalid_argument("random_orthonormal: r > n (" + std::to_string(r) +
                                " > " + std::to_string(n) + ")");
  }
  if (r == 0) throw std::invalid_argument("random_orthonormal: r must be >= 1");
  Rng rng(seed);
  const auto nn = static_cast<Eigen::Index>(n);
  const auto rr = static_cast<Eigen::Index>(r);
  Eigen::MatrixXd g(nn, rr);
  for (Eigen::Index i = 0; i < nn; ++i) {
    for (Eigen::Index j = 0; j < rr; ++j) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(nn, rr);
  for (Eigen::Index j = 0; j < rr; ++j) {
    if (qr.matrixQR()(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

/// Maximum absolute entry; 0 for an empty matrix.
template <class Derived>
double max_norm(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// M diag(d): scales column j by d[j].
template <class Derived>
DenseMatrix scale_columns(const Eigen::MatrixBase<Derived>& m,
                          const Eigen::VectorXd& d) {
  return m * d.asDiagonal();
}

}  // namespace rrss
