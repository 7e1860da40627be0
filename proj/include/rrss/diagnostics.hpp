#pragma once

// Convergence diagnostics for the soft SVD solvers: subspace alignment
// against a dense reference SVD, the theoretical subspace rate, the predicted
// limit of the right singular vectors, the limit residual as a function of
// the sign product, and a per-iteration trace with a fixed CSV schema.

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rrss/cost.hpp"
#include "rrss/linalg.hpp"
#include "rrss/solver.hpp"

namespace rrss {

/// Full SVD of X used as ground truth (test-scale inputs only).
struct SpectralReference {
  Eigen::MatrixXd U_full;  // n x n
  Eigen::MatrixXd V_full;  // m x m
  Diagonal S_full;         // min(n, m), nonincreasing
};

inline SpectralReference make_spectral_reference(const Eigen::MatrixXd& x) {
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return {svd.matrixU(), svd.matrixV(), svd.singularValues()};
}

inline SpectralReference make_spectral_reference(const SparseMatrix& x) {
  return make_spectral_reference(Eigen::MatrixXd(x.to_dense()));
}

/// ||U_k^T basis_{(r+1:n)}||_max: leakage of the iterate into the trailing
/// reference directions.
inline double subspace_error(const DenseMatrix& u_k, const Eigen::MatrixXd& full_basis,
                             std::size_t r) {
  const auto n = static_cast<std::size_t>(full_basis.cols());
  if (r >= n) {
    throw std::invalid_argument("subspace_error: r = " + std::to_string(r) +
                                " leaves no trailing directions (n = " +
                                std::to_string(n) + ")");
  }
  if (static_cast<std::size_t>(u_k.cols()) != r || u_k.rows() != full_basis.rows()) {
    throw std::invalid_argument("subspace_error: U_k is " + shape_string(u_k) +
                                ", basis is " + shape_string(full_basis) +
                                ", r = " + std::to_string(r));
  }
  const auto rr = static_cast<Eigen::Index>(r);
  return max_norm(u_k.transpose() * full_basis.rightCols(full_basis.cols() - rr));
}

inline double subspace_error(const DenseMatrix& u_k, const SpectralReference& ref,
                             std::size_t r) {
  return subspace_error(u_k, ref.U_full, r);
}

/// (s_{l+1} / s_l)^2 for the split after the l-th singular value (1-based).
inline double theoretical_rate(const Diagonal& s, std::size_t l) {
  const auto p = static_cast<std::size_t>(s.size());
  if (l < 1 || l >= p) {
    throw std::invalid_argument("theoretical_rate: l = " + std::to_string(l) +
                                " outside [1, " + std::to_string(p) + ")");
  }
  const double sl = s[static_cast<Eigen::Index>(l - 1)];
  if (sl == 0.0) throw std::invalid_argument("theoretical_rate: s_l = 0");
  const double ratio = s[static_cast<Eigen::Index>(l)] / sl;
  return ratio * ratio;
}

inline double theoretical_rate(const SpectralReference& ref, std::size_t l) {
  return theoretical_rate(ref.S_full, l);
}

/// Predicted limit of the right singular vectors of the B-update SVD:
/// diag(((s_i - lambda)^+ + lambda) / s_i) W_k, i <= r. Reduces to W_k when
/// lambda < s_r.
inline Eigen::MatrixXd predicted_right_vectors(const Diagonal& s, const SignMatrix& w,
                                               double lambda) {
  const auto r = static_cast<Eigen::Index>(w.dim());
  if (s.size() < r) throw std::invalid_argument("predicted_right_vectors: rank exceeds spectrum");
  Eigen::VectorXd diag(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    diag[i] = (std::max(0.0, s[i] - lambda) + lambda) / s[i] * w[static_cast<std::size_t>(i)];
  }
  return diag.asDiagonal();
}

inline double v_diag_distance(const DenseMatrix& v_k, const SignMatrix& w_k,
                              const Diagonal& s, double lambda, std::size_t r) {
  if (w_k.dim() != r || static_cast<std::size_t>(v_k.rows()) != r ||
      static_cast<std::size_t>(v_k.cols()) != r) {
    throw std::invalid_argument("v_diag_distance: V_k is " + shape_string(v_k) +
                                ", W_k has dimension " + std::to_string(w_k.dim()) +
                                ", r = " + std::to_string(r));
  }
  return max_norm(v_k - predicted_right_vectors(s, w_k, lambda));
}

inline double v_diag_distance(const DenseMatrix& v_k, const SignMatrix& w_k,
                              const SpectralReference& ref, double lambda,
                              std::size_t r) {
  return v_diag_distance(v_k, w_k, ref.S_full, lambda, r);
}

/// Limit residual ||X - A_* B_*^T||_F for a given sign product W~_* W_*.
struct LimitCost {
  double general = 0.0;            // ||S - D^2 S^2 (D^2 + lambda)^{-2} I W~W I||_F
  std::optional<double> reduced;   // ||S - (S - lambda)^+ I W~W I||_F, lambda < s_r
};

inline LimitCost limit_cost(const Diagonal& s, double lambda, std::size_t r,
                            const SignMatrix& sign_product) {
  const auto p = static_cast<std::size_t>(s.size());
  if (sign_product.dim() != r || r > p || r == 0) {
    throw std::invalid_argument("limit_cost: sign product dimension " +
                                std::to_string(sign_product.dim()) + ", r = " +
                                std::to_string(r) + ", p = " + std::to_string(p));
  }
  double general_sq = 0.0;
  double reduced_sq = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    const double si = s[static_cast<Eigen::Index>(i)];
    double g = si;
    double red = si;
    if (i < r) {
      const double w = sign_product[i];
      const double d2 = std::max(0.0, si - lambda);
      const double denom = d2 + lambda;
      g = si - w * d2 * si * si / (denom * denom);
      red = si - w * d2;
    }
    general_sq += g * g;
    reduced_sq += red * red;
  }
  LimitCost out;
  out.general = std::sqrt(general_sq);
  if (lambda < s[static_cast<Eigen::Index>(r - 1)]) out.reduced = std::sqrt(reduced_sq);
  return out;
}

inline LimitCost limit_cost(const SpectralReference& ref, double lambda, std::size_t r,
                            const SignMatrix& sign_product) {
  return limit_cost(ref.S_full, lambda, r, sign_product);
}

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

/// One row of the per-iteration trace. Empty optionals serialize as "NA".
struct TraceRecord {
  std::size_t iter = 0;
  double cost_rrss = 0.0;
  double cost_nuclear = 0.0;
  double stop_value = 0.0;
  std::optional<double> subspace_err_U;
  std::optional<double> subspace_err_V;
  std::optional<double> v_diag_distance;
  std::optional<bool> sign_agreement;
  std::vector<double> d_squared;
};

/// Builds TraceRecords from solver iterations. Subspace metrics need a
/// SpectralReference; without one they are left empty.
///
/// For the rank-restricted solver, d_squared is diag(D^2); for alternating
/// ridge it is the singular values of A B^T (the same quantity at the
/// optimum). sign_agreement reports whether every column pair satisfies
/// a_j^T X b_j > 0. v_diag_distance is measured in the reference's sign
/// frame: the B-update right vectors and the incoming A signs are both
/// re-expressed relative to the reference singular vectors.
class TraceBuilder {
 public:
  TraceBuilder(const SparseMatrix& x, double lambda, std::size_t rank,
               const SpectralReference* ref = nullptr)
      : x_(x), lambda_(lambda), rank_(rank), ref_(ref) {}

  TraceRecord operator()(const IterationView& view) const {
    TraceRecord rec;
    rec.iter = view.iter;
    rec.stop_value = view.stop_value;

    const auto parts = detail::residual_parts(x_, view.A, view.B);
    const Diagonal sv = product_singular_values(view.A, view.B);
    rec.cost_rrss = 0.5 * parts.residual_sq +
                    0.5 * lambda_ * (view.A.squaredNorm() + view.B.squaredNorm());
    rec.cost_nuclear = 0.5 * parts.residual_sq + lambda_ * sv.sum();
    rec.sign_agreement = (parts.column_inner.array() > 0.0).all();

    const Diagonal d_sq = view.state ? Diagonal(view.state->D.cwiseAbs2()) : sv;
    rec.d_squared.assign(d_sq.data(), d_sq.data() + d_sq.size());

    if (ref_ && rank_ < static_cast<std::size_t>(std::min(x_.rows(), x_.cols()))) {
      const DenseMatrix u = view.state ? view.state->U : thin_svd(view.A).U;
      const DenseMatrix ut = view.state ? view.state->U_tilde : thin_svd(view.B).U;
      rec.subspace_err_U = subspace_error(u, ref_->U_full, rank_);
      rec.subspace_err_V = subspace_error(ut, ref_->V_full, rank_);
    }
    if (ref_ && view.state) {
      rec.v_diag_distance = reference_frame_v_distance(*view.state);
    }
    return rec;
  }

 private:
  double reference_frame_v_distance(const SolverState& st) const {
    const auto r = static_cast<Eigen::Index>(rank_);
    std::vector<int> w_ref(rank_), align(rank_);
    for (Eigen::Index i = 0; i < r; ++i) {
      w_ref[i] = ref_->U_full.col(i).dot(st.A_prev.col(i)) < 0.0 ? -1 : 1;
      align[i] = ref_->V_full.col(i).dot(st.U_tilde.col(i)) < 0.0 ? -1 : 1;
    }
    const DenseMatrix v_ref = st.V_tilde_last * SignMatrix(align).as_vector().asDiagonal();
    return v_diag_distance(v_ref, SignMatrix(w_ref), ref_->S_full, lambda_, rank_);
  }

  const SparseMatrix& x_;
  double lambda_;
  std::size_t rank_;
  const SpectralReference* ref_;
};

/// Observer that forwards a TraceRecord per iteration to `sink`.
inline IterationObserver make_trace_observer(const TraceBuilder& builder,
                                             std::function<void(const TraceRecord&)> sink) {
  return [&builder, sink = std::move(sink)](const IterationView& view) {
    sink(builder(view));
  };
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// Streams trace rows. Column order:
/// iter,cost_rrss,cost_nuclear,stop_value,subspace_err_U,subspace_err_V,
/// v_diag_distance,sign_agreement,d_sq_1..d_sq_r
class TraceCsvWriter {
 public:
  TraceCsvWriter(std::ostream& out, std::size_t rank, const std::string& provenance = {})
      : out_(out), rank_(rank) {
    if (!provenance.empty()) out_ << "# " << provenance << '\n';
    out_ << "iter,cost_rrss,cost_nuclear,stop_value,subspace_err_U,subspace_err_V,"
            "v_diag_distance,sign_agreement";
    for (std::size_t i = 1; i <= rank_; ++i) out_ << ",d_sq_" << i;
    out_ << '\n';
  }

  void write(const TraceRecord& rec) {
    using detail::format_double;
    auto opt = [](const std::optional<double>& v) {
      return v ? format_double(*v) : std::string("NA");
    };
    out_ << rec.iter << ',' << format_double(rec.cost_rrss) << ','
         << format_double(rec.cost_nuclear) << ',' << format_double(rec.stop_value) << ','
         << opt(rec.subspace_err_U) << ',' << opt(rec.subspace_err_V) << ','
         << opt(rec.v_diag_distance) << ','
         << (rec.sign_agreement ? (*rec.sign_agreement ? "1" : "0") : "NA");
    for (std::size_t i = 0; i < rank_; ++i) {
      out_ << ',' << (i < rec.d_squared.size() ? format_double(rec.d_squared[i]) : "NA");
    }
    out_ << '\n';
  }

 private:
  std::ostream& out_;
  std::size_t rank_;
};

}  // namespace rrss
