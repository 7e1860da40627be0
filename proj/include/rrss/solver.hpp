#pragma once

// Solvers for
//   min_{A, B} 1/2 ||X - A B^T||_F^2 + lambda/2 (||A||_F^2 + ||B||_F^2)
// with A: n x r, B: m x r.
//
//  * als_run   : alternating ridge regression.
//  * rrss_run  : rank-restricted soft SVD. Each half-step is a ridge update
//                followed by a thin SVD that re-orthogonalizes the factor.
//                The sign matrix applied after each SVD is a SignPolicy:
//                COLUMN_SUM makes the right singular vectors' column sums
//                nonnegative (the convergent variant); RAW and RANDOM leave
//                the signs to the SVD backend (deterministic or not); FIXED
//                pins them.
//  * oracle_soft_svd : closed-form solution from a dense SVD.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "rrss/cost.hpp"
#include "rrss/linalg.hpp"
#include "rrss/rng.hpp"

namespace rrss {

enum class SignPolicyKind { ColumnSum, Raw, Random, Fixed };

/// Which half-step a sign choice belongs to.
enum class HalfStep { UpdateB, UpdateA };

class SignPolicy {
 public:
  static SignPolicy column_sum() { return SignPolicy(SignPolicyKind::ColumnSum); }
  static SignPolicy raw() { return SignPolicy(SignPolicyKind::Raw); }

  static SignPolicy random(std::uint64_t seed) {
    SignPolicy p(SignPolicyKind::Random);
    p.seed_ = seed;
    return p;
  }

  /// Constant signs: `on_b_update` after the SVD of B D, `on_a_update` after
  /// the SVD of A D~ (defaults to the same pattern).
  static SignPolicy fixed(SignMatrix on_b_update,
                          std::optional<SignMatrix> on_a_update = std::nullopt) {
    SignPolicy p(SignPolicyKind::Fixed);
    p.fixed_a_ = on_a_update ? *on_a_update : on_b_update;
    p.fixed_b_ = std::move(on_b_update);
    if (p.fixed_a_.dim() != p.fixed_b_.dim()) {
      throw std::invalid_argument("SignPolicy: fixed patterns differ in length");
    }
    return p;
  }

  /// "colsum" | "raw" | "random" | "random:<seed>" | "fixed:<pat>[/<pat>]".
  /// A bare "random" uses `default_seed`.
  static SignPolicy parse(std::string_view text, std::uint64_t default_seed) {
    if (text == "colsum" || text == "column_sum") return column_sum();
    if (text == "raw") return raw();
    if (text == "random") return random(default_seed);
    if (text.starts_with("random:")) {
      return random(std::stoull(std::string(text.substr(7))));
    }
    if (text.starts_with("fixed:")) {
      const auto body = text.substr(6);
      const auto slash = body.find('/');
      if (slash == std::string_view::npos) return fixed(SignMatrix::parse(body));
      return fixed(SignMatrix::parse(body.substr(0, slash)),
                   SignMatrix::parse(body.substr(slash + 1)));
    }
    throw std::invalid_argument("unknown sign policy '" + std::string(text) + "'");
  }

  SignPolicyKind kind() const { return kind_; }
  std::uint64_t seed() const { return seed_; }
  const SignMatrix& fixed_on_b_update() const { return fixed_b_; }
  const SignMatrix& fixed_on_a_update() const { return fixed_a_; }

  void validate(std::size_t rank) const {
    if (kind_ == SignPolicyKind::Fixed &&
        (fixed_a_.dim() != rank || fixed_b_.dim() != rank)) {
      throw std::invalid_argument("fixed sign pattern has dimension " +
                                  std::to_string(fixed_b_.dim()) +
                                  " but rank is " + std::to_string(rank));
    }
  }

  std::string to_string() const {
    switch (kind_) {
      case SignPolicyKind::ColumnSum:
        return "colsum";
      case SignPolicyKind::Raw:
        return "raw";
      case SignPolicyKind::Random:
        return "random:" + std::to_string(seed_);
      case SignPolicyKind::Fixed:
        return "fixed:" + fixed_b_.to_string() + "/" + fixed_a_.to_string();
    }
    return "?";
  }

  /// Sign matrix applied after an SVD whose right singular vectors are `v`.
  SignMatrix choose(const DenseMatrix& v, HalfStep half, Rng& rng) const {
    const auto r = static_cast<std::size_t>(v.cols());
    switch (kind_) {
      case SignPolicyKind::ColumnSum: {
        const Eigen::VectorXd sums = v.colwise().sum().transpose();
        return SignMatrix::from_signs_of(sums);
      }
      case SignPolicyKind::Raw:
        return SignMatrix::identity(r);
      case SignPolicyKind::Random: {
        std::vector<int> s(r);
        for (auto& x : s) x = static_cast<int>(rng.sign());
        return SignMatrix(std::move(s));
      }
      case SignPolicyKind::Fixed:
        return half == HalfStep::UpdateB ? fixed_b_ : fixed_a_;
    }
    return SignMatrix::identity(r);
  }

 private:
  explicit SignPolicy(SignPolicyKind kind) : kind_(kind) {}

  SignPolicyKind kind_ = SignPolicyKind::ColumnSum;
  std::uint64_t seed_ = 0;
  SignMatrix fixed_b_;
  SignMatrix fixed_a_;
};

struct SolverConfig {
  std::size_t rank = 1;
  double lambda = 0.5;
  double tol = 1e-9;
  std::size_t max_iters = 1000;
  std::uint64_t seed = 0;
  SignPolicy sign_policy = SignPolicy::column_sum();
  bool trace_enabled = false;

  void validate(std::size_t n, std::size_t m) const {
    if (n == 0 || m == 0) throw std::invalid_argument("solver: X is empty");
    if (rank < 1 || rank > std::min(n, m)) {
      throw std::invalid_argument("solver: rank " + std::to_string(rank) +
                                  " outside [1, " + std::to_string(std::min(n, m)) +
                                  "]");
    }
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw std::invalid_argument("solver: lambda must be positive");
    }
    if (!(tol > 0.0)) throw std::invalid_argument("solver: tol must be positive");
    if (max_iters < 1) throw std::invalid_argument("solver: max_iters must be >= 1");
    sign_policy.validate(rank);
  }
};

/// One iterate of the rank-restricted soft SVD. A = U W D and B = U~ W~ D~.
struct SolverState {
  DenseMatrix A, B;
  DenseMatrix A_prev, B_prev;
  DenseMatrix U, U_tilde;
  Diagonal D, D_tilde;
  DenseMatrix V_last, V_tilde_last;
  SignMatrix W_last, W_tilde_last;
  std::size_t iter = 0;
  double stop_value = std::numeric_limits<double>::infinity();
  Rng sign_rng;
};

/// Initial point that bypasses the random start.
struct WarmStart {
  DenseMatrix U;                    // n x r, orthonormal columns
  std::optional<Diagonal> D;        // defaults to ones
  std::optional<SignMatrix> W;      // defaults to identity
};

struct SoftSVDSolution {
  DenseMatrix A, B;
  Diagonal D_squared;
  std::size_t iters = 0;
  bool converged = false;
  double final_cost = 0.0;
  double stop_value = 0.0;
  std::size_t effective_rank = 0;
};

/// Non-finite values appeared during an iteration.
class BreakdownError : public std::runtime_error {
 public:
  BreakdownError(std::size_t iteration, const std::string& what)
      : std::runtime_error("breakdown at iteration " + std::to_string(iteration) +
                           ": " + what),
        iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

/// What an observer sees after each completed iteration. `state` is null for
/// the alternating ridge solver.
struct IterationView {
  std::size_t iter;
  const DenseMatrix& A;
  const DenseMatrix& B;
  double stop_value;
  const SolverState* state;
};

using IterationObserver = std::function<void(const IterationView&)>;

/// ||A - A_p||_max / ||A||_max + ||B - B_p||_max / ||B||_max, where a term
/// with zero denominator counts 0 if its numerator is 0 and +inf otherwise.
inline double stop_criterion(const DenseMatrix& a, const DenseMatrix& a_prev,
                             const DenseMatrix& b, const DenseMatrix& b_prev) {
  auto term = [](const DenseMatrix& cur, const DenseMatrix& prev) {
    const double diff = max_norm(cur - prev);
    const double scale = max_norm(cur);
    if (scale == 0.0) {
      return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return diff / scale;
  };
  return term(a, a_prev) + term(b, b_prev);
}

namespace detail {

inline std::size_t count_above(const Diagonal& d, double floor) {
  return static_cast<std::size_t>((d.array() >= floor).count());
}

constexpr double kEffectiveRankFloor = 1e-12;

}  // namespace detail

// ---------------------------------------------------------------------------
// Alternating ridge regression
// ---------------------------------------------------------------------------

/// Alternates B <- X^T A (A^T A + lambda I)^{-1} and A <- X B (B^T B + lambda
/// I)^{-1}, starting from `initial_a` or a seeded random orthonormal A.
inline SoftSVDSolution als_run(const SparseMatrix& x, const SolverConfig& cfg,
                               const IterationObserver& observer = {},
                               std::optional<DenseMatrix> initial_a = std::nullopt) {
  cfg.validate(x.rows(), x.cols());
  const auto n = static_cast<Eigen::Index>(x.rows());
  const auto m = static_cast<Eigen::Index>(x.cols());
  const auto r = static_cast<Eigen::Index>(cfg.rank);

  DenseMatrix a;
  if (initial_a) {
    if (initial_a->rows() != n || initial_a->cols() != r) {
      throw std::invalid_argument("als_run: initial A is " + shape_string(*initial_a) +
                                  ", expected " + shape_string(x.rows(), cfg.rank));
    }
    a = *initial_a;
  } else {
    a = random_orthonormal(x.rows(), cfg.rank, derive_seed(cfg.seed, SeedPurpose::Init));
  }
  DenseMatrix b = DenseMatrix::Zero(m, r);

  SoftSVDSolution sol;
  double stop = std::numeric_limits<double>::infinity();
  std::size_t k = 0;
  while (k < cfg.max_iters) {
    const DenseMatrix a_prev = a;
    const DenseMatrix b_prev = b;
    const Eigen::MatrixXd ga = a.transpose() * a;
    b = ridge_solve(spmm(x, a, true), ga, cfg.lambda);
    const Eigen::MatrixXd gb = b.transpose() * b;
    a = ridge_solve(spmm(x, b), gb, cfg.lambda);
    ++k;
    if (!a.allFinite() || !b.allFinite()) throw BreakdownError(k, "non-finite factor");
    stop = stop_criterion(a, a_prev, b, b_prev);
    if (observer) observer(IterationView{k, a, b, stop, nullptr});
    if (stop <= cfg.tol) {
      sol.converged = true;
      break;
    }
  }
  sol.iters = k;
  sol.stop_value = stop;
  sol.final_cost = cost_rrss(x, a, b, cfg.lambda);
  sol.D_squared = product_singular_values(a, b);
  sol.effective_rank = detail::count_above(sol.D_squared, detail::kEffectiveRankFloor);
  sol.A = std::move(a);
  sol.B = std::move(b);
  return sol;
}

// ---------------------------------------------------------------------------
// Rank-restricted soft SVD
// ---------------------------------------------------------------------------

/// D = I, W = I, U random orthonormal (or the warm start), A = U W D, B = 0.
inline SolverState rrss_init(const SparseMatrix& x, const SolverConfig& cfg,
                             const WarmStart* warm = nullptr) {
  cfg.validate(x.rows(), x.cols());
  const auto n = static_cast<Eigen::Index>(x.rows());
  const auto m = static_cast<Eigen::Index>(x.cols());
  const auto r = static_cast<Eigen::Index>(cfg.rank);

  SolverState s;
  if (warm) {
    if (warm->U.rows() != n || warm->U.cols() != r) {
      throw std::invalid_argument("rrss_init: warm-start U is " +
                                  shape_string(warm->U) + ", expected " +
                                  shape_string(x.rows(), cfg.rank));
    }
    const Eigen::MatrixXd gram = warm->U.transpose() * warm->U;
    if (!gram.isIdentity(1e-10)) {
      throw std::invalid_argument("rrss_init: warm-start U is not orthonormal");
    }
    s.U = warm->U;
  } else {
    s.U = random_orthonormal(x.rows(), cfg.rank, derive_seed(cfg.seed, SeedPurpose::Init));
  }
  s.D = (warm && warm->D) ? *warm->D : Diagonal::Ones(r);
  s.W_last = (warm && warm->W) ? *warm->W : SignMatrix::identity(cfg.rank);
  if (s.D.size() != r || s.W_last.dim() != cfg.rank) {
    throw std::invalid_argument("rrss_init: warm-start D/W dimension differs from rank");
  }
  if ((s.D.array() < 0.0).any() || !s.D.allFinite()) {
    throw std::invalid_argument("rrss_init: warm-start D must be finite and nonnegative");
  }

  s.A = scale_columns(s.U, s.W_last.as_vector().cwiseProduct(s.D));
  s.B = DenseMatrix::Zero(m, r);
  s.A_prev = DenseMatrix::Zero(n, r);
  s.B_prev = DenseMatrix::Zero(m, r);
  s.U_tilde = DenseMatrix::Zero(m, r);
  s.D_tilde = Diagonal::Ones(r);
  s.V_last = DenseMatrix::Identity(r, r);
  s.V_tilde_last = DenseMatrix::Identity(r, r);
  s.W_tilde_last = SignMatrix::identity(cfg.rank);
  s.iter = 0;
  s.stop_value = stop_criterion(s.A, s.A_prev, s.B, s.B_prev);
  const std::uint64_t sign_seed = cfg.sign_policy.kind() == SignPolicyKind::Random
                                      ? cfg.sign_policy.seed()
                                      : derive_seed(cfg.seed, SeedPurpose::Sign);
  s.sign_rng = Rng(sign_seed);
  return s;
}

/// One full iteration, in order:
///   B <- X^T A (D^2 + lambda I)^{-1};  B D = U~ S~ V~^T;  D~ <- S~^{1/2};
///   W~ <- policy(V~);  B <- U~ W~ D~;
///   A <- X B (D~^2 + lambda I)^{-1};   A D~ = U S V^T;    D <- S^{1/2};
///   W <- policy(V);    A <- U W D.
inline SolverState rrss_step(const SparseMatrix& x, const SolverState& state,
                             const SolverConfig& cfg) {
  SolverState next = state;
  next.iter = state.iter + 1;
  next.A_prev = state.A;
  next.B_prev = state.B;

  const Diagonal d_sq = state.D.cwiseAbs2();
  const DenseMatrix b_raw = ridge_solve(spmm(x, state.A, true), d_sq, cfg.lambda);
  if (!b_raw.allFinite()) throw BreakdownError(next.iter, "non-finite B update");
  const ThinSVD sb = thin_svd(scale_columns(b_raw, state.D));
  next.U_tilde = sb.U;
  next.D_tilde = sb.S.cwiseSqrt();
  next.V_tilde_last = sb.V;
  next.W_tilde_last = cfg.sign_policy.choose(sb.V, HalfStep::UpdateB, next.sign_rng);
  next.B = scale_columns(sb.U, next.W_tilde_last.as_vector().cwiseProduct(next.D_tilde));

  const Diagonal dt_sq = next.D_tilde.cwiseAbs2();
  const DenseMatrix a_raw = ridge_solve(spmm(x, next.B), dt_sq, cfg.lambda);
  if (!a_raw.allFinite()) throw BreakdownError(next.iter, "non-finite A update");
  const ThinSVD sa = thin_svd(scale_columns(a_raw, next.D_tilde));
  next.U = sa.U;
  next.D = sa.S.cwiseSqrt();
  next.V_last = sa.V;
  next.W_last = cfg.sign_policy.choose(sa.V, HalfStep::UpdateA, next.sign_rng);
  next.A = scale_columns(sa.U, next.W_last.as_vector().cwiseProduct(next.D));

  next.stop_value = stop_criterion(next.A, next.A_prev, next.B, next.B_prev);
  if (std::isnan(next.stop_value)) throw BreakdownError(next.iter, "NaN stop value");
  return next;
}

/// Iterates rrss_step until the stop criterion is <= tol or max_iters is
/// reached (converged = false, not an error).
inline SoftSVDSolution rrss_run(const SparseMatrix& x, const SolverConfig& cfg,
                                const IterationObserver& observer = {},
                                const WarmStart* warm = nullptr) {
  SolverState state = rrss_init(x, cfg, warm);
  SoftSVDSolution sol;
  while (state.iter < cfg.max_iters) {
    state = rrss_step(x, state, cfg);
    if (observer) {
      observer(IterationView{state.iter, state.A, state.B, state.stop_value, &state});
    }
    if (state.stop_value <= cfg.tol) {
      sol.converged = true;
      break;
    }
  }
  sol.iters = state.iter;
  sol.stop_value = state.stop_value;
  sol.D_squared = state.D.cwiseAbs2();
  sol.effective_rank = detail::count_above(sol.D_squared, detail::kEffectiveRankFloor);
  sol.final_cost = cost_rrss(x, state.A, state.B, cfg.lambda);
  sol.A = std::move(state.A);
  sol.B = std::move(state.B);
  return sol;
}

// ---------------------------------------------------------------------------
// Dense oracle
// ---------------------------------------------------------------------------

/// Closed-form optimum from the full SVD X = U S V^T:
/// D = sqrt((S - lambda)^+), A = U D I_{p x r}, B = V D I_{p x r}.
/// The cost is evaluated from the singular values.
inline SoftSVDSolution oracle_soft_svd(const Eigen::MatrixXd& x, std::size_t rank,
                                       double lambda) {
  const auto p = static_cast<std::size_t>(std::min(x.rows(), x.cols()));
  if (rank < 1 || rank > p) {
    throw std::invalid_argument("oracle_soft_svd: rank " + std::to_string(rank) +
                                " outside [1, " + std::to_string(p) + "]");
  }
  if (!(lambda >= 0.0)) throw std::invalid_argument("oracle_soft_svd: lambda < 0");
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const auto r = static_cast<Eigen::Index>(rank);
  const Diagonal d = soft_threshold(s.head(r), lambda);

  SoftSVDSolution sol;
  sol.A = svd.matrixU().leftCols(r) * d.asDiagonal();
  sol.B = svd.matrixV().leftCols(r) * d.asDiagonal();
  sol.D_squared = d.cwiseAbs2();
  sol.converged = true;
  sol.effective_rank = detail::count_above(sol.D_squared, detail::kEffectiveRankFloor);

  double residual = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double fitted = i < r ? sol.D_squared[i] : 0.0;
    residual += (s[i] - fitted) * (s[i] - fitted);
  }
  sol.final_cost = 0.5 * residual + lambda * sol.D_squared.sum();
  return sol;
}

}  // namespace rrss
