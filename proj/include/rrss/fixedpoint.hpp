#pragma once

// Scalar model of the singular-value dynamics: once the singular vectors have
// settled, each squared diagonal entry follows
//
//     s_{k+1} = s^2 s_k / (s_k (s + lambda) + lambda^2)
//
// whose only stable fixed point is the soft threshold (s - lambda)^+.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace rrss::fixedpoint {

struct ScalarIteration {
  double s = 0.0;       // singular value of X (squared-entry scale)
  double lambda = 1.0;  // regularization, > 0
  double s0 = 1.0;      // initial value, > 0

  void validate() const {
    if (!(lambda > 0.0)) throw std::invalid_argument("ScalarIteration: lambda must be > 0");
    if (!(s0 > 0.0)) throw std::invalid_argument("ScalarIteration: s0 must be > 0");
  }
};

/// (s - lambda)^+
inline double soft_max(double s, double lambda) { return std::max(0.0, s - lambda); }

inline double sv_step(const ScalarIteration& it, double s_k) {
  const double s = it.s;
  const double l = it.lambda;
  return s * s * s_k / (s_k * (s + l) + l * l);
}

/// The orbit s_0, ..., s_k (k + 1 values).
inline std::vector<double> sv_iterate(const ScalarIteration& it, std::size_t k) {
  if (!(it.lambda > 0.0)) throw std::invalid_argument("sv_iterate: lambda must be > 0");
  if (k < 1) throw std::invalid_argument("sv_iterate: k must be >= 1");
  std::vector<double> orbit;
  orbit.reserve(k + 1);
  orbit.push_back(it.s0);
  for (std::size_t j = 0; j < k; ++j) orbit.push_back(sv_step(it, orbit.back()));
  return orbit;
}

struct FixedPoint {
  double value = 0.0;
  double derivative = 0.0;
  bool stable = false;
};

struct FixedPointReport {
  std::vector<FixedPoint> fixed_points;
};

/// Fixed points 0 (derivative s^2/lambda^2) and s - lambda (derivative
/// lambda^2/s^2). Undefined for s == lambda; use sv_closed_form_equal.
inline FixedPointReport sv_fixed_points(const ScalarIteration& it) {
  if (!(it.lambda > 0.0)) throw std::invalid_argument("sv_fixed_points: lambda must be > 0");
  if (it.s == it.lambda) {
    throw std::invalid_argument(
        "sv_fixed_points: s == lambda has a single degenerate fixed point; "
        "use sv_closed_form_equal");
  }
  const double s = it.s;
  const double l = it.lambda;
  const double d0 = (s * s) / (l * l);
  const double d1 = (l * l) / (s * s);
  FixedPointReport rep;
  rep.fixed_points.push_back({0.0, d0, std::abs(d0) < 1.0});
  rep.fixed_points.push_back({s - l, d1, std::abs(d1) < 1.0});
  return rep;
}

/// s_k = lambda s0 / (2 k s0 + lambda) for the s == lambda iteration.
inline double sv_closed_form_equal(double lambda, double s0, std::size_t k) {
  if (!(lambda > 0.0) || !(s0 > 0.0)) {
    throw std::invalid_argument("sv_closed_form_equal: lambda and s0 must be > 0");
  }
  return lambda * s0 / (2.0 * static_cast<double>(k) * s0 + lambda);
}

/// One-step contraction constant c in [0, 1) with
/// |s_{k+1} - (s-lambda)^+| <= c |s_k - (s-lambda)^+| along the orbit from s0:
///   lambda > s              : s^2 / lambda^2
///   lambda < s, s0 < s-lambda : lambda^2 / (s0 (s + lambda) + lambda^2)
///   lambda < s, s0 >= s-lambda: lambda^2 / s^2
inline double contraction_constant(const ScalarIteration& it) {
  if (!(it.s > 0.0) || !(it.lambda > 0.0) || !(it.s0 > 0.0)) {
    throw std::invalid_argument("contraction_constant: s, lambda, s0 must be > 0");
  }
  if (it.s == it.lambda) {
    throw std::invalid_argument("contraction_constant: undefined for s == lambda");
  }
  const double s = it.s;
  const double l = it.lambda;
  if (l > s) return (s * s) / (l * l);
  if (it.s0 < s - l) return (l * l) / (it.s0 * (s + l) + l * l);
  return (l * l) / (s * s);
}

// ---------------------------------------------------------------------------
// Perturbed iterations w_{k+1} = f(w_k) + e_k
// ---------------------------------------------------------------------------

struct PerturbationSpec {
  double c = 0.0;   // contraction of f towards its fixed point
  double a = 0.0;   // decay of the perturbations, |e_{k+1}| <= a |e_k|
  double e0 = 0.0;
  double w0 = 0.0;

  void validate() const {
    if (!(c >= 0.0 && c < 1.0)) throw std::invalid_argument("PerturbationSpec: c not in [0, 1)");
    if (!(a >= 0.0 && a < 1.0)) throw std::invalid_argument("PerturbationSpec: a not in [0, 1)");
  }
};

/// sum_{i=0}^{k} c^i a^{k-i} = (a^{k+1} - c^{k+1}) / (a - c), with the limit
/// (k + 1) c^k at a == c. Near-equal a, c are summed term by term.
inline double geometric_mix(double a, double c, std::size_t k) {
  const double kp1 = static_cast<double>(k + 1);
  if (a == c) return kp1 * std::pow(c, static_cast<double>(k));
  if (std::abs(a - c) <= 1e-6 * std::max(a, c)) {
    double acc = 0.0;
    for (std::size_t i = 0; i <= k; ++i) {
      acc += std::pow(c, static_cast<double>(i)) * std::pow(a, static_cast<double>(k - i));
    }
    return acc;
  }
  return (std::pow(a, kp1) - std::pow(c, kp1)) / (a - c);
}

/// Upper bound on |w_{k+1} - x*|:
///   |e0| (a^{k+1} - c^{k+1}) / (a - c) + c^{k+1} |w0 - x*|.
inline double perturbation_bound(const PerturbationSpec& spec, std::size_t k,
                                 double x_star) {
  spec.validate();
  return std::abs(spec.e0) * geometric_mix(spec.a, spec.c, k) +
         std::pow(spec.c, static_cast<double>(k + 1)) * std::abs(spec.w0 - x_star);
}

struct PerturbedOrbit {
  std::vector<double> orbit;  // w_0 .. w_k
  std::vector<double> bound;  // bound[j] bounds |w_{j+1} - x*|
  double c = 0.0;
  double limit = 0.0;         // x*
  bool within_bound = true;
};

namespace detail {

inline void check_decay(std::span<const double> e, std::size_t k, double a) {
  if (!(a >= 0.0 && a < 1.0)) throw std::invalid_argument("perturbed iterate: a not in [0, 1)");
  if (e.size() < k) throw std::invalid_argument("perturbed iterate: need k perturbations");
  for (std::size_t j = 0; j + 1 < k; ++j) {
    if (std::abs(e[j + 1]) > a * std::abs(e[j])) {
      throw std::invalid_argument("perturbed iterate: |e_{k+1}| <= a |e_k| violated at k = " +
                                  std::to_string(j));
    }
  }
}

}  // namespace detail

/// Runs w_{j+1} = f(w_j) + e_j for j < k and compares every |w_{j+1} - x*|
/// with perturbation_bound. `c` must be a valid contraction constant of f on
/// the visited points.
template <class Map>
PerturbedOrbit perturbed_orbit(Map f, double x_star, double c,
                               std::span<const double> e, double w0, std::size_t k,
                               double a) {
  detail::check_decay(e, k, a);
  PerturbedOrbit out;
  out.c = c;
  out.limit = x_star;
  out.orbit.reserve(k + 1);
  out.orbit.push_back(w0);
  for (std::size_t j = 0; j < k; ++j) out.orbit.push_back(f(out.orbit.back()) + e[j]);

  const PerturbationSpec spec{c, a, k > 0 ? e[0] : 0.0, w0};
  const double slack = 4.0 * std::numeric_limits<double>::epsilon() *
                       std::max(1.0, std::abs(x_star));
  out.bound.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    const double b = perturbation_bound(spec, j, x_star);
    out.bound.push_back(b);
    if (std::abs(out.orbit[j + 1] - x_star) > b * (1.0 + 1e-12) + slack) {
      out.within_bound = false;
    }
  }
  return out;
}

/// Perturbed singular-value iteration. The contraction constant is taken from
/// contraction_constant with s0 replaced by the smallest visited value, which
/// makes it valid along the whole perturbed orbit. The orbit must stay in
/// (0, inf).
inline PerturbedOrbit perturbed_iterate(const ScalarIteration& it,
                                        std::span<const double> e, double w0,
                                        std::size_t k, double a) {
  detail::check_decay(e, k, a);
  if (!(it.s > 0.0) || !(it.lambda > 0.0) || it.s == it.lambda) {
    throw std::invalid_argument("perturbed_iterate: need s, lambda > 0 and s != lambda");
  }
  std::vector<double> orbit{w0};
  for (std::size_t j = 0; j < k; ++j) orbit.push_back(sv_step(it, orbit.back()) + e[j]);
  const double w_min = *std::min_element(orbit.begin(), orbit.end());
  if (!(w_min > 0.0)) {
    throw std::domain_error("perturbed_iterate: orbit left (0, inf)");
  }
  const double c = contraction_constant({it.s, it.lambda, w_min});
  return perturbed_orbit([&](double w) { return sv_step(it, w); },
                         soft_max(it.s, it.lambda), c, e, w0, k, a);
}

}  // namespace rrss::fixedpoint
