// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rrss/diagnostics.hpp"
#include "rrss/fixedpoint.hpp"
#include "rrss/io.hpp"
#include "rrss/solver.hpp"
#include "support.hpp"

using namespace rrss;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// --- 1 & 2 -----------------------------------------------------------------

struct SmallSuite {
  double worst_product = 0.0;
  double worst_cost = 0.0;
  double worst_d2 = 0.0;
  std::size_t runs = 0;
  std::size_t unconverged = 0;
  double elapsed = 0.0;
};

const SmallSuite& small_suite() {
  static const SmallSuite suite = [] {
    SmallSuite out;
    const auto t0 = Clock::now();
    int accepted = 0;
    for (std::uint64_t seed = 0; accepted < 20; ++seed) {
      const Eigen::MatrixXd xd = test::gaussian(20, 15, 10'000 + seed);
      const Eigen::VectorXd sigma = Eigen::BDCSVD<Eigen::MatrixXd>(xd).singularValues();
      if (test::max_consecutive_ratio(sigma, 5) > 0.95) continue;
      ++accepted;
      const auto x = SparseMatrix::from_dense(xd);
      for (std::size_t r : {1, 3, 5}) {
        for (double lambda : {0.1, 0.5}) {
          SolverConfig cfg;
          cfg.rank = r;
          cfg.lambda = lambda;
          cfg.seed = seed;
          cfg.max_iters = 20'000;
          const auto sol = rrss_run(x, cfg);
          const auto opt = oracle_soft_svd(xd, r, lambda);
          const Eigen::MatrixXd z = Eigen::MatrixXd(sol.A) * Eigen::MatrixXd(sol.B).transpose();
          const Eigen::MatrixXd zo = Eigen::MatrixXd(opt.A) * Eigen::MatrixXd(opt.B).transpose();
          out.worst_product = std::max(out.worst_product, (z - zo).norm() / zo.norm());
          out.worst_cost =
              std::max(out.worst_cost, std::abs(sol.final_cost - opt.final_cost) / opt.final_cost);
          for (std::size_t i = 0; i < r; ++i) {
            const double expect = std::max(0.0, sigma[static_cast<Eigen::Index>(i)] - lambda);
            out.worst_d2 = std::max(out.worst_d2, std::abs(sol.D_squared[i] - expect));
          }
          ++out.runs;
          if (!sol.converged) ++out.unconverged;
        }
      }
    }
    out.elapsed = seconds_since(t0);
    return out;
  }();
  return suite;
}

Outcome criterion1() {
  const auto& s = small_suite();
  Outcome o;
  o.pass = s.worst_product <= 1e-6 && s.worst_cost <= 1e-8 && s.elapsed < 5.0;
  o.detail = std::to_string(s.runs) + " runs, worst product err " + fmt("%.2e", s.worst_product) +
             ", worst cost err " + fmt("%.2e", s.worst_cost) + ", " + fmt("%.2f", s.elapsed) +
             " s, unconverged " + std::to_string(s.unconverged);
  return o;
}

Outcome criterion2() {
  const auto& s = small_suite();
  return {s.worst_d2 <= 1e-8, "worst |D^2 - (sigma - lambda)^+| " + fmt("%.2e", s.worst_d2)};
}

// --- 3 ---------------------------------------------------------------------

enum class Method { Als, Colsum };

struct CostCurve {
  std::size_t first_within = 0;  // first iteration with relative gap <= 1e-4 (0: never)
  double final_gap = 0.0;
  std::size_t iters = 0;
};

CostCurve cost_curve(Method a, const SparseMatrix& x, const SolverConfig& cfg,
                     double oracle) {
  CostCurve c;
  auto observer = [&](const IterationView& v) {
    if (c.first_within == 0 &&
        (cost_rrss(x, v.A, v.B, cfg.lambda) - oracle) / oracle <= 1e-4) {
      c.first_within = v.iter;
    }
  };
  const auto sol = a == Method::Als ? als_run(x, cfg, observer) : rrss_run(x, cfg, observer);
  c.final_gap = (sol.final_cost - oracle) / oracle;
  c.iters = sol.iters;
  return c;
}

Outcome criterion3() {
  const auto t0 = Clock::now();
  Outcome o;
  std::ostringstream detail;
  for (const char* spec : {"gaussian:500x500:seed=7", "lowrank:500x500:rank=10:noise=10:seed=7"}) {
    const auto x = generate(GeneratorSpec::parse(spec));
    SolverConfig cfg;
    cfg.rank = 10;
    cfg.lambda = 0.5;
    cfg.seed = 7;
    const double oracle = oracle_soft_svd(x.to_dense(), 10, 0.5).final_cost;
    const auto als = cost_curve(Method::Als, x, cfg, oracle);
    const auto rrss = cost_curve(Method::Colsum, x, cfg, oracle);
    const bool both = als.final_gap <= 1e-4 && rrss.final_gap <= 1e-4 && als.first_within > 0 &&
                      rrss.first_within > 0;
    o.pass = o.pass && both;
    detail << spec << ": als reaches 1e-4 at " << als.first_within << ", rrss_colsum at "
           << rrss.first_within << "; ";
    if (std::string(spec).starts_with("lowrank")) {
      o.pass = o.pass && 5 * rrss.first_within <= als.first_within;
    }
  }
  const double elapsed = seconds_since(t0);
  o.pass = o.pass && elapsed < 60.0;
  detail << fmt("%.1f", elapsed) << " s";
  o.detail = detail.str();
  return o;
}

// --- 4 ---------------------------------------------------------------------

Eigen::MatrixXd rate_instance(Eigen::VectorXd* spectrum) {
  const Eigen::Index n = 200, m = 150, p = 150;
  Eigen::VectorXd s(p);
  for (Eigen::Index i = 0; i < 5; ++i) s[i] = 10.0 * std::pow(0.7, double(i));
  const double top = s[4] * 0.8;
  for (Eigen::Index i = 5; i < p; ++i) {
    s[i] = top * (1.0 - 0.95 * double(i - 5) / double(p - 6));
  }
  *spectrum = s;
  return test::with_spectrum(n, m, s, 4242);
}

struct RateCheck {
  double worst_ratio = 0.0;
  std::size_t checked = 0;
  bool reached = false;
};

RateCheck rate_check(const SparseMatrix& x, const SpectralReference& ref, SignPolicy policy) {
  SolverConfig cfg;
  cfg.rank = 5;
  cfg.lambda = 0.5;
  cfg.seed = 3;
  cfg.max_iters = 500;
  cfg.tol = 1e-15;
  cfg.sign_policy = policy;
  const double rate = theoretical_rate(ref, 5);
  RateCheck out;
  std::optional<double> prev;
  rrss_run(x, cfg, [&](const IterationView& v) {
    if (out.reached) return;
    const double err = subspace_error(v.state->U, ref, 5);
    if (err < 1e-12) {
      out.reached = true;
      return;
    }
    if (v.iter > 10 && prev) {
      out.worst_ratio = std::max(out.worst_ratio, err / *prev / rate);
      ++out.checked;
    }
    prev = err;
  });
  return out;
}

Outcome criterion4() {
  Eigen::VectorXd s;
  const Eigen::MatrixXd xd = rate_instance(&s);
  const auto x = SparseMatrix::from_dense(xd);
  const auto ref = make_spectral_reference(xd);
  const auto colsum = rate_check(x, ref, SignPolicy::column_sum());
  const auto random = rate_check(x, ref, SignPolicy::random(11));
  Outcome o;
  o.pass = colsum.reached && random.reached && colsum.worst_ratio <= 1.1 &&
           random.worst_ratio <= 1.1 && colsum.checked > 0 && random.checked > 0;
  o.detail = "rate " + fmt("%.4f", theoretical_rate(ref, 5)) + ", worst ratio/rate colsum " +
             fmt("%.4f", colsum.worst_ratio) + " (" + std::to_string(colsum.checked) +
             " steps), random " + fmt("%.4f", random.worst_ratio) + " (" +
             std::to_string(random.checked) + " steps)";
  return o;
}

// --- 5 ---------------------------------------------------------------------

Eigen::MatrixXd canonical_orthonormal(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  Eigen::MatrixXd q = test::orthonormal(n, p, seed);
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::Index imax = 0;
    q.col(j).cwiseAbs().maxCoeff(&imax);
    if (q(imax, j) < 0) q.col(j) = -q.col(j);
  }
  return q;
}

Outcome criterion5() {
  const Eigen::Index n = 30, m = 20, r = 3;
  Eigen::VectorXd s = Eigen::VectorXd::LinSpaced(m, 6.0, 0.3);
  const Eigen::MatrixXd u = canonical_orthonormal(n, m, 51);
  const Eigen::MatrixXd v = canonical_orthonormal(m, m, 52);
  const Eigen::MatrixXd xd = u * s.asDiagonal() * v.transpose();
  const auto x = SparseMatrix::from_dense(xd);
  const double lambda = 0.5 * s[r - 1];

  SolverConfig cfg;
  cfg.rank = r;
  cfg.lambda = lambda;
  cfg.max_iters = 200;
  cfg.sign_policy = SignPolicy::fixed(SignMatrix::parse("-++"), SignMatrix::parse("+++"));
  WarmStart warm{u.leftCols(r), Diagonal((s.head(r).array() - lambda).sqrt()), std::nullopt};
  const DenseMatrix a0 = scale_columns(warm.U, *warm.D);
  const auto sol = rrss_run(x, cfg, {}, &warm);

  const auto ref = make_spectral_reference(xd);
  const double measured = residual_norm(x, sol.A, sol.B);
  const double predicted = limit_cost(ref, lambda, r, SignMatrix::parse("-++")).general;
  const double best = limit_cost(ref, lambda, r, SignMatrix::identity(r)).general;
  const double drift = max_norm(sol.A - a0);
  Outcome o;
  o.pass = sol.converged && std::abs(measured - predicted) <= 1e-6 * predicted &&
           measured > best && drift <= 1e-8;
  o.detail = "residual " + fmt("%.10g", measured) + " vs predicted " + fmt("%.10g", predicted) +
             " (all-plus " + fmt("%.10g", best) + "), drift from start " + fmt("%.1e", drift);
  return o;
}

// --- 6 ---------------------------------------------------------------------

Outcome criterion6() {
  const auto t0 = Clock::now();
  const auto x = generate(GeneratorSpec::parse("gaussian:500x500:seed=7"));
  const double oracle = oracle_soft_svd(x.to_dense(), 10, 0.5).final_cost;
  SolverConfig cfg;
  cfg.rank = 10;
  cfg.lambda = 0.5;
  cfg.seed = 7;
  cfg.max_iters = 3000;
  const auto colsum = rrss_run(x, cfg);

  cfg.sign_policy = SignPolicy::random(derive_seed(cfg.seed, SeedPurpose::Sign));
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  const auto random = rrss_run(x, cfg, [&](const IterationView& v) {
    if (v.iter >= 100 && v.iter <= 200) {
      const double c = cost_rrss(x, v.A, v.B, cfg.lambda);
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
  });
  const double gap = std::abs(colsum.final_cost - oracle);
  Outcome o;
  o.pass = colsum.converged && !random.converged && random.iters == cfg.max_iters &&
           (hi - lo) > 10.0 * gap;
  o.detail = "colsum converged in " + std::to_string(colsum.iters) + " (gap " +
             fmt("%.2e", gap) + "), random stop value " + fmt("%.2e", random.stop_value) +
             " at " + std::to_string(random.iters) + ", cost spread 100-200 " +
             fmt("%.3e", hi - lo) + ", " + fmt("%.1f", seconds_since(t0)) + " s";
  return o;
}

// --- 7 ---------------------------------------------------------------------

Outcome criterion7() {
  using namespace rrss::fixedpoint;
  std::size_t points = 0, limit_fail = 0, contraction_fail = 0, closed_fail = 0, deriv_fail = 0;
  double worst_limit = 0, worst_closed = 0, worst_deriv = 0;
  const double eps = std::numeric_limits<double>::epsilon();
  for (int i = 0; i < 10; ++i) {
    const double s = 0.1 + (5.0 - 0.1) * i / 9.0;
    for (int j = 0; j < 10; ++j) {
      const double l = 0.1 + (3.0 - 0.1) * j / 9.0;
      for (int q = 1; q <= 5; ++q) {
        const double s0 = 0.8 * q;
        if (std::abs(s - l) < 1e-6) continue;
        ++points;
        const ScalarIteration it{s, l, s0};
        const auto orbit = sv_iterate(it, 2000);
        const double star = soft_max(s, l);
        const double err = std::abs(orbit.back() - star);
        worst_limit = std::max(worst_limit, err);
        if (err > 1e-10) ++limit_fail;
        const double c = contraction_constant(it);
        for (std::size_t k = 0; k + 1 < orbit.size(); ++k) {
          if (std::abs(orbit[k + 1] - star) >
              c * std::abs(orbit[k] - star) + 4 * eps * std::max(1.0, star)) {
            ++contraction_fail;
            break;
          }
        }
        if (q == 1) {
          for (const auto& fp : sv_fixed_points(it).fixed_points) {
            // Step scaled by the distance to the pole at -l^2 / (s + l).
            const double h = 1e-3 * (fp.value + l * l / (s + l));
            const auto f = [&](double t) { return sv_step(it, fp.value + t * h); };
            const double fd = (f(-2) - 8 * f(-1) + 8 * f(1) - f(2)) / (12 * h);
            const double rel = std::abs(fd - fp.derivative) / std::abs(fp.derivative);
            worst_deriv = std::max(worst_deriv, rel);
            if (rel > 1e-6) ++deriv_fail;
          }
        }
      }
    }
  }
  for (int j = 0; j < 10; ++j) {
    const double l = 0.1 + (3.0 - 0.1) * j / 9.0;
    for (int q = 1; q <= 5; ++q) {
      const double s0 = 0.8 * q;
      const auto orbit = fixedpoint::sv_iterate({l, l, s0}, 50);
      for (std::size_t k = 0; k < orbit.size(); ++k) {
        const double exact = sv_closed_form_equal(l, s0, k);
        const double rel = std::abs(orbit[k] - exact) / exact;
        worst_closed = std::max(worst_closed, rel);
        if (rel > 1e-14) ++closed_fail;
      }
    }
  }
  Outcome o;
  o.pass = limit_fail == 0 && contraction_fail == 0 && closed_fail == 0 && deriv_fail == 0;
  o.detail = std::to_string(points) + " grid points; worst limit err " + fmt("%.1e", worst_limit) +
             ", contraction violations " + std::to_string(contraction_fail) +
             ", worst closed-form rel err " + fmt("%.1e", worst_closed) +
             " (k <= 50), worst derivative rel err " + fmt("%.1e", worst_deriv);
  return o;
}

// --- 8 ---------------------------------------------------------------------

Outcome criterion8() {
  using namespace rrss::fixedpoint;
  Rng rng(808);
  std::size_t violations = 0, specs = 0, equal_ac = 0;
  const std::size_t k = 120;
  while (specs < 100) {
    const bool scalar_map = specs % 2 == 1;
    std::vector<double> e(k);
    double a = 0.9 * rng.uniform01();
    const double e0 = (rng.uniform01() < 0.5 ? -1 : 1) * (0.01 + rng.uniform01());
    PerturbedOrbit orbit;
    if (scalar_map) {
      const double s = 0.5 + 4 * rng.uniform01();
      const double l = 0.1 + 3 * rng.uniform01();
      if (std::abs(s - l) < 1e-3) continue;
      const double w0 = 0.5 + 3 * rng.uniform01();
      e[0] = e0 * 0.2 * std::min(w0, 1.0);
      for (std::size_t j = 1; j < k; ++j) e[j] = e[j - 1] * a * (0.5 + 0.5 * rng.uniform01());
      try {
        orbit = perturbed_iterate({s, l, w0}, e, w0, k, a);
      } catch (const std::domain_error&) {
        continue;
      }
    } else {
      const double c = 0.95 * rng.uniform01();
      if (specs % 10 == 0) {
        a = c;
        ++equal_ac;
      }
      const double xs = 2 * rng.normal();
      e[0] = e0;
      for (std::size_t j = 1; j < k; ++j) e[j] = -e[j - 1] * a * rng.uniform01();
      auto f = [&](double w) { return xs + c * (w - xs) * std::cos(w); };
      orbit = perturbed_orbit(f, xs, c, e, xs + 3 * rng.normal(), k, a);
    }
    ++specs;
    if (!orbit.within_bound) ++violations;
  }
  return {violations == 0, std::to_string(specs) + " specs (" + std::to_string(equal_ac) +
                               " with a = c), " + std::to_string(violations) + " violations"};
}

// --- 9 ---------------------------------------------------------------------

Outcome criterion9() {
  std::size_t svd_fail = 0, mm_fail = 0;
  Rng shapes(9009);
  for (int t = 0; t < 1000; ++t) {
    const auto r = static_cast<Eigen::Index>(1 + shapes.next() % 50);
    const auto n = r + static_cast<Eigen::Index>(shapes.next() % (201 - r));
    const Eigen::MatrixXd mtx = test::gaussian(n, r, 90'000 + static_cast<std::uint64_t>(t));
    const auto svd = thin_svd(mtx);
    const double tol = 1e-12 * static_cast<double>(r);
    const auto defect = [](const Eigen::MatrixXd& q) {
      return (q.transpose() * q - Eigen::MatrixXd::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
    };
    const double recon =
        (Eigen::MatrixXd(svd.U) * svd.S.asDiagonal() * svd.V.transpose() - mtx).norm();
    const bool ok = defect(svd.U) <= tol && defect(svd.V) <= tol &&
                    (svd.S.array() >= 0).all() &&
                    std::is_sorted(svd.S.data(), svd.S.data() + r, std::greater<>()) &&
                    recon <= 1e-12 * std::max(1.0, mtx.norm());
    if (!ok) ++svd_fail;
  }
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    Rng rng(seed);
    const std::size_t n = 1 + rng.next() % 60, m = 1 + rng.next() % 60;
    const auto x = test::random_sparse(n, m, rng.uniform01(), seed + 31);
    std::stringstream ss;
    write_matrix_market(ss, x);
    if (!(read_matrix_market(ss) == x)) ++mm_fail;
  }
  return {svd_fail == 0 && mm_fail == 0, "thin_svd failures " + std::to_string(svd_fail) +
                                             "/1000, Matrix Market failures " +
                                             std::to_string(mm_fail) + "/300"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", criterion1},
      {"soft-threshold limit", criterion2},
      {"500x500 convergence and speed", criterion3},
      {"subspace rate", criterion4},
      {"sign-mismatch limit cost", criterion5},
      {"random-sign failure mode", criterion6},
      {"fixed-point suite", criterion7},
      {"perturbation bound", criterion8},
      {"kernel invariants", criterion9},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
