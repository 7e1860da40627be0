#pragma once

// Command-line front end. Exit codes: 0 ok, 1 error, 2 not converged,
// 64 usage error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rrss/experiment.hpp"
#include "rrss/fixedpoint.hpp"

namespace rrss::cli {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kNotConverged = 2;
constexpr int kUsage = 64;

struct SolveArgs {
  std::string input;
  std::string gen;
  std::size_t rank = 1;
  double lambda = 0.5;
  double tol = 1e-9;
  std::size_t max_iters = 1000;
  std::uint64_t seed = 0;
  std::string sign_policy = "colsum";
  std::string algorithm = "rrss";
  std::string trace;
  std::string oracle = "auto";
};

struct FixedPointArgs {
  double s = 0.0;
  double lambda = 0.0;
  double s0 = 1.0;
  std::size_t iters = 50;
};

struct GenArgs {
  std::string spec;
  std::string out;
};

class UsageError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline int do_solve(const SolveArgs& a, std::ostream& out, std::ostream& err) {
  SolverConfig cfg;
  InputSource source;
  Algorithm algo = Algorithm::RrssColsum;
  try {
    if (!a.gen.empty()) {
      source = GeneratorSpec::parse(a.gen);
    } else {
      source = a.input;
    }
    cfg.rank = a.rank;
    cfg.lambda = a.lambda;
    cfg.tol = a.tol;
    cfg.max_iters = a.max_iters;
    cfg.seed = a.seed;
    cfg.sign_policy =
        SignPolicy::parse(a.sign_policy, derive_seed(a.seed, SeedPurpose::Sign));
    cfg.sign_policy.validate(cfg.rank);
    cfg.trace_enabled = !a.trace.empty();
    if (a.algorithm == "als") {
      algo = Algorithm::Als;
    } else if (a.algorithm != "rrss") {
      throw UsageError("--algorithm must be rrss or als");
    }
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  const SparseMatrix x = load_input(source);
  if (auto w = density_warning(x)) err << *w << '\n';
  cfg.validate(x.rows(), x.cols());

  const std::string algo_name = algo == Algorithm::Als ? "als" : "rrss";
  std::optional<SpectralReference> ref;
  std::optional<double> oracle_cost;
  const bool use_oracle = a.oracle == "on" ||
                          (a.oracle == "auto" && std::max(x.rows(), x.cols()) <= 2000);
  if (use_oracle) {
    const Eigen::MatrixXd dense = x.to_dense();
    if (cfg.trace_enabled) ref = make_spectral_reference(dense);
    oracle_cost = oracle_soft_svd(dense, cfg.rank, cfg.lambda).final_cost;
  }

  std::ofstream trace_file;
  std::optional<TraceCsvWriter> writer;
  std::optional<TraceBuilder> builder;
  IterationObserver observer;
  if (cfg.trace_enabled) {
    trace_file.open(a.trace);
    if (!trace_file) throw std::runtime_error("cannot open '" + a.trace + "' for writing");
    writer.emplace(trace_file, cfg.rank, provenance(cfg, algo_name, describe(source)));
    builder.emplace(x, cfg.lambda, cfg.rank, ref ? &*ref : nullptr);
    observer = make_trace_observer(*builder, [&](const TraceRecord& r) { writer->write(r); });
  }

  const SoftSVDSolution sol = run_algorithm(algo, x, cfg, observer);
  if (trace_file.is_open()) {
    trace_file.flush();
    if (!trace_file) throw std::runtime_error("write to '" + a.trace + "' failed");
  }

  using detail::format_double;
  out << "# " << provenance(cfg, algo_name, describe(source)) << '\n';
  out << "iterations " << sol.iters << '\n';
  out << "converged " << (sol.converged ? "yes" : "no") << '\n';
  out << "stop_value " << format_double(sol.stop_value) << '\n';
  out << "cost " << format_double(sol.final_cost) << '\n';
  if (oracle_cost) {
    out << "oracle_cost " << format_double(*oracle_cost) << '\n';
    out << "relative_gap "
        << format_double((sol.final_cost - *oracle_cost) / std::abs(*oracle_cost)) << '\n';
  }
  out << "effective_rank " << sol.effective_rank << '\n';
  out << "d_squared";
  for (Eigen::Index i = 0; i < sol.D_squared.size(); ++i) {
    out << ' ' << format_double(sol.D_squared[i]);
  }
  out << '\n';
  return sol.converged ? kOk : kNotConverged;
}

inline int do_fixedpoint(const FixedPointArgs& a, std::ostream& out) {
  const fixedpoint::ScalarIteration it{a.s, a.lambda, a.s0};
  it.validate();
  const auto orbit = fixedpoint::sv_iterate(it, a.iters);
  using detail::format_double;
  out << "k,s_k\n";
  for (std::size_t k = 0; k < orbit.size(); ++k) {
    out << k << ',' << format_double(orbit[k]) << '\n';
  }
  out << "# limit " << format_double(fixedpoint::soft_max(a.s, a.lambda)) << '\n';
  if (a.s == a.lambda) {
    out << "# s == lambda: s_k = lambda s0 / (2 k s0 + lambda)\n";
  } else {
    for (const auto& fp : fixedpoint::sv_fixed_points(it).fixed_points) {
      out << "# fixed point " << format_double(fp.value) << " derivative "
          << format_double(fp.derivative) << (fp.stable ? " stable" : " unstable") << '\n';
    }
  }
  return kOk;
}

inline int do_gen(const GenArgs& a, std::ostream& out, std::ostream& err) {
  GeneratorSpec spec;
  try {
    spec = GeneratorSpec::parse(a.spec);
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }
  const SparseMatrix x = generate(spec);
  if (auto w = density_warning(x)) err << *w << '\n';
  write_matrix_market(a.out, x, "generated by rrss gen " + spec.to_string());
  out << "wrote " << a.out << " (" << shape_string(x.rows(), x.cols()) << ", nnz "
      << x.nnz() << ")\n";
  return kOk;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Rank-restricted soft SVD solver and diagnostics", "rrss"};
  app.require_subcommand(1);

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Run a solver on one matrix");
  auto* in_opt = s->add_option("--input", solve.input, "Matrix Market file");
  auto* gen_opt = s->add_option("--gen", solve.gen, "generator spec, e.g. gaussian:500x500:seed=7");
  in_opt->excludes(gen_opt);
  s->add_option("--rank", solve.rank, "target rank r")->required();
  s->add_option("--lambda", solve.lambda, "regularization")->capture_default_str();
  s->add_option("--tol", solve.tol, "stopping tolerance")->capture_default_str();
  s->add_option("--max-iters", solve.max_iters, "iteration cap")->capture_default_str();
  s->add_option("--seed", solve.seed, "master seed")->capture_default_str();
  s->add_option("--sign-policy", solve.sign_policy,
                "colsum | raw | random[:seed] | fixed:<pattern>[/<pattern>]")
      ->capture_default_str();
  s->add_option("--algorithm", solve.algorithm, "rrss | als")
      ->check(CLI::IsMember({"rrss", "als"}))
      ->capture_default_str();
  s->add_option("--trace", solve.trace, "write the per-iteration trace CSV here");
  s->add_option("--oracle", solve.oracle, "dense reference SVD: auto | on | off")
      ->check(CLI::IsMember({"auto", "on", "off"}))
      ->capture_default_str();

  std::string config;
  auto* e = app.add_subcommand("experiment", "Run an experiment config");
  e->add_option("--config", config, "key=value config file")->required();

  FixedPointArgs fp;
  auto* f = app.add_subcommand("fixedpoint", "Iterate the scalar singular-value map");
  f->add_option("--s", fp.s, "singular value")->required();
  f->add_option("--lambda", fp.lambda, "regularization")->required();
  f->add_option("--s0", fp.s0, "initial value")->capture_default_str();
  f->add_option("--iters", fp.iters, "iterations")->capture_default_str();

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Write a generated matrix as Matrix Market");
  g->add_option("--spec", gen.spec, "generator spec")->required();
  g->add_option("--out", gen.out, "output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& ex) {
    if (ex.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "usage error: " << ex.what() << '\n';
    return kUsage;
  }

  try {
    if (s->parsed()) {
      if (solve.input.empty() == solve.gen.empty()) {
        err << "usage error: exactly one of --input or --gen is required\n";
        return kUsage;
      }
      return do_solve(solve, out, err);
    }
    if (e->parsed()) {
      ExperimentConfig cfg;
      try {
        cfg = ExperimentConfig::parse_file(config);
      } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return kError;
      }
      return run_experiment(cfg, out, err);
    }
    if (f->parsed()) {
      try {
        FixedPointArgs checked = fp;
        fixedpoint::ScalarIteration{checked.s, checked.lambda, checked.s0}.validate();
        if (checked.iters < 1) throw std::invalid_argument("--iters must be >= 1");
      } catch (const std::invalid_argument& ex) {
        err << "usage error: " << ex.what() << '\n';
        return kUsage;
      }
      return do_fixedpoint(fp, out);
    }
    if (g->parsed()) return do_gen(gen, out, err);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kError;
  }
  return kUsage;
}

}  // namespace rrss::cli
