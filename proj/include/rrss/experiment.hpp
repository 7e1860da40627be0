#pragma once

// Experiment runner: loads or generates X, runs the selected solvers, writes
// one trace CSV per solver, a summary CSV, and optional SVG charts.
//
// Config file: one key=value per line, '#' starts a comment.
//   input = path.mtx         | gen = <generator spec>      (exactly one)
//   algorithms = als, rrss_raw, rrss_random, rrss_colsum  (any nonempty subset)
//   rank, lambda, tol, max_iters, seed
//   output_dir = dir          (default ".")
//   svg = true|false          (default true)
//   oracle = auto|on|off      (default auto: on when max(n, m) <= 2000)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "rrss/diagnostics.hpp"
#include "rrss/io.hpp"
#include "rrss/solver.hpp"
#include "rrss/svg.hpp"

namespace rrss {

enum class Algorithm { Als, RrssRaw, RrssRandom, RrssColsum };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Als: return "als";
    case Algorithm::RrssRaw: return "rrss_raw";
    case Algorithm::RrssRandom: return "rrss_random";
    case Algorithm::RrssColsum: return "rrss_colsum";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view name) {
  for (auto a : {Algorithm::Als, Algorithm::RrssRaw, Algorithm::RrssRandom,
                 Algorithm::RrssColsum}) {
    if (name == algorithm_name(a)) return a;
  }
  throw std::invalid_argument("unknown algorithm '" + std::string(name) +
                              "' (als, rrss_raw, rrss_random, rrss_colsum)");
}

/// The sign policy an algorithm runs with. RANDOM draws from the sign seed.
inline SignPolicy algorithm_policy(Algorithm a, std::uint64_t master_seed) {
  switch (a) {
    case Algorithm::RrssRaw: return SignPolicy::raw();
    case Algorithm::RrssRandom:
      return SignPolicy::random(derive_seed(master_seed, SeedPurpose::Sign));
    default: return SignPolicy::column_sum();
  }
}

/// Runs one algorithm on X. The sign policy in `cfg` is used as given.
inline SoftSVDSolution run_algorithm(Algorithm a, const SparseMatrix& x,
                                     const SolverConfig& cfg,
                                     const IterationObserver& observer = {}) {
  return a == Algorithm::Als ? als_run(x, cfg, observer) : rrss_run(x, cfg, observer);
}

enum class OracleMode { Auto, On, Off };

using InputSource = std::variant<std::string, GeneratorSpec>;  // path | generator

inline std::string describe(const InputSource& src) {
  if (const auto* p = std::get_if<std::string>(&src)) return *p;
  return std::get<GeneratorSpec>(src).to_string();
}

inline SparseMatrix load_input(const InputSource& src) {
  if (const auto* p = std::get_if<std::string>(&src)) return read_matrix_market(*p);
  return generate(std::get<GeneratorSpec>(src));
}

/// One-line provenance record written at the top of trace files.
inline std::string provenance(const SolverConfig& cfg, std::string_view algorithm,
                              const std::string& source) {
  std::ostringstream os;
  os << "r=" << cfg.rank << " lambda=" << detail::format_double(cfg.lambda)
     << " tol=" << detail::format_double(cfg.tol) << " max_iters=" << cfg.max_iters
     << " seed=" << cfg.seed << " policy="
     << (algorithm == "als" ? std::string("none") : cfg.sign_policy.to_string())
     << " algorithm=" << algorithm << " input=" << source;
  return os.str();
}

struct ExperimentConfig {
  std::optional<InputSource> input;
  SolverConfig solver;
  std::vector<Algorithm> algorithms;
  std::filesystem::path output_dir = ".";
  bool emit_svg = true;
  OracleMode oracle = OracleMode::Auto;

  void validate() const {
    if (!input) throw std::invalid_argument("config: one of 'input' or 'gen' is required");
    if (algorithms.empty()) throw std::invalid_argument("config: no algorithms selected");
  }

  static ExperimentConfig parse(std::istream& in, const std::string& source = "<config>") {
    ExperimentConfig cfg;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto tok = detail::split_ws(line);
      if (tok.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError(source, lineno, "expected key = value");
      const auto trim = [](std::string_view s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string_view::npos) return std::string_view{};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
      };
      const std::string key(trim(std::string_view(line).substr(0, eq)));
      const std::string val(trim(std::string_view(line).substr(eq + 1)));
      if (!seen.insert(key).second) throw ParseError(source, lineno, "duplicate key '" + key + "'");
      try {
        cfg.set(key, val);
      } catch (const std::exception& e) {
        throw ParseError(source, lineno, e.what());
      }
    }
    if (seen.count("input") && seen.count("gen")) {
      throw std::invalid_argument("config: 'input' and 'gen' are mutually exclusive");
    }
    cfg.validate();
    return cfg;
  }

  static ExperimentConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    return parse(in, path);
  }

 private:
  void set(const std::string& key, const std::string& val) {
    auto number = [&](auto& out) {
      if (!detail::parse_number(val, out)) {
        throw std::invalid_argument("bad value '" + val + "' for '" + key + "'");
      }
    };
    if (key == "input") {
      input = val;
    } else if (key == "gen") {
      input = GeneratorSpec::parse(val);
    } else if (key == "algorithms") {
      std::string item;
      std::istringstream is(val);
      while (std::getline(is, item, ',')) {
        const auto t = detail::split_ws(item);
        if (t.size() != 1) throw std::invalid_argument("bad algorithm list '" + val + "'");
        const Algorithm a = parse_algorithm(t[0]);
        if (std::find(algorithms.begin(), algorithms.end(), a) == algorithms.end()) {
          algorithms.push_back(a);
        }
      }
    } else if (key == "rank") {
      number(solver.rank);
    } else if (key == "lambda") {
      number(solver.lambda);
    } else if (key == "tol") {
      number(solver.tol);
    } else if (key == "max_iters") {
      number(solver.max_iters);
    } else if (key == "seed") {
      number(solver.seed);
    } else if (key == "output_dir") {
      output_dir = val;
    } else if (key == "svg") {
      if (val == "true" || val == "1") emit_svg = true;
      else if (val == "false" || val == "0") emit_svg = false;
      else throw std::invalid_argument("svg must be true or false");
    } else if (key == "oracle") {
      if (val == "auto") oracle = OracleMode::Auto;
      else if (val == "on") oracle = OracleMode::On;
      else if (val == "off") oracle = OracleMode::Off;
      else throw std::invalid_argument("oracle must be auto, on or off");
    } else {
      throw std::invalid_argument("unknown key '" + key + "'");
    }
  }
};

struct RunSummary {
  Algorithm algorithm;
  SoftSVDSolution solution;
  std::optional<double> oracle_cost;
};

/// Runs every algorithm and writes the artifacts. Throws on I/O or
/// validation failures.
inline std::vector<RunSummary> run_experiment_detailed(const ExperimentConfig& cfg,
                                                       std::ostream& log) {
  cfg.validate();
  const std::string source = describe(*cfg.input);
  const SparseMatrix x = load_input(*cfg.input);
  if (auto w = density_warning(x)) log << *w << '\n';
  cfg.solver.validate(x.rows(), x.cols());

  std::filesystem::create_directories(cfg.output_dir);

  const bool use_oracle =
      cfg.oracle == OracleMode::On ||
      (cfg.oracle == OracleMode::Auto && std::max(x.rows(), x.cols()) <= 2000);
  std::optional<SpectralReference> ref;
  std::optional<double> oracle_cost;
  if (use_oracle) {
    const Eigen::MatrixXd dense = x.to_dense();
    ref = make_spectral_reference(dense);
    oracle_cost = oracle_soft_svd(dense, cfg.solver.rank, cfg.solver.lambda).final_cost;
  }

  auto open = [&](const std::string& name) {
    const auto path = cfg.output_dir / name;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return out;
  };

  std::vector<RunSummary> runs;
  std::vector<svg::Series> cost_series, subspace_series;
  for (const Algorithm algo : cfg.algorithms) {
    SolverConfig scfg = cfg.solver;
    scfg.sign_policy = algorithm_policy(algo, scfg.seed);
    const std::string name = algorithm_name(algo);

    std::ofstream trace = open(name + "_trace.csv");
    TraceCsvWriter writer(trace, scfg.rank, provenance(scfg, name, source));
    TraceBuilder builder(x, scfg.lambda, scfg.rank, ref ? &*ref : nullptr);
    svg::Series cost{name, {}}, sub{name, {}};
    const double scale = oracle_cost ? std::max(std::abs(*oracle_cost), 1e-300) : 1.0;
    auto observer = make_trace_observer(builder, [&](const TraceRecord& rec) {
      writer.write(rec);
      const double k = static_cast<double>(rec.iter);
      cost.points.emplace_back(
          k, oracle_cost ? (rec.cost_rrss - *oracle_cost) / scale : rec.cost_rrss);
      if (rec.subspace_err_U) sub.points.emplace_back(k, *rec.subspace_err_U);
    });

    log << name << ": running (" << source << ", r=" << scfg.rank << ")\n";
    SoftSVDSolution sol = run_algorithm(algo, x, scfg, observer);
    trace.flush();
    if (!trace) throw std::runtime_error("write to " + name + "_trace.csv failed");
    log << name << ": iters=" << sol.iters << " converged=" << (sol.converged ? "yes" : "no")
        << " cost=" << detail::format_double(sol.final_cost) << '\n';
    cost_series.push_back(std::move(cost));
    if (!sub.points.empty()) subspace_series.push_back(std::move(sub));
    runs.push_back({algo, std::move(sol), oracle_cost});
  }

  {
    std::ofstream summary = open("summary.csv");
    summary << "# " << provenance(cfg.solver, "summary", source) << '\n';
    summary << "algorithm,final_cost,oracle_cost,relative_gap,iterations,converged,stop_value\n";
    for (const auto& run : runs) {
      const auto& s = run.solution;
      summary << algorithm_name(run.algorithm) << ',' << detail::format_double(s.final_cost)
              << ',';
      if (run.oracle_cost) {
        summary << detail::format_double(*run.oracle_cost) << ','
                << detail::format_double((s.final_cost - *run.oracle_cost) /
                                         std::abs(*run.oracle_cost));
      } else {
        summary << "NA,NA";
      }
      summary << ',' << s.iters << ',' << (s.converged ? 1 : 0) << ','
              << detail::format_double(s.stop_value) << '\n';
    }
    if (!summary) throw std::runtime_error("write to summary.csv failed");
  }

  if (cfg.emit_svg) {
    const std::string y = oracle_cost ? "(cost - oracle) / oracle" : "cost";
    for (const auto& s : cost_series) {
      std::ofstream out = open(s.name + "_cost.svg");
      svg::write_log_chart(out, s.name + " cost", "iteration", y, {s});
    }
    if (!subspace_series.empty()) {
      std::ofstream out = open("subspace.svg");
      svg::write_log_chart(out, "subspace error", "iteration", "max |U_k^T U_(r+1:n)|",
                           subspace_series);
    }
  }
  return runs;
}

/// 0 when every run converged, 2 when any did not, 1 on error.
inline int run_experiment(const ExperimentConfig& cfg, std::ostream& log = std::cout,
                          std::ostream& err = std::cerr) {
  try {
    const auto runs = run_experiment_detailed(cfg, log);
    for (const auto& r : runs) {
      if (!r.solution.converged) return 2;
    }
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace rrss
