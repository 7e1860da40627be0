#pragma once

// Matrix Market I/O and the synthetic instance generators.
//
// Reader: "%%MatrixMarket matrix {coordinate|array} {real|integer}
// {general|symmetric}". Symmetric storage is expanded; duplicates and
// out-of-range indices are errors reported with their line number.
// Writer: coordinate real general, shortest round-trip decimal values.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rrss/linalg.hpp"
#include "rrss/rng.hpp"

namespace rrss {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

template <class T>
bool parse_number(std::string_view tok, T& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

}  // namespace detail

inline SparseMatrix read_matrix_market(std::istream& in,
                                       const std::string& source = "<stream>") {
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError(source, lineno, what);
  };

  if (!std::getline(in, line)) {
    lineno = 1;
    throw fail("empty input");
  }
  ++lineno;
  const auto head = detail::split_ws(line);
  if (head.size() != 5 || head[0] != "%%MatrixMarket") {
    throw fail("expected '%%MatrixMarket matrix <format> <field> <symmetry>'");
  }
  const std::string object = detail::lower(head[1]);
  const std::string format = detail::lower(head[2]);
  const std::string field = detail::lower(head[3]);
  const std::string symmetry = detail::lower(head[4]);
  if (object != "matrix") throw fail("unsupported object '" + std::string(head[1]) + "'");
  if (format != "coordinate" && format != "array") {
    throw fail("unsupported format '" + std::string(head[2]) + "'");
  }
  if (field != "real" && field != "integer") {
    throw fail("unsupported field '" + std::string(head[3]) + "' (real or integer only)");
  }
  if (symmetry != "general" && symmetry != "symmetric") {
    throw fail("unsupported symmetry '" + std::string(head[4]) + "'");
  }
  const bool coordinate = format == "coordinate";
  const bool symmetric = symmetry == "symmetric";

  auto next_data_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '%') continue;
      return true;
    }
    return false;
  };

  if (!next_data_line()) throw fail("missing size line");
  const auto size_tok = detail::split_ws(line);
  std::size_t nrows = 0, ncols = 0, count = 0;
  if (size_tok.size() != (coordinate ? 3u : 2u) ||
      !detail::parse_number(size_tok[0], nrows) ||
      !detail::parse_number(size_tok[1], ncols) ||
      (coordinate && !detail::parse_number(size_tok[2], count))) {
    throw fail(coordinate ? "expected 'rows cols nnz'" : "expected 'rows cols'");
  }
  if (symmetric && nrows != ncols) throw fail("symmetric matrix must be square");
  if (!coordinate) {
    count = symmetric ? nrows * (nrows + 1) / 2 : nrows * ncols;
  }

  std::vector<Triplet> entries;
  entries.reserve(symmetric ? 2 * count : count);
  std::unordered_map<std::uint64_t, std::size_t> seen;
  auto add = [&](std::size_t i, std::size_t j, double v) {
    const std::uint64_t key = static_cast<std::uint64_t>(i) * ncols + j;
    if (!seen.emplace(key, lineno).second) {
      throw fail("duplicate entry (" + std::to_string(i + 1) + ", " +
                 std::to_string(j + 1) + ")");
    }
    entries.push_back({i, j, v});
  };

  std::size_t ai = 0, aj = 0;  // array cursor, column-major
  for (std::size_t k = 0; k < count; ++k) {
    if (!next_data_line()) {
      throw fail("expected " + std::to_string(count) + " entries, found " +
                 std::to_string(k));
    }
    const auto tok = detail::split_ws(line);
    double v = 0.0;
    std::size_t i = 0, j = 0;
    if (coordinate) {
      if (tok.size() != 3 || !detail::parse_number(tok[0], i) ||
          !detail::parse_number(tok[1], j) || !detail::parse_number(tok[2], v)) {
        throw fail("expected 'row col value'");
      }
      if (i < 1 || i > nrows || j < 1 || j > ncols) {
        throw fail("index (" + std::to_string(i) + ", " + std::to_string(j) +
                   ") outside " + shape_string(nrows, ncols));
      }
      --i;
      --j;
      if (symmetric && j > i) throw fail("symmetric storage must be lower triangular");
    } else {
      if (tok.size() != 1 || !detail::parse_number(tok[0], v)) throw fail("expected a value");
      i = ai;
      j = aj;
      if (++ai == nrows) {
        ++aj;
        ai = symmetric ? aj : 0;
      }
    }
    if (!std::isfinite(v)) throw fail("non-finite value");
    if (!coordinate && v == 0.0) continue;
    add(i, j, v);
    if (symmetric && i != j) add(j, i, v);
  }
  if (next_data_line()) throw fail("unexpected data after " + std::to_string(count) + " entries");
  return SparseMatrix::from_triplets(nrows, ncols, std::move(entries));
}

inline SparseMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return read_matrix_market(in, path);
}

inline void write_matrix_market(std::ostream& out, const SparseMatrix& x,
                                const std::string& comment = {}) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  if (!comment.empty()) out << "% " << comment << '\n';
  out << x.rows() << ' ' << x.cols() << ' ' << x.nnz() << '\n';
  char buf[64];
  for (const auto& t : x.triplets()) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), t.value);
    out << t.row + 1 << ' ' << t.col + 1 << ' ' << std::string_view(buf, res.ptr - buf)
        << '\n';
  }
}

inline void write_matrix_market(const std::string& path, const SparseMatrix& x,
                                const std::string& comment = {}) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_matrix_market(out, x, comment);
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

enum class GeneratorKind { Gaussian, LowRankNoise };

/// "gaussian:<n>x<m>[:seed=<s>]"
/// "lowrank:<n>x<m>:rank=<r>[:noise=<scale>][:seed=<s>]"   (noise defaults to 10)
struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::Gaussian;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t true_rank = 0;
  double noise_scale = 10.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n == 0 || m == 0) throw std::invalid_argument("generator: dimensions must be positive");
    if (kind == GeneratorKind::LowRankNoise) {
      if (true_rank == 0) throw std::invalid_argument("generator: rank must be positive");
      if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
        throw std::invalid_argument("generator: noise must be finite and >= 0");
      }
    }
  }

  static GeneratorSpec parse(std::string_view text) {
    auto bad = [&](const std::string& why) {
      return std::invalid_argument("generator spec '" + std::string(text) + "': " + why);
    };
    std::vector<std::string_view> parts;
    for (std::size_t pos = 0;;) {
      const auto colon = text.find(':', pos);
      parts.push_back(text.substr(pos, colon == std::string_view::npos ? colon : colon - pos));
      if (colon == std::string_view::npos) break;
      pos = colon + 1;
    }
    if (parts.size() < 2) throw bad("expected <kind>:<n>x<m>[:key=value...]");

    GeneratorSpec spec;
    if (parts[0] == "gaussian") {
      spec.kind = GeneratorKind::Gaussian;
    } else if (parts[0] == "lowrank") {
      spec.kind = GeneratorKind::LowRankNoise;
    } else {
      throw bad("unknown kind '" + std::string(parts[0]) + "'");
    }
    const auto x = parts[1].find('x');
    if (x == std::string_view::npos || !detail::parse_number(parts[1].substr(0, x), spec.n) ||
        !detail::parse_number(parts[1].substr(x + 1), spec.m)) {
      throw bad("bad dimensions '" + std::string(parts[1]) + "'");
    }
    for (std::size_t k = 2; k < parts.size(); ++k) {
      const auto eq = parts[k].find('=');
      if (eq == std::string_view::npos) throw bad("expected key=value, got '" + std::string(parts[k]) + "'");
      const auto key = parts[k].substr(0, eq);
      const auto val = parts[k].substr(eq + 1);
      bool ok = false;
      if (key == "seed") {
        ok = detail::parse_number(val, spec.seed);
      } else if (key == "rank" && spec.kind == GeneratorKind::LowRankNoise) {
        ok = detail::parse_number(val, spec.true_rank);
      } else if (key == "noise" && spec.kind == GeneratorKind::LowRankNoise) {
        ok = detail::parse_number(val, spec.noise_scale);
      } else {
        throw bad("unknown key '" + std::string(key) + "'");
      }
      if (!ok) throw bad("bad value for '" + std::string(key) + "'");
    }
    spec.validate();
    return spec;
  }

  std::string to_string() const {
    std::ostringstream os;
    if (kind == GeneratorKind::Gaussian) {
      os << "gaussian:" << n << 'x' << m << ":seed=" << seed;
    } else {
      os << "lowrank:" << n << 'x' << m << ":rank=" << true_rank
         << ":noise=" << noise_scale << ":seed=" << seed;
    }
    return os.str();
  }
};

/// Draws from Rng(derive_seed(seed, Matrix)). Gaussian: X row-major.
/// Low rank: A~ (n x r) row-major, then B~ (m x r), then the noise X~ (n x m);
/// X = A~ B~^T + noise_scale X~.
inline SparseMatrix generate(const GeneratorSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, SeedPurpose::Matrix));
  const auto n = static_cast<Eigen::Index>(spec.n);
  const auto m = static_cast<Eigen::Index>(spec.m);
  auto fill = [&](DenseMatrix& d) {
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      for (Eigen::Index j = 0; j < d.cols(); ++j) d(i, j) = rng.normal();
    }
  };
  DenseMatrix x(n, m);
  if (spec.kind == GeneratorKind::Gaussian) {
    fill(x);
  } else {
    const auto r = static_cast<Eigen::Index>(spec.true_rank);
    DenseMatrix a(n, r), b(m, r), noise(n, m);
    fill(a);
    fill(b);
    fill(noise);
    x = a * b.transpose() + spec.noise_scale * noise;
  }
  return SparseMatrix::from_dense(x);
}

/// Warning text when a matrix is stored above 25% fill.
inline std::optional<std::string> density_warning(const SparseMatrix& x) {
  if (x.density() <= 0.25) return std::nullopt;
  std::ostringstream os;
  os << "warning: matrix is " << shape_string(x.rows(), x.cols()) << " with "
     << static_cast<int>(x.density() * 100.0 + 0.5)
     << "% stored entries; the sparse kernels gain nothing at this fill";
  return os.str();
}

}  // namespace rrss
