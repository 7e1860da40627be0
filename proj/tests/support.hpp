#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>

#include "rrss/linalg.hpp"
#include "rrss/rng.hpp"

namespace rrss::test {

inline Eigen::MatrixXd gaussian(Eigen::Index n, Eigen::Index m, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd d(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) d(i, j) = rng.normal();
  }
  return d;
}

/// Roughly `fill` of the entries are kept.
inline SparseMatrix random_sparse(std::size_t n, std::size_t m, double fill,
                                  std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (rng.uniform01() < fill) t.push_back({i, j, rng.normal()});
    }
  }
  return SparseMatrix::from_triplets(n, m, std::move(t));
}

/// Haar-ish orthonormal columns built with a dense QR (independent of the
/// library's random_orthonormal).
inline Eigen::MatrixXd orthonormal(Eigen::Index n, Eigen::Index r, std::uint64_t seed) {
  const Eigen::MatrixXd g = gaussian(n, r, seed);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, r);
}

/// U diag(s) V^T with random orthonormal factors.
inline Eigen::MatrixXd with_spectrum(Eigen::Index n, Eigen::Index m,
                                     const Eigen::VectorXd& s, std::uint64_t seed) {
  const Eigen::Index p = s.size();
  return orthonormal(n, p, seed) * s.asDiagonal() *
         orthonormal(m, p, seed + 7919).transpose();
}

/// Largest ratio s_{i+1}/s_i over the leading `count` + 1 values.
inline double max_consecutive_ratio(const Eigen::VectorXd& s, Eigen::Index count) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < count && i + 1 < s.size(); ++i) {
    worst = std::max(worst, s[i + 1] / s[i]);
  }
  return worst;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
#ifdef RRSS_TEST_TMP
  std::filesystem::path base = RRSS_TEST_TMP;
#else
  std::filesystem::path base = std::filesystem::temp_directory_path() / "rrss_test";
#endif
  auto dir = base / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace rrss::test
