#pragma once

#include <Eigen/Core>
#include <Eigen/QR>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fst/io.hpp"
#include "fst/rng.hpp"

namespace fst {

/// Haar-random orthogonal matrix: QR of a seeded Gaussian matrix with the
/// sign convention that the triangular factor has positive diagonal.
inline RowMatrix gen_orthogonal(std::int64_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gen_orthogonal: n must be positive");
  SeededRng rng(seed);
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = rng.gaussian();

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return RowMatrix(q);
}

/// A unit vector x whose image v = Ax has exactly s entries of magnitude
/// 1/sqrt(s) at uniform random positions (A orthogonal, so x = A^T v).
/// Returns (x, v).
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> gen_exact_sparse(
    const Eigen::Ref<const RowMatrix>& a, std::int64_t s, std::uint64_t seed) {
  const std::int64_t m = a.rows();
  if (s < 1 || s > m) throw std::invalid_argument("gen_exact_sparse: need 1 <= s <= m");

  SeededRng rng(seed);
  // Partial Fisher-Yates for s distinct positions.
  std::vector<std::int64_t> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), std::int64_t{0});
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(m);
  const double magnitude = 1.0 / std::sqrt(static_cast<double>(s));
  for (std::int64_t i = 0; i < s; ++i) {
    const auto j = i + static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(m - i)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    truth[perm[static_cast<std::size_t>(i)]] = rng.coin() ? magnitude : -magnitude;
  }
  return {a.transpose() * truth, truth};
}

/// The Gaussian-mixture model: entries of v = Ax are N(0,1) with probability
/// p and zero otherwise, then x = A^T v and both are rescaled to |x|_2 = 1.
/// An all-zero draw is retried on the next substream.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> gen_mixture(
    const Eigen::Ref<const RowMatrix>& a, double p, std::uint64_t seed) {
  if (!(p > 0) || p > 1) throw std::invalid_argument("gen_mixture: need 0 < p <= 1");
  const std::int64_t m = a.rows();

  Eigen::VectorXd truth(m);
  for (std::uint64_t attempt = 0;; ++attempt) {
    SeededRng rng(mix_seed(seed) ^ (attempt * 0x9e3779b97f4a7c15ull));
    bool any = false;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (rng.unit_double() <= p) {
        truth[i] = rng.gaussian();
        any = true;
      } else {
        truth[i] = 0.0;
      }
    }
    if (any) break;
  }

  Eigen::VectorXd x = a.transpose() * truth;
  const double norm = x.norm();
  x /= norm;
  truth /= norm;
  return {std::move(x), std::move(truth)};
}

}  // namespace fst
