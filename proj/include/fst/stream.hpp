#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "fst/kerdock.hpp"
#include "fst/rng.hpp"
#include "fst/sketch.hpp"

namespace fst {

/// Parameters of one streaming transform. The recovery guarantee presumes
/// |x|_2 = 1 and x in Sigma(A, s, delta); the computation accepts any x.
struct StreamParams {
  double epsilon = 0;
  double delta = 0;
  std::int64_t s = 1;
  std::int64_t J = 1;      // batch size
  std::int64_t K = 1;      // batch count
  std::int64_t widen = 10; // candidate set holds widen*s indices
  std::uint64_t seed = 0;

  void validate() const {
    if (!(epsilon > delta) || delta < 0) throw std::invalid_argument("StreamParams: need epsilon > delta >= 0");
    if (s < 1) throw std::invalid_argument("StreamParams: need s >= 1");
    if (J < 1 || K < 1) throw std::invalid_argument("StreamParams: need J, K >= 1");
    if (widen < 1) throw std::invalid_argument("StreamParams: need widen >= 1");
    if (J > std::numeric_limits<std::int64_t>::max() / K)
      throw std::overflow_error("StreamParams: J*K overflows");
  }
};

/// The median-of-means estimator of Ax, kept for diagnostics.
struct Estimate {
  Eigen::VectorXd mu;
  std::int64_t samples_used = 0;
};

/// h_eps(Ax) in sparse form: sorted support indices with exact values, plus
/// the inspected candidate set and the estimator that produced it.
struct TransformResult {
  std::vector<std::int64_t> support;
  std::vector<double> values;
  std::vector<std::int64_t> candidate_set;
  Estimate estimate;
};

/// Sample counts from the deviation guarantee: J = ceil(4 e^2 |A|^2_{2->inf} /
/// gamma^2) and K = max(1, ceil(2 ln(m/eta))).
inline std::pair<std::int64_t, std::int64_t> choose_params(double row_norm_max, double gamma,
                                                           double eta, std::int64_t m) {
  if (!(gamma > 0)) throw std::invalid_argument("choose_params: gamma must be positive");
  if (!(eta > 0) || eta > 1) throw std::invalid_argument("choose_params: eta must be in (0,1]");
  if (m < 1) throw std::invalid_argument("choose_params: m must be positive");
  const double e2 = 7.38905609893065;  // e^2
  const double j_real = 4.0 * e2 * row_norm_max * row_norm_max / (gamma * gamma);
  const auto j = static_cast<std::int64_t>(std::max(1.0, std::ceil(j_real)));
  const double k_real = 2.0 * std::log(static_cast<double>(m) / eta);
  const auto k = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(k_real)));
  return {j, k};
}

namespace detail {

/// Rows of the position-reversed quadratic form: rev_rows[b] is row b of
/// M' where M'_{a,b} = M_{k-1-a, k-1-b}, so Q_M(coords(j)) can be evaluated
/// directly on the bit pattern of the position j.
inline void reversed_q_rows(const BitMatrix& m, std::uint64_t* rev_rows) {
  const int k = m.dim();
  for (int a = 0; a < k; ++a) {
    std::uint64_t row = 0;
    for (int b = 0; b < k; ++b)
      if (m.get(k - 1 - a, k - 1 - b)) row |= std::uint64_t{1} << b;
    rev_rows[a] = row;
  }
}

/// s_l^T x for a Kerdock index, by a Gray-code walk over positions: each of
/// the d positions is visited once and the quadratic form is updated through
/// the polarization identity Q(x + e_b) = Q(x) + x^T M e_b. O(d) = O(n).
inline double kerdock_inner_product(const double* x, std::int64_t n, std::int64_t d,
                                    const std::uint64_t* rev_rows, std::uint64_t wpos) {
  double acc = 0;
  std::uint64_t pos = 0;
  int sign = 0;  // Q(pos) + w . pos mod 2
  for (std::uint64_t t = 0;; ++t) {
    if (static_cast<std::int64_t>(pos) < n) acc += sign ? -x[pos] : x[pos];
    if (t + 1 == static_cast<std::uint64_t>(d)) break;
    const int b = std::countr_zero(t + 1);
    sign ^= std::popcount(rev_rows[b] & pos) & 1;
    sign ^= static_cast<int>((wpos >> b) & 1u);
    pos ^= std::uint64_t{1} << b;
  }
  return acc;
}

}  // namespace detail

/// s_l^T x in O(n) operations without materializing s_l. Identity indices are
/// sqrt(d) x_w (or 0 past the projection); Kerdock indices accumulate signs.
inline double inner_product_with_design(const Eigen::Ref<const Eigen::VectorXd>& x,
                                        const DesignIndex& idx, const DesignParams& params) {
  const std::int64_t n = x.size();
  if (n < 1 || n > params.d) throw std::invalid_argument("inner_product_with_design: bad vector length");
  if (idx.tag == DesignIndex::Tag::Identity) {
    const auto pos = static_cast<std::int64_t>(position_of_coords(idx.w));
    return pos < n ? std::sqrt(static_cast<double>(params.d)) * x[pos] : 0.0;
  }
  const BitMatrix m = kerdock_matrix(params, idx.s);
  std::uint64_t rev_rows[16];
  detail::reversed_q_rows(m, rev_rows);
  return detail::kerdock_inner_product(x.data(), n, params.d, rev_rows, position_of_coords(idx.w));
}

/// Entrywise median of K batch means laid out as the columns of an m x K
/// matrix. Even K takes the midpoint of the two central order statistics, so
/// K = 2 reduces to the empirical mean. Selection is nth_element (quickselect).
inline Eigen::VectorXd median_of_batch_means(const Eigen::Ref<const Eigen::MatrixXd>& means) {
  const Eigen::Index m = means.rows();
  const Eigen::Index k = means.cols();
  Eigen::VectorXd mu(m);
  std::vector<double> scratch(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index b = 0; b < k; ++b) scratch[static_cast<std::size_t>(b)] = means(i, b);
    const auto h = scratch.begin() + k / 2;
    std::nth_element(scratch.begin(), h, scratch.end());
    if (k % 2 == 1) {
      mu[i] = *h;
    } else {
      const double lower = *std::max_element(scratch.begin(), h);
      mu[i] = 0.5 * (lower + *h);
    }
  }
  return mu;
}

/// Median of means over K batches of size J; samples are m x N with batch b
/// occupying columns [b*J, (b+1)*J).
inline Estimate median_of_means(const Eigen::Ref<const Eigen::MatrixXd>& samples, std::int64_t J,
                                std::int64_t K) {
  if (J < 1 || K < 1 || samples.cols() != J * K)
    throw std::invalid_argument("median_of_means: samples must have J*K columns");
  Eigen::MatrixXd means(samples.rows(), K);
  for (std::int64_t b = 0; b < K; ++b)
    means.col(b) = samples.middleCols(b * J, J).rowwise().sum() / static_cast<double>(J);
  return {median_of_batch_means(means), J * K};
}

/// Entrywise eps-hard threshold; the boundary |t| = eps is kept.
inline Eigen::VectorXd hard_threshold(const Eigen::Ref<const Eigen::VectorXd>& v, double eps) {
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = std::abs(v[i]) >= eps ? v[i] : 0.0;
  return out;
}

/// Indices drawn for one transform, optionally with their sketch columns
/// gathered into a contiguous buffer (used to keep column fetches out of
/// benchmark timing regions). Results are identical either way.
struct DrawnSamples {
  std::vector<std::int64_t> indices;
  Eigen::MatrixXd gathered;  // m x N when use_gathered
  bool use_gathered = false;
};

inline DrawnSamples draw_samples(const Sketch& sk, const StreamParams& p) {
  p.validate();
  const std::int64_t n_samples = p.J * p.K;
  DrawnSamples out;
  out.indices.resize(static_cast<std::size_t>(n_samples));
  SeededRng rng(p.seed);
  for (auto& ell : out.indices)
    ell = static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(sk.L())));
  return out;
}

inline DrawnSamples draw_and_gather(const Sketch& sk, const StreamParams& p) {
  DrawnSamples out = draw_samples(sk, p);
  out.gathered.resize(sk.m(), static_cast<Eigen::Index>(out.indices.size()));
  for (std::size_t j = 0; j < out.indices.size(); ++j)
    out.gathered.col(static_cast<Eigen::Index>(j)) = sk.column(out.indices[j]);
  out.use_gathered = true;
  return out;
}

/// The streaming step on pre-drawn indices: accumulate y_j into per-batch
/// running sums (never the m x N sample array), estimate mu by entrywise
/// median of means, pick the widen*s largest |mu_i|, refine those entries by
/// exact dot products with the embedded rows of A, and hard-threshold.
inline TransformResult transform_with_samples(const Sketch& sk,
                                              const Eigen::Ref<const Eigen::VectorXd>& x,
                                              const StreamParams& p, const DrawnSamples& drawn) {
  p.validate();
  if (x.size() != sk.n()) throw std::invalid_argument("transform: vector length does not match sketch");
  if (static_cast<std::int64_t>(drawn.indices.size()) != p.J * p.K)
    throw std::invalid_argument("transform: drawn sample count does not match J*K");

  const std::int64_t m = sk.m();
  const DesignParams& design = sk.design();
  const std::int64_t kerdock_block = design.kerdock_bases() * design.d;
  const double sqrt_d = std::sqrt(static_cast<double>(design.d));

  Eigen::MatrixXd batch_means = Eigen::MatrixXd::Zero(m, p.K);
  std::uint64_t rev_rows[16];
  std::int64_t cached_s = -1;
  for (std::int64_t b = 0; b < p.K; ++b) {
    auto col_sum = batch_means.col(b);
    for (std::int64_t j = 0; j < p.J; ++j) {
      const std::int64_t ell = drawn.indices[static_cast<std::size_t>(b * p.J + j)];
      double t;
      if (ell >= kerdock_block) {
        const std::int64_t pos = ell - kerdock_block;
        t = pos < sk.n() ? sqrt_d * x[pos] : 0.0;
      } else {
        const std::int64_t s = ell / design.d;
        if (s != cached_s) {
          detail::reversed_q_rows(sk.kerdock_set().matrices[static_cast<std::size_t>(s)], rev_rows);
          cached_s = s;
        }
        t = detail::kerdock_inner_product(x.data(), sk.n(), design.d, rev_rows,
                                          static_cast<std::uint64_t>(ell % design.d));
      }
      if (t == 0.0) continue;
      if (drawn.use_gathered)
        col_sum += t * drawn.gathered.col(static_cast<Eigen::Index>(b * p.J + j));
      else
        col_sum += t * sk.column(ell);
    }
  }
  batch_means /= static_cast<double>(p.J);

  TransformResult result;
  result.estimate = {median_of_batch_means(batch_means), p.J * p.K};
  const Eigen::VectorXd& mu = result.estimate.mu;

  // Top widen*s magnitudes; ties break toward the smaller index. widen*s
  // beyond m (or overflowing) is silently capped at m.
  const std::int64_t want =
      (p.s > m / p.widen) ? m : std::min(p.widen * p.s, m);

  std::vector<std::int64_t> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), std::int64_t{0});
  const auto by_magnitude = [&mu](std::int64_t a, std::int64_t b) {
    const double ma = std::abs(mu[a]);
    const double mb = std::abs(mu[b]);
    return ma != mb ? ma > mb : a < b;
  };
  std::nth_element(order.begin(), order.begin() + want, order.end(), by_magnitude);
  result.candidate_set.assign(order.begin(), order.begin() + want);
  std::sort(result.candidate_set.begin(), result.candidate_set.end());

  const RowMatrix& a = sk.embedded_matrix();
  for (const std::int64_t i : result.candidate_set) {
    const double value = a.row(i).dot(x);
    if (std::abs(value) >= p.epsilon) {
      result.support.push_back(i);
      result.values.push_back(value);
    }
  }
  return result;
}

/// Streaming step of one vector: draw N = JK design indices with the seeded
/// generator, then run transform_with_samples.
inline TransformResult transform(const Sketch& sk, const Eigen::Ref<const Eigen::VectorXd>& x,
                                 const StreamParams& p) {
  return transform_with_samples(sk, x, p, draw_samples(sk, p));
}

}  // namespace fst
