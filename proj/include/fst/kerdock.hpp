#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "fst/gf2.hpp"

namespace fst {

/// Parameters of the projected design: d = 2^k points per basis, d/2 Kerdock
/// bases plus the identity basis, L = d(d/2+1) vectors total. k must be even
/// (the Kerdock construction lives over GF(2^(k-1)) x GF(2)).
struct DesignParams {
  int k;
  std::int64_t d;
  std::int64_t L;
  FieldCtx ctx;

  static DesignParams make(int k) {
    if (k < 2 || k % 2 != 0) throw std::invalid_argument("DesignParams: k must be a positive even integer");
    if (k > 16) throw std::invalid_argument("DesignParams: k > 16 is not supported");
    const std::int64_t d = std::int64_t{1} << k;
    return DesignParams{k, d, d * (d / 2 + 1), FieldCtx(k - 1)};
  }

  std::int64_t kerdock_bases() const { return d / 2; }  // = 2^(k-1)
};

/// The quadratic form Q_M(x) = sum_{i<j} M_ij x_i x_j over GF(2),
/// for skew-symmetric M (zero diagonal, symmetric off-diagonal).
inline int quadratic_form(const BitMatrix& m, const BitVector& x) {
  if (m.dim() != x.length()) throw std::invalid_argument("quadratic_form: dimension mismatch");
  const std::uint64_t xw = x.word();
  int acc = 0;
  for (std::uint64_t rest = xw; rest != 0; rest &= rest - 1) {
    const int i = std::countr_zero(rest);
    if (i + 1 >= 64) break;
    const std::uint64_t above = ~std::uint64_t{0} << (i + 1);
    acc ^= std::popcount(m.row(i) & xw & above) & 1;
  }
  return acc;
}

/// The matrix M_s of the standard Kerdock set: (M_s)_{b,b'} = b . L_s(b') in
/// the basis {(a^0,0), ..., (a^(q-1),0), (0,1)} of GF(2^q) x GF(2), where
/// L_s(x,alpha) = (s^2 x + s tr(sx) + alpha s, tr(sx)) and
/// (x,alpha).(y,beta) = tr(xy) + alpha beta.
inline BitMatrix kerdock_matrix(const DesignParams& params, std::uint64_t s_repr) {
  const FieldCtx& ctx = params.ctx;
  const int q = ctx.degree();
  const int k = params.k;
  if (s_repr >= ctx.order()) throw std::invalid_argument("kerdock_matrix: field index out of range");

  const FieldElement s{s_repr};
  const FieldElement s2 = field_mul(ctx, s, s);

  BitMatrix m(k);
  // Images (f_c, t_c) = L_s(basis element c).
  std::vector<FieldElement> f(static_cast<std::size_t>(k));
  std::vector<int> t(static_cast<std::size_t>(k));
  for (int c = 0; c < q; ++c) {
    const FieldElement ac{std::uint64_t{1} << c};
    t[c] = field_trace(ctx, field_mul(ctx, s, ac));
    f[c] = field_add(field_mul(ctx, s2, ac), t[c] ? s : FieldElement{0});
  }
  f[q] = s;
  t[q] = 0;

  for (int c = 0; c < k; ++c) {
    for (int r = 0; r < q; ++r) {
      const FieldElement ar{std::uint64_t{1} << r};
      m.set(r, c, field_trace(ctx, field_mul(ctx, ar, f[c])) != 0);
    }
    m.set(q, c, t[c] != 0);
  }
  return m;
}

/// All 2^(k-1) matrices of the Kerdock set, indexed by field element repr.
struct KerdockSet {
  std::vector<BitMatrix> matrices;
};

inline KerdockSet build_kerdock_set(const DesignParams& params) {
  KerdockSet set;
  set.matrices.reserve(static_cast<std::size_t>(params.kerdock_bases()));
  for (std::uint64_t s = 0; s < static_cast<std::uint64_t>(params.kerdock_bases()); ++s)
    set.matrices.push_back(kerdock_matrix(params, s));
  return set;
}

/// Index of one design vector: either u_{M_s, w} from a Kerdock basis or the
/// standard basis vector e_w. Linearized with the Kerdock blocks first
/// (by s ascending, then w ascending as integers), identity block last.
struct DesignIndex {
  enum class Tag { Kerdock, Identity };
  Tag tag;
  std::uint64_t s = 0;  // field element repr; meaningful for Kerdock only
  BitVector w;

  static DesignIndex kerdock(std::uint64_t s, BitVector w) { return {Tag::Kerdock, s, w}; }
  static DesignIndex identity(BitVector w) { return {Tag::Identity, 0, w}; }

  std::int64_t linearize(const DesignParams& params) const {
    const auto wpos = static_cast<std::int64_t>(position_of_coords(w));
    if (tag == Tag::Kerdock) {
      if (static_cast<std::int64_t>(s) >= params.kerdock_bases())
        throw std::out_of_range("DesignIndex: field index out of range");
      return static_cast<std::int64_t>(s) * params.d + wpos;
    }
    return params.kerdock_bases() * params.d + wpos;
  }

  static DesignIndex from_linear(const DesignParams& params, std::int64_t ell) {
    if (ell < 0 || ell >= params.L) throw std::out_of_range("DesignIndex: linear index out of range");
    const std::int64_t kerdock_block = params.kerdock_bases() * params.d;
    if (ell < kerdock_block) {
      return kerdock(static_cast<std::uint64_t>(ell / params.d),
                     coords_of_position(static_cast<std::uint64_t>(ell % params.d), params.k));
    }
    return identity(coords_of_position(static_cast<std::uint64_t>(ell - kerdock_block), params.k));
  }
};

/// Entry x of u_{M,w} is 2^(-k/2) (-1)^(Q_M(x) + w^T x); entries are indexed
/// by position j, whose big-endian bit pattern gives the coordinates of x.
inline Eigen::VectorXd design_vector(const DesignParams& params, const DesignIndex& idx) {
  const std::int64_t d = params.d;
  Eigen::VectorXd u(d);
  if (idx.tag == DesignIndex::Tag::Identity) {
    u.setZero();
    u[static_cast<Eigen::Index>(position_of_coords(idx.w))] = 1.0;
    return u;
  }
  const BitMatrix m = kerdock_matrix(params, idx.s);
  const std::uint64_t wpos = position_of_coords(idx.w);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::int64_t j = 0; j < d; ++j) {
    const BitVector x = coords_of_position(static_cast<std::uint64_t>(j), params.k);
    const int sign = quadratic_form(m, x) ^
                     (std::popcount(wpos & static_cast<std::uint64_t>(j)) & 1);
    u[j] = sign ? -scale : scale;
  }
  return u;
}

/// s_ell = sqrt(d) * (first n coordinates of u_ell). Kerdock entries are
/// exactly +-1; identity entries are sqrt(d) e_w or zero once projected away.
inline Eigen::VectorXd projected_design_column(const DesignParams& params, std::int64_t n,
                                               const DesignIndex& idx) {
  if (n < 1 || n > params.d) throw std::invalid_argument("projected_design_column: n out of [1,d]");
  const double sqrt_d = std::sqrt(static_cast<double>(params.d));
  if (idx.tag == DesignIndex::Tag::Identity) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    const auto pos = static_cast<std::int64_t>(position_of_coords(idx.w));
    if (pos < n) v[pos] = sqrt_d;
    return v;
  }
  return sqrt_d * design_vector(params, idx).head(n);
}

namespace detail {

/// All L design vectors as columns of a d x L matrix, Kerdock matrices built
/// once per basis. Ordering matches DesignIndex::linearize.
inline Eigen::MatrixXd materialize_design(const DesignParams& params) {
  const std::int64_t d = params.d;
  Eigen::MatrixXd u(d, params.L);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::int64_t s = 0; s < params.kerdock_bases(); ++s) {
    const BitMatrix m = kerdock_matrix(params, static_cast<std::uint64_t>(s));
    Eigen::VectorXd sign(d);
    for (std::int64_t j = 0; j < d; ++j) {
      const BitVector x = coords_of_position(static_cast<std::uint64_t>(j), params.k);
      sign[j] = quadratic_form(m, x) ? -scale : scale;
    }
    for (std::int64_t w = 0; w < d; ++w) {
      Eigen::VectorXd col(d);
      for (std::int64_t j = 0; j < d; ++j) {
        const int flip = std::popcount(static_cast<std::uint64_t>(w & j)) & 1;
        col[j] = flip ? -sign[j] : sign[j];
      }
      u.col(s * d + w) = col;
    }
  }
  u.rightCols(d) = Eigen::MatrixXd::Identity(d, d);
  return u;
}

}  // namespace detail

/// Worst deviations seen while checking the mutually-unbiased-bases structure.
struct MubReport {
  double max_within_gram_dev = 0;   // |B^T B - I| over every basis
  double min_cross_sq = 0;          // extremes of squared cross-basis inner products
  double max_cross_sq = 0;
  double max_cross_dev = 0;         // worst |<x,y>^2 - 1/d|
  bool exhaustive = true;           // false when basis pairs were sampled (k > 6)

  bool pass(double tol) const { return max_within_gram_dev <= tol && max_cross_dev <= tol; }
};

/// Checks orthonormality within each basis and |<x,y>|^2 = 1/d across bases.
/// Exhaustive over all basis pairs for k <= 6; above that (up to the cap) a
/// fixed-seed sample of basis pairs is checked instead.
inline MubReport verify_mub(const DesignParams& params, int cap = 8) {
  if (params.k > cap) throw std::invalid_argument("verify_mub: k exceeds the verification cap");
  const std::int64_t d = params.d;
  const std::int64_t nb = params.kerdock_bases() + 1;
  const Eigen::MatrixXd u = detail::materialize_design(params);

  MubReport rep;
  rep.min_cross_sq = std::numeric_limits<double>::infinity();
  rep.max_cross_sq = -std::numeric_limits<double>::infinity();

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  for (std::int64_t b = 0; b < nb; ++b) {
    const auto block = u.middleCols(b * d, d);
    const double dev = (block.transpose() * block - eye).cwiseAbs().maxCoeff();
    rep.max_within_gram_dev = std::max(rep.max_within_gram_dev, dev);
  }

  auto check_cross = [&](std::int64_t b, std::int64_t b2) {
    const Eigen::MatrixXd cross =
        u.middleCols(b * d, d).transpose() * u.middleCols(b2 * d, d);
    const Eigen::ArrayXXd sq = cross.array().square();
    rep.min_cross_sq = std::min(rep.min_cross_sq, sq.minCoeff());
    rep.max_cross_sq = std::max(rep.max_cross_sq, sq.maxCoeff());
    rep.max_cross_dev = std::max(rep.max_cross_dev, (sq - 1.0 / static_cast<double>(d)).abs().maxCoeff());
  };

  if (params.k <= 6) {
    for (std::int64_t b = 0; b < nb; ++b)
      for (std::int64_t b2 = b + 1; b2 < nb; ++b2) check_cross(b, b2);
  } else {
    rep.exhaustive = false;
    std::mt19937_64 rng(0x6d7562u);  // fixed seed: deterministic report
    for (int i = 0; i < 256; ++i) {
      const auto b = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(nb));
      auto b2 = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(nb - 1));
      if (b2 >= b) ++b2;
      check_cross(b, b2);
    }
  }
  if (!std::isfinite(rep.min_cross_sq)) rep.min_cross_sq = rep.max_cross_sq = 0;
  return rep;
}

/// First two design moments of an arbitrary set of unit columns:
/// m_k = (1/L^2) sum_{l,l'} <u_l, u_l'>^(2k). A projective 2-design has
/// m1 = c_{d,1} and m2 = c_{d,2}.
struct MomentReport {
  double m1 = 0;
  double m2 = 0;
  bool exact = true;  // false when pairs were sampled (k > 6)
};

inline double design_moment_target(std::int64_t d, int k) {
  // c_{d,k} = 1*3*...*(2k-1) / (d (d+2) ... (d+2(k-1)))
  double num = 1, den = 1;
  for (int i = 0; i < k; ++i) {
    num *= static_cast<double>(2 * i + 1);
    den *= static_cast<double>(d + 2 * i);
  }
  return num / den;
}

inline MomentReport design_moments_of(const Eigen::MatrixXd& u) {
  const auto L = u.cols();
  MomentReport rep;
  // Row blocks keep the L x L Gram from being materialized at once.
  const Eigen::Index block = 1024;
  double sum2 = 0, sum4 = 0;
  for (Eigen::Index start = 0; start < L; start += block) {
    const Eigen::Index count = std::min(block, L - start);
    const Eigen::MatrixXd gram = u.middleCols(start, count).transpose() * u;
    const Eigen::ArrayXXd sq = gram.array().square();
    sum2 += sq.sum();
    sum4 += sq.square().sum();
  }
  const double pairs = static_cast<double>(L) * static_cast<double>(L);
  rep.m1 = sum2 / pairs;
  rep.m2 = sum4 / pairs;
  return rep;
}

/// Exact for k <= 6 (full double sum over the design); for k = 8 a fixed-seed
/// Monte Carlo estimate over sampled ordered pairs is reported instead.
inline MomentReport verify_design_moments(const DesignParams& params, int cap = 8) {
  if (params.k > cap) throw std::invalid_argument("verify_design_moments: k exceeds the verification cap");
  const Eigen::MatrixXd u = detail::materialize_design(params);
  if (params.k <= 6) return design_moments_of(u);

  MomentReport rep;
  rep.exact = false;
  std::mt19937_64 rng(0x6d6f6du);
  const int samples = 4'000'000;
  double sum2 = 0, sum4 = 0;
  for (int i = 0; i < samples; ++i) {
    const auto a = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(params.L));
    const auto b = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(params.L));
    const double ip = u.col(a).dot(u.col(b));
    const double sq = ip * ip;
    sum2 += sq;
    sum4 += sq * sq;
  }
  rep.m1 = sum2 / samples;
  rep.m2 = sum4 / samples;
  return rep;
}

}  // namespace fst
