#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace fst {

/// Packed vector over GF(2). Bit i of the backing word is coordinate i;
/// bits at or beyond length() are kept zero.
class BitVector {
 public:
  BitVector() = default;
  BitVector(int len, std::uint64_t word) : len_(check_len(len)), word_(word & mask(len)) {}

  static BitVector zero(int len) { return BitVector(len, 0); }
  static BitVector unit(int len, int i) {
    BitVector v(len, 0);
    v.set(i, true);
    return v;
  }

  int length() const { return len_; }
  std::uint64_t word() const { return word_; }

  bool get(int i) const {
    check_index(i);
    return (word_ >> i) & 1u;
  }
  void set(int i, bool v) {
    check_index(i);
    if (v)
      word_ |= std::uint64_t{1} << i;
    else
      word_ &= ~(std::uint64_t{1} << i);
  }

  BitVector operator^(const BitVector& o) const {
    if (o.len_ != len_) throw std::invalid_argument("BitVector: length mismatch");
    return BitVector(len_, word_ ^ o.word_);
  }
  bool operator==(const BitVector&) const = default;

  static std::uint64_t mask(int len) {
    return len == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << len) - 1;
  }

 private:
  static int check_len(int len) {
    if (len < 0 || len > 64) throw std::invalid_argument("BitVector: length out of [0,64]");
    return len;
  }
  void check_index(int i) const {
    if (i < 0 || i >= len_) throw std::out_of_range("BitVector: index out of range");
  }

  int len_ = 0;
  std::uint64_t word_ = 0;
};

/// Coordinate vector of a position index: coordinate c is bit (k-1-c) of p,
/// i.e. the big-endian bit pattern of p.
inline BitVector coords_of_position(std::uint64_t p, int k) {
  BitVector v(k, 0);
  for (int c = 0; c < k; ++c) v.set(c, (p >> (k - 1 - c)) & 1u);
  return v;
}

/// Inverse of coords_of_position.
inline std::uint64_t position_of_coords(const BitVector& w) {
  const int k = w.length();
  std::uint64_t p = 0;
  for (int c = 0; c < k; ++c)
    if (w.get(c)) p |= std::uint64_t{1} << (k - 1 - c);
  return p;
}

/// Square bit matrix over GF(2), one word per row (dim <= 64).
/// Bit j of row(i) is entry (i,j).
class BitMatrix {
 public:
  BitMatrix() = default;
  explicit BitMatrix(int dim) : dim_(check_dim(dim)), rows_(static_cast<std::size_t>(dim), 0) {}

  static BitMatrix zero(int dim) { return BitMatrix(dim); }
  static BitMatrix identity(int dim) {
    BitMatrix m(dim);
    for (int i = 0; i < dim; ++i) m.set(i, i, true);
    return m;
  }

  int dim() const { return dim_; }
  std::uint64_t row(int i) const {
    check_index(i);
    return rows_[static_cast<std::size_t>(i)];
  }
  void set_row(int i, std::uint64_t word) {
    check_index(i);
    rows_[static_cast<std::size_t>(i)] = word & BitVector::mask(dim_);
  }

  bool get(int i, int j) const {
    check_index(i);
    check_index(j);
    return (rows_[static_cast<std::size_t>(i)] >> j) & 1u;
  }
  void set(int i, int j, bool v) {
    check_index(i);
    check_index(j);
    if (v)
      rows_[static_cast<std::size_t>(i)] |= std::uint64_t{1} << j;
    else
      rows_[static_cast<std::size_t>(i)] &= ~(std::uint64_t{1} << j);
  }

  BitMatrix operator+(const BitMatrix& o) const {
    if (o.dim_ != dim_) throw std::invalid_argument("BitMatrix: dimension mismatch");
    BitMatrix r(dim_);
    for (int i = 0; i < dim_; ++i) r.rows_[i] = rows_[i] ^ o.rows_[i];
    return r;
  }

  BitMatrix transposed() const {
    BitMatrix r(dim_);
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) r.set(j, i, get(i, j));
    return r;
  }

  bool operator==(const BitMatrix&) const = default;

 private:
  static int check_dim(int dim) {
    if (dim < 0 || dim > 64) throw std::invalid_argument("BitMatrix: dimension out of [0,64]");
    return dim;
  }
  void check_index(int i) const {
    if (i < 0 || i >= dim_) throw std::out_of_range("BitMatrix: index out of range");
  }

  int dim_ = 0;
  std::vector<std::uint64_t> rows_;
};

/// Rank over GF(2) by bit-packed Gaussian elimination on a scratch copy.
inline int gf2_rank(const BitMatrix& m) {
  std::vector<std::uint64_t> rows;
  rows.reserve(static_cast<std::size_t>(m.dim()));
  for (int i = 0; i < m.dim(); ++i) rows.push_back(m.row(i));

  int rank = 0;
  for (int col = 0; col < m.dim(); ++col) {
    const std::uint64_t bit = std::uint64_t{1} << col;
    std::size_t pivot = rows.size();
    for (std::size_t r = static_cast<std::size_t>(rank); r < rows.size(); ++r) {
      if (rows[r] & bit) {
        pivot = r;
        break;
      }
    }
    if (pivot == rows.size()) continue;
    std::swap(rows[static_cast<std::size_t>(rank)], rows[pivot]);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (r != static_cast<std::size_t>(rank) && (rows[r] & bit))
        rows[r] ^= rows[static_cast<std::size_t>(rank)];
    }
    ++rank;
  }
  return rank;
}

namespace detail {

inline int poly_degree(std::uint64_t p) {
  return p == 0 ? -1 : 63 - std::countl_zero(p);
}

/// a mod g over GF(2)[x], g != 0.
inline std::uint64_t poly_mod(std::uint64_t a, std::uint64_t g) {
  const int dg = poly_degree(g);
  for (int da = poly_degree(a); da >= dg; da = poly_degree(a)) a ^= g << (da - dg);
  return a;
}

}  // namespace detail

/// True iff poly (bit i = coefficient of x^i) has no nontrivial factor over
/// GF(2). Exhaustive trial division by every polynomial of degree in
/// [1, degree/2]; this is the oracle guarding every shipped modulus constant.
inline bool verify_irreducible(std::uint64_t poly, int degree) {
  if (degree < 1) throw std::invalid_argument("verify_irreducible: degree must be >= 1");
  if (detail::poly_degree(poly) != degree)
    throw std::invalid_argument("verify_irreducible: leading coefficient not at stated degree");
  for (std::uint64_t g = 2; detail::poly_degree(g) <= degree / 2; ++g) {
    if (detail::poly_mod(poly, g) == 0) return false;
  }
  return true;
}

/// Irreducible modulus candidates for the odd extension degrees this artifact
/// uses (k even implies q = k-1 odd). Validated by verify_irreducible at
/// FieldCtx construction and again in the test suite.
inline std::uint64_t modulus_for_degree(int q) {
  switch (q) {
    case 1: return 0b11;                      // x + 1
    case 3: return 0b1011;                    // x^3 + x + 1
    case 5: return 0b100101;                  // x^5 + x^2 + 1
    case 7: return 0b10000011;                // x^7 + x + 1
    case 9: return 0b1000010001;              // x^9 + x^4 + 1
    case 11: return 0b100000000101;           // x^11 + x^2 + 1
    case 13: return 0b10000000011011;         // x^13 + x^4 + x^3 + x + 1
    case 15: return 0b1000000000000011;       // x^15 + x + 1
    default:
      throw std::invalid_argument("modulus_for_degree: no shipped modulus for this degree");
  }
}

/// Element of GF(2^q) in the polynomial basis {1, a, ..., a^(q-1)};
/// repr bit i is the coefficient of a^i.
struct FieldElement {
  std::uint64_t repr = 0;
  bool operator==(const FieldElement&) const = default;
};

/// Context for GF(2^q) arithmetic; the modulus is checked for irreducibility
/// at construction.
class FieldCtx {
 public:
  explicit FieldCtx(int q) : FieldCtx(q, modulus_for_degree(q)) {}
  FieldCtx(int q, std::uint64_t modulus) : q_(q), modulus_(modulus) {
    if (q < 1 || q > 62) throw std::invalid_argument("FieldCtx: degree out of [1,62]");
    if (!verify_irreducible(modulus, q)) throw std::invalid_argument("FieldCtx: modulus is reducible");
  }

  int degree() const { return q_; }
  std::uint64_t modulus() const { return modulus_; }
  std::uint64_t order() const { return std::uint64_t{1} << q_; }

  bool valid(FieldElement a) const { return a.repr < order(); }

 private:
  int q_;
  std::uint64_t modulus_;
};

inline FieldElement field_add(FieldElement a, FieldElement b) { return {a.repr ^ b.repr}; }

/// Polynomial product reduced modulo ctx.modulus (shift-and-reduce).
inline FieldElement field_mul(const FieldCtx& ctx, FieldElement a, FieldElement b) {
  const std::uint64_t top = std::uint64_t{1} << ctx.degree();
  std::uint64_t acc = 0;
  std::uint64_t aa = a.repr;
  for (std::uint64_t bb = b.repr; bb != 0; bb >>= 1) {
    if (bb & 1u) acc ^= aa;
    aa <<= 1;
    if (aa & top) aa ^= ctx.modulus();
  }
  return {acc};
}

/// Field trace tr(a) = a + a^2 + a^4 + ... + a^(2^(q-1)), a value in {0,1}.
inline int field_trace(const FieldCtx& ctx, FieldElement a) {
  FieldElement acc = a;
  FieldElement pw = a;
  for (int i = 1; i < ctx.degree(); ++i) {
    pw = field_mul(ctx, pw, pw);
    acc = field_add(acc, pw);
  }
  // The trace lands in the prime subfield {0,1}.
  if (acc.repr > 1) throw std::logic_error("field_trace: trace left the prime subfield");
  return static_cast<int>(acc.repr);
}

}  // namespace fst
