#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "fst/fwht.hpp"
#include "fst/gf2.hpp"
#include "fst/io.hpp"
#include "fst/kerdock.hpp"

namespace fst {

namespace detail {

inline int thread_count() {
  if (const char* env = std::getenv("FST_THREADS")) {
    const int t = std::atoi(env);
    if (t >= 1) return t;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Runs fn(first, last) over a partition of [0, count) on worker threads.
/// Output must go to disjoint locations so the schedule cannot be observed.
template <typename Fn>
void parallel_ranges(std::int64_t count, Fn&& fn) {
  const int threads = std::min<std::int64_t>(thread_count(), count);
  if (threads <= 1) {
    fn(std::int64_t{0}, count);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  const std::int64_t per = (count + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const std::int64_t first = t * per;
    const std::int64_t last = std::min(count, first + per);
    if (first >= last) break;
    pool.emplace_back([&fn, first, last] { fn(first, last); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Smallest even k with 2^k >= n; the Kerdock construction needs k even.
inline int even_log2_ceil(std::int64_t n) {
  if (n < 1) throw std::invalid_argument("even_log2_ceil: n must be positive");
  int k = 2;
  while ((std::int64_t{1} << k) < n) k += 2;
  return k;
}

inline constexpr char kSketchMagic[4] = {'F', 'S', 'T', 'K'};

/// The precomputed column set {A s_l}, column-major m x L, ordered by the
/// DesignIndex linearization. Owns its storage or views a file mapping;
/// either way it is immutable after construction and safe to share.
class Sketch {
 public:
  Sketch(DesignParams design, std::int64_t m, std::int64_t n, RowMatrix embedded,
         std::vector<double> columns)
      : design_(std::move(design)),
        m_(m),
        n_(n),
        embedded_a_(std::move(embedded)),
        owned_(std::move(columns)),
        cols_(owned_.data()) {
    init_row_norm();
  }

  Sketch(DesignParams design, std::int64_t m, std::int64_t n, RowMatrix embedded,
         MmapFile mapping, const double* cols)
      : design_(std::move(design)),
        m_(m),
        n_(n),
        embedded_a_(std::move(embedded)),
        mapping_(std::move(mapping)),
        cols_(cols) {
    init_row_norm();
  }

  Sketch(Sketch&&) = default;
  Sketch& operator=(Sketch&&) = default;

  const DesignParams& design() const { return design_; }
  std::int64_t m() const { return m_; }
  std::int64_t n() const { return n_; }
  int k() const { return design_.k; }
  std::int64_t d() const { return design_.d; }
  std::int64_t L() const { return design_.L; }

  /// Largest row 2-norm of the embedded matrix, i.e. |A|_{2->inf}.
  double row_norm_max() const { return row_norm_max_; }

  bool has_embedded_matrix() const { return embedded_a_.size() > 0; }
  const RowMatrix& embedded_matrix() const {
    if (!has_embedded_matrix()) throw std::logic_error("Sketch: no embedded matrix");
    return embedded_a_;
  }

  /// Zero-copy view of column l = A s_l.
  Eigen::Map<const Eigen::VectorXd> column(std::int64_t ell) const {
    if (ell < 0 || ell >= L()) throw std::out_of_range("Sketch::column: index out of range");
    return {cols_ + ell * m_, m_};
  }

  const double* column_data() const { return cols_; }

  /// The d/2 quadratic-form matrices, rebuilt at construction so streaming
  /// never pays for them.
  const KerdockSet& kerdock_set() const { return kerdock_; }

 private:
  void init_row_norm() {
    row_norm_max_ = 0;
    for (Eigen::Index i = 0; i < embedded_a_.rows(); ++i)
      row_norm_max_ = std::max(row_norm_max_, embedded_a_.row(i).norm());
    kerdock_ = build_kerdock_set(design_);
  }

  DesignParams design_;
  KerdockSet kerdock_;
  std::int64_t m_ = 0;
  std::int64_t n_ = 0;
  double row_norm_max_ = 0;
  RowMatrix embedded_a_;
  std::vector<double> owned_;
  MmapFile mapping_;
  const double* cols_ = nullptr;
};

/// Preprocessing step: computes {A s_l} for the full design. Per Kerdock
/// matrix M, each padded row of A is sign-masked by (-1)^{Q_M(x)} and pushed
/// through one unnormalized FWHT; sqrt(d) * 2^(-k/2) = 1 makes that transform
/// output exactly the d sketch columns for M. The identity block is sqrt(d)
/// times the first n columns of A.
inline Sketch preprocess(const Eigen::Ref<const RowMatrix>& a) {
  const std::int64_t m = a.rows();
  const std::int64_t n = a.cols();
  if (m < 1 || n < 1) throw std::invalid_argument("preprocess: matrix must be nonempty");
  if (!a.allFinite()) throw std::invalid_argument("preprocess: matrix entries must be finite");

  const DesignParams design = DesignParams::make(even_log2_ceil(n));
  const std::int64_t d = design.d;
  const std::int64_t L = design.L;

  std::vector<double> columns;
  try {
    columns.resize(static_cast<std::size_t>(m) * static_cast<std::size_t>(L));
  } catch (const std::bad_alloc&) {
    throw std::runtime_error("preprocess: cannot allocate sketch of " +
                             std::to_string(static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(L) * 8) +
                             " bytes");
  }
  double* cols = columns.data();

  const std::int64_t n_kerdock = design.kerdock_bases();
  detail::parallel_ranges(n_kerdock, [&](std::int64_t s_first, std::int64_t s_last) {
    constexpr std::int64_t kRowTile = 32;
    std::vector<double> sign(static_cast<std::size_t>(d));
    std::vector<double> tile(static_cast<std::size_t>(kRowTile * d));
    for (std::int64_t s = s_first; s < s_last; ++s) {
      const BitMatrix mat = kerdock_matrix(design, static_cast<std::uint64_t>(s));
      for (std::int64_t j = 0; j < d; ++j) {
        const BitVector x = coords_of_position(static_cast<std::uint64_t>(j), design.k);
        sign[static_cast<std::size_t>(j)] = quadratic_form(mat, x) ? -1.0 : 1.0;
      }
      for (std::int64_t i0 = 0; i0 < m; i0 += kRowTile) {
        const std::int64_t rows = std::min(kRowTile, m - i0);
        for (std::int64_t r = 0; r < rows; ++r) {
          double* buf = tile.data() + r * d;
          const double* arow = a.row(i0 + r).data();
          for (std::int64_t j = 0; j < n; ++j) buf[j] = sign[static_cast<std::size_t>(j)] * arow[j];
          std::fill(buf + n, buf + d, 0.0);
          fwht_unnormalized(buf, static_cast<std::size_t>(d));
        }
        // Transposed write-back: tile row r, transform position w lands in
        // column s*d + w at row i0+r.
        for (std::int64_t w = 0; w < d; ++w) {
          double* dst = cols + (s * d + w) * m + i0;
          const double* src = tile.data() + w;
          for (std::int64_t r = 0; r < rows; ++r) dst[r] = src[r * d];
        }
      }
    }
  });

  const double sqrt_d = std::sqrt(static_cast<double>(d));
  for (std::int64_t w = 0; w < d; ++w) {
    double* dst = cols + (n_kerdock * d + w) * m;
    if (w < n) {
      for (std::int64_t i = 0; i < m; ++i) dst[i] = sqrt_d * a(i, w);
    } else {
      std::fill(dst, dst + m, 0.0);
    }
  }

  return Sketch(design, m, n, RowMatrix(a), std::move(columns));
}

/// FSTK layout (little-endian): magic, u32 version, u64 m n k d L,
/// u8 hasEmbeddedA, L columns of m float64, then m*n float64 row-major A.
inline void save(const Sketch& sk, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(kSketchMagic, 4);
  detail::put_u32(out, kFormatVersion);
  detail::put_u64(out, static_cast<std::uint64_t>(sk.m()));
  detail::put_u64(out, static_cast<std::uint64_t>(sk.n()));
  detail::put_u64(out, static_cast<std::uint64_t>(sk.k()));
  detail::put_u64(out, static_cast<std::uint64_t>(sk.d()));
  detail::put_u64(out, static_cast<std::uint64_t>(sk.L()));
  out.put(sk.has_embedded_matrix() ? '\1' : '\0');
  detail::put_f64_block(out, sk.column_data(),
                        static_cast<std::uint64_t>(sk.m()) * static_cast<std::uint64_t>(sk.L()));
  if (sk.has_embedded_matrix())
    detail::put_f64_block(out, sk.embedded_matrix().data(),
                          static_cast<std::uint64_t>(sk.m()) * static_cast<std::uint64_t>(sk.n()));
  if (!out) throw IoError("write failed: " + path.string());
}

enum class LoadMode { Auto, Memory, Mapped };

namespace detail {
constexpr std::uint64_t kHeaderBytes = 49;
constexpr std::uint64_t kMapThreshold = std::uint64_t{1} << 30;
}  // namespace detail

inline Sketch load(const std::filesystem::path& path, LoadMode mode = LoadMode::Auto) {
  std::error_code ec;
  const std::uint64_t fsize = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot open for reading: " + path.string());
  if (fsize < detail::kHeaderBytes)
    throw TruncatedPayloadError("sketch file shorter than its header: " + path.string());

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());

  char magic[4];
  in.read(magic, 4);
  if (std::memcmp(magic, kSketchMagic, 4) != 0)
    throw MagicMismatchError("not an FSTK sketch file: " + path.string());
  const std::uint32_t version = detail::get_u32(in);
  if (version != kFormatVersion)
    throw VersionUnsupportedError("unsupported FSTK version " + std::to_string(version));

  const std::uint64_t m = detail::get_u64(in);
  const std::uint64_t n = detail::get_u64(in);
  const std::uint64_t k = detail::get_u64(in);
  const std::uint64_t d = detail::get_u64(in);
  const std::uint64_t L = detail::get_u64(in);
  const int flag = in.get();

  if (m == 0 || n == 0 || k < 2 || k > 16 || k % 2 != 0 || d != (std::uint64_t{1} << k) ||
      L != d * (d / 2 + 1) || n > d || (flag != 0 && flag != 1))
    throw MalformedHeaderError("inconsistent FSTK header fields: " + path.string());

  const std::uint64_t col_bytes = 8 * m * L;
  const std::uint64_t expected = detail::kHeaderBytes + col_bytes + (flag ? 8 * m * n : 0);
  if (fsize < expected) throw TruncatedPayloadError("FSTK payload truncated: " + path.string());
  if (fsize > expected) throw MalformedHeaderError("FSTK file larger than its header declares");

  DesignParams design = DesignParams::make(static_cast<int>(k));

  const bool map = detail::kLittleEndianHost && mode != LoadMode::Memory &&
                   (mode == LoadMode::Mapped || col_bytes > detail::kMapThreshold);

  RowMatrix embedded;
  if (map) {
    MmapFile mapping(path);
    const auto* base = mapping.data();
    const auto* cols = reinterpret_cast<const double*>(base + detail::kHeaderBytes);
    if (flag) {
      embedded.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
      std::memcpy(embedded.data(), base + detail::kHeaderBytes + col_bytes, 8 * m * n);
    }
    return Sketch(std::move(design), static_cast<std::int64_t>(m), static_cast<std::int64_t>(n),
                  std::move(embedded), std::move(mapping), cols);
  }

  std::vector<double> columns(m * L);
  detail::get_f64_block(in, columns.data(), m * L);
  if (flag) {
    embedded.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    detail::get_f64_block(in, embedded.data(), m * n);
  }
  if (!in) throw TruncatedPayloadError("FSTK payload truncated: " + path.string());
  return Sketch(std::move(design), static_cast<std::int64_t>(m), static_cast<std::int64_t>(n),
                std::move(embedded), std::move(columns));
}

}  // namespace fst
