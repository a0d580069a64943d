#pragma once

#include <Eigen/Core>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

namespace fst {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MagicMismatchError : IoError {
  using IoError::IoError;
};
struct VersionUnsupportedError : IoError {
  using IoError::IoError;
};
struct TruncatedPayloadError : IoError {
  using IoError::IoError;
};
struct MalformedHeaderError : IoError {
  using IoError::IoError;
};

namespace detail {

constexpr bool kLittleEndianHost = std::endian::native == std::endian::little;

inline void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void put_f64_block(std::ostream& out, const double* data, std::uint64_t count) {
  if constexpr (kLittleEndianHost) {
    // Chunked so a multi-GB payload does not require one giant write.
    const std::uint64_t chunk = std::uint64_t{1} << 24;
    for (std::uint64_t off = 0; off < count; off += chunk) {
      const std::uint64_t len = std::min(chunk, count - off);
      out.write(reinterpret_cast<const char*>(data + off), static_cast<std::streamsize>(len * 8));
    }
  } else {
    for (std::uint64_t i = 0; i < count; ++i)
      put_u64(out, std::bit_cast<std::uint64_t>(data[i]));
  }
}

inline void get_f64_block(std::istream& in, double* data, std::uint64_t count) {
  if constexpr (kLittleEndianHost) {
    const std::uint64_t chunk = std::uint64_t{1} << 24;
    for (std::uint64_t off = 0; off < count; off += chunk) {
      const std::uint64_t len = std::min(chunk, count - off);
      in.read(reinterpret_cast<char*>(data + off), static_cast<std::streamsize>(len * 8));
    }
  } else {
    for (std::uint64_t i = 0; i < count; ++i)
      data[i] = std::bit_cast<double>(get_u64(in));
  }
}

}  // namespace detail

/// Read-only file mapping. Movable, unmaps on destruction.
class MmapFile {
 public:
  MmapFile() = default;
  explicit MmapFile(const std::filesystem::path& path) {
    const int fd = ::open(path.c_str(), O_RDONLY);
    if (fd < 0) throw IoError("cannot open " + path.string());
    struct stat st{};
    if (::fstat(fd, &st) != 0) {
      ::close(fd);
      throw IoError("cannot stat " + path.string());
    }
    len_ = static_cast<std::size_t>(st.st_size);
    void* p = ::mmap(nullptr, len_, PROT_READ, MAP_PRIVATE, fd, 0);
    ::close(fd);
    if (p == MAP_FAILED) throw IoError("mmap failed for " + path.string());
    base_ = static_cast<const unsigned char*>(p);
  }
  ~MmapFile() { reset(); }

  MmapFile(MmapFile&& o) noexcept : base_(o.base_), len_(o.len_) {
    o.base_ = nullptr;
    o.len_ = 0;
  }
  MmapFile& operator=(MmapFile&& o) noexcept {
    if (this != &o) {
      reset();
      base_ = o.base_;
      len_ = o.len_;
      o.base_ = nullptr;
      o.len_ = 0;
    }
    return *this;
  }
  MmapFile(const MmapFile&) = delete;
  MmapFile& operator=(const MmapFile&) = delete;

  const unsigned char* data() const { return base_; }
  std::size_t size() const { return len_; }
  bool valid() const { return base_ != nullptr; }

 private:
  void reset() {
    if (base_) ::munmap(const_cast<unsigned char*>(base_), len_);
    base_ = nullptr;
    len_ = 0;
  }
  const unsigned char* base_ = nullptr;
  std::size_t len_ = 0;
};

inline constexpr char kMatrixMagic[4] = {'F', 'S', 'T', 'M'};
inline constexpr std::uint32_t kFormatVersion = 1;

/// FSTM: magic, u32 version, u64 m, u64 n, m*n float64 row-major,
/// little-endian throughout. Vectors are stored as 1 x n matrices.
inline void write_matrix(const std::filesystem::path& path, const Eigen::Ref<const RowMatrix>& a) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(kMatrixMagic, 4);
  detail::put_u32(out, kFormatVersion);
  detail::put_u64(out, static_cast<std::uint64_t>(a.rows()));
  detail::put_u64(out, static_cast<std::uint64_t>(a.cols()));
  // Ref<RowMatrix> keeps rows contiguous; the outer stride may exceed cols.
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    detail::put_f64_block(out, a.row(i).data(), static_cast<std::uint64_t>(a.cols()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline RowMatrix read_matrix(const std::filesystem::path& path) {
  std::error_code ec;
  const auto fsize = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot open for reading: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  if (fsize < 24) throw TruncatedPayloadError("matrix file shorter than its header: " + path.string());

  char magic[4];
  in.read(magic, 4);
  if (std::memcmp(magic, kMatrixMagic, 4) != 0)
    throw MagicMismatchError("not an FSTM matrix file: " + path.string());
  const std::uint32_t version = detail::get_u32(in);
  if (version != kFormatVersion)
    throw VersionUnsupportedError("unsupported FSTM version " + std::to_string(version));
  const std::uint64_t m = detail::get_u64(in);
  const std::uint64_t n = detail::get_u64(in);
  if (m == 0 || n == 0 || m > (std::uint64_t{1} << 32) || n > (std::uint64_t{1} << 32))
    throw MalformedHeaderError("implausible FSTM dimensions");
  const std::uint64_t expected = 24 + 8 * m * n;
  if (fsize < expected) throw TruncatedPayloadError("FSTM payload truncated: " + path.string());
  if (fsize > expected) throw MalformedHeaderError("FSTM file larger than its header declares");

  RowMatrix a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  detail::get_f64_block(in, a.data(), m * n);
  if (!in) throw TruncatedPayloadError("FSTM payload truncated: " + path.string());
  return a;
}

}  // namespace fst
