#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace fst {

namespace detail {
inline bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }
}  // namespace detail

/// In-place Walsh-Hadamard transform in natural (Hadamard) order:
/// out[q] = sum_x (-1)^popcount(q & x) * in[x]. Length must be a power of two.
template <typename Scalar>
void fwht_unnormalized(Scalar* data, std::size_t len) {
  if (!detail::is_power_of_two(len)) throw std::invalid_argument("fwht: length is not a power of two");
  for (std::size_t h = 1; h < len; h <<= 1) {
    for (std::size_t i = 0; i < len; i += h << 1) {
      for (std::size_t j = i; j < i + h; ++j) {
        const Scalar x = data[j];
        const Scalar y = data[j + h];
        data[j] = x + y;
        data[j + h] = x - y;
      }
    }
  }
}

/// Multiplication by the orthogonal matrix H^(tensor k): the unnormalized
/// transform scaled by 2^(-k/2). An involution.
template <typename Scalar>
void fwht_normalized(Scalar* data, std::size_t len) {
  fwht_unnormalized(data, len);
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(len));
  for (std::size_t i = 0; i < len; ++i) data[i] *= scale;
}

inline void fwht_unnormalized(Eigen::Ref<Eigen::VectorXd> buf) {
  fwht_unnormalized(buf.data(), static_cast<std::size_t>(buf.size()));
}

inline void fwht_normalized(Eigen::Ref<Eigen::VectorXd> buf) {
  fwht_normalized(buf.data(), static_cast<std::size_t>(buf.size()));
}

}  // namespace fst
