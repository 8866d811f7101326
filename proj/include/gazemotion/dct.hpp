#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "gazemotion/ops.hpp"

namespace gazemotion {

/// Orthonormal DCT-II along time and its inverse (the transpose).
///
/// `forward[i][k] = c_k * sqrt(2/T) * cos(pi * (2i + 1) * k / (2T))` with
/// c_0 = 1/sqrt(2) and c_k = 1 otherwise, so coefficients = signal * forward.
template <typename S>
struct DctMatrix {
  std::size_t size = 0;
  Tensor<S> forward;
  Tensor<S> inverse;
};

/// Entries computed in double precision, independent of S.
inline std::vector<double> dct_entries(std::size_t T) {
  std::vector<double> m(T * T);
  const double scale = std::sqrt(2.0 / static_cast<double>(T));
  for (std::size_t i = 0; i < T; ++i) {
    for (std::size_t k = 0; k < T; ++k) {
      const double ck = k == 0 ? 1.0 / std::numbers::sqrt2 : 1.0;
      m[i * T + k] = ck * scale *
                     std::cos(std::numbers::pi * static_cast<double>(2 * i + 1) * static_cast<double>(k) /
                              (2.0 * static_cast<double>(T)));
    }
  }
  return m;
}

template <typename S>
DctMatrix<S> build_dct(std::size_t T) {
  if (T == 0) throw ArgumentError("build_dct: size must be positive");
  const auto m = dct_entries(T);
  std::vector<S> fwd(T * T), inv(T * T);
  for (std::size_t i = 0; i < T; ++i)
    for (std::size_t k = 0; k < T; ++k) {
      fwd[i * T + k] = static_cast<S>(m[i * T + k]);
      inv[k * T + i] = static_cast<S>(m[i * T + k]);
    }
  return {T, Tensor<S>({T, T}, std::move(fwd)), Tensor<S>({T, T}, std::move(inv))};
}

template <typename S>
Tensor<S> dct_forward(const Tensor<S>& x, const DctMatrix<S>& m) {
  if (x.rank() == 0 || x.dim(x.rank() - 1) != m.size) {
    throw DimensionError("dct_forward: trailing dimension of " + shape_str(x.shape()) + " must be " +
                         std::to_string(m.size));
  }
  return matmul_axis(x, m.forward, x.rank() - 1);
}

template <typename S>
Tensor<S> dct_inverse(const Tensor<S>& x, const DctMatrix<S>& m) {
  if (x.rank() == 0 || x.dim(x.rank() - 1) != m.size) {
    throw DimensionError("dct_inverse: trailing dimension of " + shape_str(x.shape()) + " must be " +
                         std::to_string(m.size));
  }
  return matmul_axis(x, m.inverse, x.rank() - 1);
}

}  // namespace gazemotion
