#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "gazemotion/tensor.hpp"

#if !defined(NDEBUG) && !defined(GAZEMOTION_CHECK_FINITE)
#define GAZEMOTION_CHECK_FINITE 1
#endif

namespace gazemotion {

enum class Transpose { no, yes };

namespace detail {

/// Splits a shape around `axis` into (outer, axis length, inner).
struct AxisView {
  std::size_t outer = 1, n = 1, inner = 1;
};

inline AxisView axis_view(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  }
  AxisView v;
  for (std::size_t a = 0; a < axis; ++a) v.outer *= shape[a];
  v.n = shape[axis];
  for (std::size_t a = axis + 1; a < shape.size(); ++a) v.inner *= shape[a];
  return v;
}

template <typename S>
using Backward = typename Tape<S>::BackwardFn;

template <typename S>
Tensor<S> finish(const char* op, std::initializer_list<Tensor<S>> inputs, Tensor<S> out,
                 Backward<S> fn) {
#if GAZEMOTION_CHECK_FINITE
  bool inputs_finite = true;
  for (const auto& in : inputs) {
    for (S v : in.data()) inputs_finite = inputs_finite && std::isfinite(v);
  }
  if (inputs_finite) {
    for (S v : out.data()) {
      if (!std::isfinite(v)) throw NumericError(std::string("non-finite output from ") + op);
    }
  }
#endif
  Tape<S>* tape = Tape<S>::active();
  if (tape == nullptr) return out;
  bool any = false;
  std::vector<typename Tape<S>::ImplPtr> impls;
  for (const auto& in : inputs) {
    any = any || in.requires_grad();
    impls.push_back(in.impl());
  }
  if (!any) return out;
  out.set_requires_grad(true);
  out.impl()->leaf = false;
  tape->push(op, std::move(impls), out.impl(), std::move(fn));
  return out;
}

inline void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (a != b) throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using ConstMap = Eigen::Map<const RowMat<S>>;
template <typename S>
using MutMap = Eigen::Map<RowMat<S>>;

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  detail::require_same_shape("add", a.shape(), b.shape());
  Tensor<S> out(a.shape());
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  return detail::finish<S>("add", {a, b}, out, [](std::span<const S> g, const std::vector<std::span<S>>& gin) {
    for (const auto& gi : gin) {
      if (gi.empty()) continue;
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  detail::require_same_shape("sub", a.shape(), b.shape());
  Tensor<S> out(a.shape());
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
  return detail::finish<S>("sub", {a, b}, out, [](std::span<const S> g, const std::vector<std::span<S>>& gin) {
    if (!gin[0].empty())
      for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
    if (!gin[1].empty())
      for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] -= g[i];
  });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  detail::require_same_shape("mul", a.shape(), b.shape());
  Tensor<S> out(a.shape());
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  return detail::finish<S>("mul", {a, b}, out, [a, b](std::span<const S> g, const std::vector<std::span<S>>& gin) {
    auto x = a.data();
    auto y = b.data();
    if (!gin[0].empty())
      for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * y[i];
    if (!gin[1].empty())
      for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] += g[i] * x[i];
  });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S factor) {
  Tensor<S> out(a.shape());
  auto o = out.data();
  auto x = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * factor;
  return detail::finish<S>("scale", {a}, out, [factor](std::span<const S> g, const std::vector<std::span<S>>& gin) {
    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * factor;
  });
}

/// x + b where the 1-D `b` is broadcast along every index except `axis`.
template <typename S>
Tensor<S> add_broadcast(const Tensor<S>& x, const Tensor<S>& b, std::size_t axis) {
  const auto v = detail::axis_view(x.shape(), axis);
  if (b.rank() != 1 || b.dim(0) != v.n) {
    throw DimensionError("add_broadcast: bias " + shape_str(b.shape()) + " does not match axis " +
                         std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  Tensor<S> out(x.shape());
  auto o = out.data();
  auto xs = x.data();
  auto bs = b.data();
  for (std::size_t p = 0; p < v.outer; ++p)
    for (std::size_t k = 0; k < v.n; ++k)
      for (std::size_t q = 0; q < v.inner; ++q) {
        const std::size_t i = (p * v.n + k) * v.inner + q;
        o[i] = xs[i] + bs[k];
      }
  return detail::finish<S>("add_broadcast", {x, b}, out, [v](std::span<const S> g, const std::vector<std::span<S>>& gin) {
    if (!gin[0].empty())
      for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
    if (!gin[1].empty())
      for (std::size_t p = 0; p < v.outer; ++p)
        for (std::size_t k = 0; k < v.n; ++k)
          for (std::size_t q = 0; q < v.inner; ++q) gin[1][k] += g[(p * v.n + k) * v.inner + q];
  });
}

template <typename S>
Tensor<S> tanh(const Tensor<S>& x) {
  Tensor<S> out(x.shape());
  auto o = out.data();
  auto xs = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::tanh(xs[i]);
  return detail::finish<S>("tanh", {x}, out, [out](std::span<const S> g, const std::vector<std::span<S>>& gin) {
    auto y = out.data();
    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * (S(1) - y[i] * y[i]);
  });
}

/// arccos(clamp(x, lo, hi)); the gradient is zero where the clamp is active.
template <typename S>
Tensor<S> arccos_clamped(const Tensor<S>& x, S lo, S hi) {
  Tensor<S> out(x.shape());
  auto o = out.data();
  auto xs = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::acos(std::clamp(xs[i], lo, hi));
  return detail::finish<S>("arccos_clamped", {x}, out,
                           [x, lo, hi](std::span<const S> g, const std::vector<std::span<S>>& gin) {
                             auto xs = x.data();
                             for (std::size_t i = 0; i < g.size(); ++i) {
                               if (xs[i] <= lo || xs[i] >= hi) continue;
                               gin[0][i] -= g[i] / std::sqrt(S(1) - xs[i] * xs[i]);
                             }
                           });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename S>
Tensor<S> sum(const Tensor<S>& x) {
  S acc = S(0);
  for (S v : x.data()) acc += v;
  return detail::finish<S>("sum", {x}, Tensor<S>::scalar(acc), [](std::span<const S> g, const std::vector<std::span<S>>& gin) {
    for (auto& v : gin[0]) v += g[0];
  });
}

template <typename S>
Tensor<S> mean(const Tensor<S>& x) {
  const S inv = S(1) / static_cast<S>(x.numel());
  S acc = S(0);
  for (S v : x.data()) acc += v;
  return detail::finish<S>("mean", {x}, Tensor<S>::scalar(acc * inv),
                           [inv](std::span<const S> g, const std::vector<std::span<S>>& gin) {
                             for (auto& v : gin[0]) v += g[0] * inv;
                           });
}

/// Sums over `axis`, removing it (a rank-1 input yields shape [1]).
template <typename S>
Tensor<S> sum_axis(const Tensor<S>& x, std::size_t axis) {
  const auto v = detail::axis_view(x.shape(), axis);
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (shape.empty()) shape = {1};
  Tensor<S> out(shape);
  auto o = out.data();
  auto xs = x.data();
  for (std::size_t p = 0; p < v.outer; ++p)
    for (std::size_t k = 0; k < v.n; ++k)
      for (std::size_t q = 0; q < v.inner; ++q) o[p * v.inner + q] += xs[(p * v.n + k) * v.inner + q];
  return detail::finish<S>("sum_axis", {x}, out, [v](std::span<const S> g, const std::vector<std::span<S>>& gin) {
    for (std::size_t p = 0; p < v.outer; ++p)
      for (std::size_t k = 0; k < v.n; ++k)
        for (std::size_t q = 0; q < v.inner; ++q) gin[0][(p * v.n + k) * v.inner + q] += g[p * v.inner + q];
  });
}

// ---------------------------------------------------------------------------
// Contractions

/// Contracts `axis` of `x` with the rows of matrix `m` (or its columns when
/// `t == Transpose::yes`), replacing that axis by the other dimension of `m`.
///
/// For a 2-D `x` and axis 1 this is the ordinary product x * m.
template <typename S>
Tensor<S> matmul_axis(const Tensor<S>& x, const Tensor<S>& m, std::size_t axis, Transpose t = Transpose::no) {
  if (m.rank() != 2) throw DimensionError("matmul_axis: matrix operand must be rank 2, got " + shape_str(m.shape()));
  const auto v = detail::axis_view(x.shape(), axis);
  const bool tr = t == Transpose::yes;
  const std::size_t k_dim = tr ? m.dim(1) : m.dim(0);
  const std::size_t j_dim = tr ? m.dim(0) : m.dim(1);
  if (k_dim != v.n) {
    throw DimensionError("matmul_axis: cannot contract axis " + std::to_string(axis) + " of " + shape_str(x.shape()) +
                         " with " + shape_str(m.shape()) + (tr ? " (transposed)" : ""));
  }
  Shape shape = x.shape();
  shape[axis] = j_dim;
  Tensor<S> out(shape);

  using CMap = detail::ConstMap<S>;
  using MMap = detail::MutMap<S>;
  const CMap mm(m.data().data(), static_cast<Eigen::Index>(m.dim(0)), static_cast<Eigen::Index>(m.dim(1)));
  const auto K = static_cast<Eigen::Index>(k_dim);
  const auto J = static_cast<Eigen::Index>(j_dim);
  const auto I = static_cast<Eigen::Index>(v.inner);
  if (v.inner == 1) {
    const CMap xm(x.data().data(), static_cast<Eigen::Index>(v.outer), K);
    MMap om(out.data().data(), static_cast<Eigen::Index>(v.outer), J);
    if (tr)
      om.noalias() = xm * mm.transpose();
    else
      om.noalias() = xm * mm;
  } else {
    for (std::size_t p = 0; p < v.outer; ++p) {
      const CMap xo(x.data().data() + p * v.n * v.inner, K, I);
      MMap oo(out.data().data() + p * j_dim * v.inner, J, I);
      if (tr)
        oo.noalias() = mm * xo;
      else
        oo.noalias() = mm.transpose() * xo;
    }
  }

  return detail::finish<S>(
      "matmul", {x, m}, out, [x, m, v, tr, k_dim, j_dim](std::span<const S> g, const std::vector<std::span<S>>& gin) {
        using CMap = detail::ConstMap<S>;
        using MMap = detail::MutMap<S>;
        const auto K = static_cast<Eigen::Index>(k_dim);
        const auto J = static_cast<Eigen::Index>(j_dim);
        const auto I = static_cast<Eigen::Index>(v.inner);
        const CMap mm(m.data().data(), static_cast<Eigen::Index>(m.dim(0)), static_cast<Eigen::Index>(m.dim(1)));
        const bool want_x = !gin[0].empty();
        const bool want_m = !gin[1].empty();
        if (v.inner == 1) {
          const auto P = static_cast<Eigen::Index>(v.outer);
          const CMap gm(g.data(), P, J);
          const CMap xm(x.data().data(), P, K);
          if (want_x) {
            MMap gx(gin[0].data(), P, K);
            if (tr)
              gx.noalias() += gm * mm;
            else
              gx.noalias() += gm * mm.transpose();
          }
          if (want_m) {
            MMap gmm(gin[1].data(), static_cast<Eigen::Index>(m.dim(0)), static_cast<Eigen::Index>(m.dim(1)));
            if (tr)
              gmm.noalias() += gm.transpose() * xm;
            else
              gmm.noalias() += xm.transpose() * gm;
          }
          return;
        }
        for (std::size_t p = 0; p < v.outer; ++p) {
          const CMap go(g.data() + p * j_dim * v.inner, J, I);
          if (want_x) {
            MMap gx(gin[0].data() + p * v.n * v.inner, K, I);
            if (tr)
              gx.noalias() += mm.transpose() * go;
            else
              gx.noalias() += mm * go;
          }
          if (want_m) {
            const CMap xo(x.data().data() + p * v.n * v.inner, K, I);
            MMap gmm(gin[1].data(), static_cast<Eigen::Index>(m.dim(0)), static_cast<Eigen::Index>(m.dim(1)));
            if (tr)
              gmm.noalias() += go * xo.transpose();
            else
              gmm.noalias() += xo * go.transpose();
          }
        }
      });
}

/// Plain matrix product of two rank-2 tensors.
template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 2) throw DimensionError("matmul: left operand must be rank 2, got " + shape_str(a.shape()));
  return matmul_axis(a, b, 1);
}

/// Length-preserving 1-D convolution (kernel 3, stride 1, zero padding 1).
/// x: [C_in, L], kernels: [C_out, C_in, 3], bias: [C_out] -> [C_out, L].
template <typename S>
Tensor<S> conv1d_same(const Tensor<S>& x, const Tensor<S>& kernels, const Tensor<S>& bias) {
  if (x.rank() != 2) throw DimensionError("conv1d_same: input must be [C_in, L], got " + shape_str(x.shape()));
  if (kernels.rank() != 3 || kernels.dim(2) != 3) {
    throw DimensionError("conv1d_same: kernels must be [C_out, C_in, 3], got " + shape_str(kernels.shape()));
  }
  const std::size_t cin = x.dim(0), len = x.dim(1), cout = kernels.dim(0);
  if (kernels.dim(1) != cin) {
    throw DimensionError("conv1d_same: channel mismatch, input " + shape_str(x.shape()) + " vs kernels " +
                         shape_str(kernels.shape()));
  }
  if (bias.rank() != 1 || bias.dim(0) != cout) {
    throw DimensionError("conv1d_same: bias " + shape_str(bias.shape()) + " does not match " + std::to_string(cout) +
                         " output channels");
  }
  Tensor<S> out({cout, len});
  auto o = out.data();
  auto xs = x.data();
  auto w = kernels.data();
  auto b = bias.data();
  for (std::size_t oc = 0; oc < cout; ++oc) {
    for (std::size_t l = 0; l < len; ++l) {
      S acc = b[oc];
      for (std::size_t ic = 0; ic < cin; ++ic) {
        const S* wk = &w[(oc * cin + ic) * 3];
        const S* xr = &xs[ic * len];
        if (l > 0) acc += wk[0] * xr[l - 1];
        acc += wk[1] * xr[l];
        if (l + 1 < len) acc += wk[2] * xr[l + 1];
      }
      o[oc * len + l] = acc;
    }
  }
  return detail::finish<S>(
      "conv1d_same", {x, kernels, bias}, out,
      [x, kernels, cin, cout, len](std::span<const S> g, const std::vector<std::span<S>>& gin) {
        auto xs = x.data();
        auto w = kernels.data();
        for (std::size_t oc = 0; oc < cout; ++oc) {
          for (std::size_t l = 0; l < len; ++l) {
            const S go = g[oc * len + l];
            if (!gin[2].empty()) gin[2][oc] += go;
            for (std::size_t ic = 0; ic < cin; ++ic) {
              const std::size_t wi = (oc * cin + ic) * 3;
              const std::size_t xi = ic * len;
              if (!gin[0].empty()) {
                if (l > 0) gin[0][xi + l - 1] += go * w[wi];
                gin[0][xi + l] += go * w[wi + 1];
                if (l + 1 < len) gin[0][xi + l + 1] += go * w[wi + 2];
              }
              if (!gin[1].empty()) {
                if (l > 0) gin[1][wi] += go * xs[xi + l - 1];
                gin[1][wi + 1] += go * xs[xi + l];
                if (l + 1 < len) gin[1][wi + 2] += go * xs[xi + l + 1];
              }
            }
          }
        }
      });
}

/// Normalizes every fibre along `axis` to zero mean and unit (biased)
/// variance, then applies gain * x + bias.
template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, std::size_t axis, const Tensor<S>& gain, const Tensor<S>& bias,
                     S eps = S(1e-5)) {
  const auto v = detail::axis_view(x.shape(), axis);
  if (gain.rank() != 1 || gain.dim(0) != v.n || bias.rank() != 1 || bias.dim(0) != v.n) {
    throw DimensionError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " + shape_str(bias.shape()) +
                         " must match axis length " + std::to_string(v.n));
  }
  if (!(eps > S(0))) throw ArgumentError("layer_norm: eps must be positive");
  Tensor<S> out(x.shape());
  std::vector<S> xhat(x.numel());
  std::vector<S> inv_std(v.outer * v.inner);
  auto o = out.data();
  auto xs = x.data();
  auto ga = gain.data();
  auto be = bias.data();
  const S inv_n = S(1) / static_cast<S>(v.n);
  for (std::size_t p = 0; p < v.outer; ++p) {
    for (std::size_t q = 0; q < v.inner; ++q) {
      const std::size_t base = p * v.n * v.inner + q;
      S mu = S(0);
      for (std::size_t k = 0; k < v.n; ++k) mu += xs[base + k * v.inner];
      mu *= inv_n;
      S var = S(0);
      for (std::size_t k = 0; k < v.n; ++k) {
        const S d = xs[base + k * v.inner] - mu;
        var += d * d;
      }
      var *= inv_n;
      const S is = S(1) / std::sqrt(var + eps);
      inv_std[p * v.inner + q] = is;
      for (std::size_t k = 0; k < v.n; ++k) {
        const std::size_t i = base + k * v.inner;
        xhat[i] = (xs[i] - mu) * is;
        o[i] = ga[k] * xhat[i] + be[k];
      }
    }
  }
  return detail::finish<S>(
      "layer_norm", {x, gain, bias}, out,
      [v, gain, xhat = std::move(xhat), inv_std = std::move(inv_std), inv_n](std::span<const S> g,
                                                                              const std::vector<std::span<S>>& gin) {
        auto ga = gain.data();
        for (std::size_t p = 0; p < v.outer; ++p) {
          for (std::size_t q = 0; q < v.inner; ++q) {
            const std::size_t base = p * v.n * v.inner + q;
            S mean_gy = S(0), mean_gy_xhat = S(0);
            for (std::size_t k = 0; k < v.n; ++k) {
              const std::size_t i = base + k * v.inner;
              const S gy = g[i] * ga[k];
              mean_gy += gy;
              mean_gy_xhat += gy * xhat[i];
              if (!gin[1].empty()) gin[1][k] += g[i] * xhat[i];
              if (!gin[2].empty()) gin[2][k] += g[i];
            }
            if (gin[0].empty()) continue;
            mean_gy *= inv_n;
            mean_gy_xhat *= inv_n;
            const S is = inv_std[p * v.inner + q];
            for (std::size_t k = 0; k < v.n; ++k) {
              const std::size_t i = base + k * v.inner;
              gin[0][i] += is * (g[i] * ga[k] - mean_gy - xhat[i] * mean_gy_xhat);
            }
          }
        }
      });
}

/// Inverted dropout: in training each element is zeroed with probability
/// `p` and survivors are scaled by 1/(1-p). Outside training it is the identity.
template <typename S, typename Rng>
Tensor<S> dropout(const Tensor<S>& x, double p, bool train, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ArgumentError("dropout: rate must be in [0, 1)");
  if (!train || p == 0.0) return x;
  if (auto* tape = Tape<S>::active()) tape->mark_stochastic();
  std::bernoulli_distribution keep(1.0 - p);
  const S scale_kept = S(1) / static_cast<S>(1.0 - p);
  std::vector<S> mask(x.numel());
  for (auto& m : mask) m = keep(rng) ? scale_kept : S(0);
  Tensor<S> out(x.shape());
  auto o = out.data();
  auto xs = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xs[i] * mask[i];
  return detail::finish<S>("dropout", {x}, out,
                           [mask = std::move(mask)](std::span<const S> g, const std::vector<std::span<S>>& gin) {
                             for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * mask[i];
                           });
}

// ---------------------------------------------------------------------------
// Layout

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  Tensor<S> out(std::move(shape), x.values());
  return detail::finish<S>("reshape", {x}, out, [](std::span<const S> g, const std::vector<std::span<S>>& gin) {
    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
  });
}

template <typename S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts, std::size_t axis) {
  if (parts.empty()) throw ArgumentError("concat: no inputs");
  Shape shape = parts.front().shape();
  if (axis >= shape.size()) throw DimensionError("concat: axis out of range for " + shape_str(shape));
  shape[axis] = 0;
  for (const auto& t : parts) {
    Shape a = t.shape(), b = parts.front().shape();
    if (a.size() != b.size()) throw DimensionError("concat: rank mismatch");
    a[axis] = b[axis] = 0;
    if (a != b) throw DimensionError("concat: shape mismatch " + shape_str(t.shape()) + " vs " + shape_str(parts.front().shape()));
    shape[axis] += t.dim(axis);
  }
  Tensor<S> out(shape);
  const auto vo = detail::axis_view(shape, axis);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& t : parts) {
    offsets.push_back(off);
    const auto vi = detail::axis_view(t.shape(), axis);
    auto src = t.data();
    auto dst = out.data();
    for (std::size_t p = 0; p < vi.outer; ++p)
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(p * vi.n * vi.inner), vi.n * vi.inner,
                  dst.begin() + static_cast<std::ptrdiff_t>((p * vo.n + off) * vo.inner));
    off += vi.n;
  }

  // Tape entries take a fixed input list; record one entry per part.
  Tape<S>* tape = Tape<S>::active();
  bool any = false;
  for (const auto& t : parts) any = any || t.requires_grad();
  if (tape == nullptr || !any) return out;
  out.set_requires_grad(true);
  out.impl()->leaf = false;
  std::vector<typename Tape<S>::ImplPtr> impls;
  for (const auto& t : parts) impls.push_back(t.impl());
  std::vector<std::size_t> lengths;
  for (const auto& t : parts) lengths.push_back(t.dim(axis));
  tape->push("concat", std::move(impls), out.impl(),
             [vo, offsets, lengths](std::span<const S> g, const std::vector<std::span<S>>& gin) {
               for (std::size_t j = 0; j < gin.size(); ++j) {
                 if (gin[j].empty()) continue;
                 const std::size_t n = lengths[j];
                 for (std::size_t p = 0; p < vo.outer; ++p)
                   for (std::size_t r = 0; r < n * vo.inner; ++r)
                     gin[j][p * n * vo.inner + r] += g[(p * vo.n + offsets[j]) * vo.inner + r];
               }
             });
  return out;
}

/// Elements [begin, end) along `axis`.
template <typename S>
Tensor<S> slice(const Tensor<S>& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto v = detail::axis_view(x.shape(), axis);
  if (begin >= end || end > v.n) {
    throw DimensionError("slice: [" + std::to_string(begin) + ", " + std::to_string(end) + ") invalid for axis " +
                         std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  Shape shape = x.shape();
  shape[axis] = end - begin;
  Tensor<S> out(shape);
  const std::size_t n = end - begin;
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t p = 0; p < v.outer; ++p)
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>((p * v.n + begin) * v.inner), n * v.inner,
                dst.begin() + static_cast<std::ptrdiff_t>(p * n * v.inner));
  return detail::finish<S>("slice", {x}, out, [v, begin, n](std::span<const S> g, const std::vector<std::span<S>>& gin) {
    for (std::size_t p = 0; p < v.outer; ++p)
      for (std::size_t r = 0; r < n * v.inner; ++r) gin[0][(p * v.n + begin) * v.inner + r] += g[p * n * v.inner + r];
  });
}

/// General axis permutation: output axis i is input axis perm[i].
template <typename S>
Tensor<S> permute(const Tensor<S>& x, const std::vector<std::size_t>& perm) {
  const std::size_t r = x.rank();
  if (perm.size() != r) throw DimensionError("permute: permutation rank mismatch for " + shape_str(x.shape()));
  std::vector<bool> used(r, false);
  for (auto p : perm) {
    if (p >= r || used[p]) throw DimensionError("permute: invalid permutation");
    used[p] = true;
  }
  Shape shape(r);
  for (std::size_t i = 0; i < r; ++i) shape[i] = x.dim(perm[i]);
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t a = r; a-- > 1;) in_strides[a - 1] = in_strides[a] * x.dim(a);
  // src_index[i] = input flat index of output flat index i
  std::vector<std::size_t> src_index(x.numel());
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t i = 0; i < src_index.size(); ++i) {
    std::size_t off = 0;
    for (std::size_t a = 0; a < r; ++a) off += idx[a] * in_strides[perm[a]];
    src_index[i] = off;
    for (std::size_t a = r; a-- > 0;) {
      if (++idx[a] < shape[a]) break;
      idx[a] = 0;
    }
  }
  Tensor<S> out(shape);
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[src_index[i]];
  return detail::finish<S>("permute", {x}, out,
                           [src_index = std::move(src_index)](std::span<const S> g, const std::vector<std::span<S>>& gin) {
                             for (std::size_t i = 0; i < g.size(); ++i) gin[0][src_index[i]] += g[i];
                           });
}

/// Tiles `x` `count` times along `axis`.
template <typename S>
Tensor<S> repeat_axis(const Tensor<S>& x, std::size_t axis, std::size_t count) {
  if (count == 0) throw ArgumentError("repeat_axis: count must be positive");
  std::vector<Tensor<S>> parts(count, x);
  if (count == 1) return x;
  // concat records one tape entry whose inputs alias the same storage;
  // gradients from every copy accumulate into it.
  return concat(parts, axis);
}

/// Extends `axis` to `total` by repeating the last slice.
template <typename S>
Tensor<S> pad_repeat_last(const Tensor<S>& x, std::size_t axis, std::size_t total) {
  const auto v = detail::axis_view(x.shape(), axis);
  if (v.n > total) {
    throw ArgumentError("pad_repeat_last: length " + std::to_string(v.n) + " exceeds target " + std::to_string(total));
  }
  Shape shape = x.shape();
  shape[axis] = total;
  Tensor<S> out(shape);
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t p = 0; p < v.outer; ++p)
    for (std::size_t k = 0; k < total; ++k) {
      const std::size_t ks = std::min(k, v.n - 1);
      for (std::size_t q = 0; q < v.inner; ++q)
        dst[(p * total + k) * v.inner + q] = src[(p * v.n + ks) * v.inner + q];
    }
  return detail::finish<S>("pad_repeat_last", {x}, out,
                           [v, total](std::span<const S> g, const std::vector<std::span<S>>& gin) {
                             for (std::size_t p = 0; p < v.outer; ++p)
                               for (std::size_t k = 0; k < total; ++k) {
                                 const std::size_t ks = std::min(k, v.n - 1);
                                 for (std::size_t q = 0; q < v.inner; ++q)
                                   gin[0][(p * v.n + ks) * v.inner + q] += g[(p * total + k) * v.inner + q];
                               }
                           });
}

/// Scales every fibre along `axis` to unit L2 norm. Fibres whose norm is
/// below `min_norm` are replaced by `fallback` (a 1-D tensor of the axis
/// length) and receive no gradient.
template <typename S>
Tensor<S> normalize_axis(const Tensor<S>& x, std::size_t axis, const Tensor<S>& fallback, S min_norm = S(1e-8)) {
  const auto v = detail::axis_view(x.shape(), axis);
  if (fallback.rank() != 1 || fallback.dim(0) != v.n) {
    throw DimensionError("normalize_axis: fallback " + shape_str(fallback.shape()) + " must have length " +
                         std::to_string(v.n));
  }
  Tensor<S> out(x.shape());
  std::vector<S> norms(v.outer * v.inner);
  auto xs = x.data();
  auto o = out.data();
  auto fb = fallback.data();
  for (std::size_t p = 0; p < v.outer; ++p)
    for (std::size_t q = 0; q < v.inner; ++q) {
      const std::size_t base = p * v.n * v.inner + q;
      S ss = S(0);
      for (std::size_t k = 0; k < v.n; ++k) ss += xs[base + k * v.inner] * xs[base + k * v.inner];
      const S nrm = std::sqrt(ss);
      norms[p * v.inner + q] = nrm;
      for (std::size_t k = 0; k < v.n; ++k)
        o[base + k * v.inner] = nrm < min_norm ? fb[k] : xs[base + k * v.inner] / nrm;
    }
  return detail::finish<S>(
      "normalize", {x}, out,
      [v, out, norms = std::move(norms), min_norm](std::span<const S> g, const std::vector<std::span<S>>& gin) {
        auto y = out.data();
        for (std::size_t p = 0; p < v.outer; ++p)
          for (std::size_t q = 0; q < v.inner; ++q) {
            const S nrm = norms[p * v.inner + q];
            if (nrm < min_norm) continue;
            const std::size_t base = p * v.n * v.inner + q;
            S dot = S(0);
            for (std::size_t k = 0; k < v.n; ++k) dot += g[base + k * v.inner] * y[base + k * v.inner];
            for (std::size_t k = 0; k < v.n; ++k) {
              const std::size_t i = base + k * v.inner;
              gin[0][i] += (g[i] - y[i] * dot) / nrm;
            }
          }
      });
}

}  // namespace gazemotion
