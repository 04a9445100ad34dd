#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "volgan/common.hpp"
#include "volgan/tape.hpp"
#include "volgan/tensor.hpp"

namespace volgan {

enum class Padding { valid, same };
enum class ActKind { relu, leaky_relu, sigmoid, tanh, softmax };

namespace detail {

template <typename S>
using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MatMap = Eigen::Map<EMat<S>>;
template <typename S>
using CMatMap = Eigen::Map<const EMat<S>>;

using Index = Eigen::Index;

// c[m,n] = a[m,k] * b[k,n], optionally accumulating into c.
template <typename S>
void gemm_nn(const S* a, const S* b, S* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate = false) {
  CMatMap<S> ma(a, Index(m), Index(k));
  CMatMap<S> mb(b, Index(k), Index(n));
  MatMap<S> mc(c, Index(m), Index(n));
  if (accumulate) {
    mc.noalias() += ma * mb;
  } else {
    mc.noalias() = ma * mb;
  }
}

// c[m,n] = a[m,k] * b[n,k]^T
template <typename S>
void gemm_nt(const S* a, const S* b, S* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate = false) {
  CMatMap<S> ma(a, Index(m), Index(k));
  CMatMap<S> mb(b, Index(n), Index(k));
  MatMap<S> mc(c, Index(m), Index(n));
  if (accumulate) {
    mc.noalias() += ma * mb.transpose();
  } else {
    mc.noalias() = ma * mb.transpose();
  }
}

// c[m,n] = a[k,m]^T * b[k,n]
template <typename S>
void gemm_tn(const S* a, const S* b, S* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate = false) {
  CMatMap<S> ma(a, Index(k), Index(m));
  CMatMap<S> mb(b, Index(k), Index(n));
  MatMap<S> mc(c, Index(m), Index(n));
  if (accumulate) {
    mc.noalias() += ma.transpose() * mb;
  } else {
    mc.noalias() = ma.transpose() * mb;
  }
}

struct ConvGeom2d {
  std::size_t out_h = 0, out_w = 0;
  std::size_t pad_h0 = 0, pad_w0 = 0;
};

inline ConvGeom2d conv2d_geometry(std::size_t h, std::size_t w, std::size_t kh,
                                  std::size_t kw, std::size_t stride,
                                  Padding padding) {
  ConvGeom2d g;
  if (padding == Padding::valid) {
    if (h < kh || w < kw) {
      throw ShapeError("conv2d: kernel larger than input under valid padding");
    }
    g.out_h = (h - kh) / stride + 1;
    g.out_w = (w - kw) / stride + 1;
  } else {
    g.out_h = (h + stride - 1) / stride;
    g.out_w = (w + stride - 1) / stride;
    const std::size_t need_h = (g.out_h - 1) * stride + kh;
    const std::size_t need_w = (g.out_w - 1) * stride + kw;
    g.pad_h0 = (need_h > h ? need_h - h : 0) / 2;
    g.pad_w0 = (need_w > w ? need_w - w : 0) / 2;
  }
  return g;
}

// Gathers kh*kw patches of `big` [B, big_h, big_w, c] into a row per
// (b, sy, sx) small-grid position: cols[(b*small_h+sy)*small_w+sx,
// (dy*kw+dx)*c + ..]. Out-of-bounds reads (padding) yield zero.
template <typename S>
void im2col2d(const S* big, std::size_t batch, std::size_t big_h,
              std::size_t big_w, std::size_t c, std::size_t kh, std::size_t kw,
              std::size_t stride, std::size_t pad_h0, std::size_t pad_w0,
              std::size_t small_h, std::size_t small_w, S* cols) {
  const std::size_t patch = kh * kw * c;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t sy = 0; sy < small_h; ++sy) {
      for (std::size_t sx = 0; sx < small_w; ++sx) {
        S* row = cols + ((b * small_h + sy) * small_w + sx) * patch;
        for (std::size_t dy = 0; dy < kh; ++dy) {
          const std::ptrdiff_t y =
              std::ptrdiff_t(sy * stride + dy) - std::ptrdiff_t(pad_h0);
          for (std::size_t dx = 0; dx < kw; ++dx) {
            const std::ptrdiff_t x =
                std::ptrdiff_t(sx * stride + dx) - std::ptrdiff_t(pad_w0);
            S* dst = row + (dy * kw + dx) * c;
            if (y < 0 || y >= std::ptrdiff_t(big_h) || x < 0 ||
                x >= std::ptrdiff_t(big_w)) {
              std::fill(dst, dst + c, S(0));
            } else {
              const S* src =
                  big + ((b * big_h + std::size_t(y)) * big_w + std::size_t(x)) * c;
              std::copy(src, src + c, dst);
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col2d: scatter-adds each patch row back into `big`.
template <typename S>
void col2im2d(const S* cols, std::size_t batch, std::size_t big_h,
              std::size_t big_w, std::size_t c, std::size_t kh, std::size_t kw,
              std::size_t stride, std::size_t pad_h0, std::size_t pad_w0,
              std::size_t small_h, std::size_t small_w, S* big) {
  const std::size_t patch = kh * kw * c;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t sy = 0; sy < small_h; ++sy) {
      for (std::size_t sx = 0; sx < small_w; ++sx) {
        const S* row = cols + ((b * small_h + sy) * small_w + sx) * patch;
        for (std::size_t dy = 0; dy < kh; ++dy) {
          const std::ptrdiff_t y =
              std::ptrdiff_t(sy * stride + dy) - std::ptrdiff_t(pad_h0);
          if (y < 0 || y >= std::ptrdiff_t(big_h)) continue;
          for (std::size_t dx = 0; dx < kw; ++dx) {
            const std::ptrdiff_t x =
                std::ptrdiff_t(sx * stride + dx) - std::ptrdiff_t(pad_w0);
            if (x < 0 || x >= std::ptrdiff_t(big_w)) continue;
            const S* src = row + (dy * kw + dx) * c;
            S* dst =
                big + ((b * big_h + std::size_t(y)) * big_w + std::size_t(x)) * c;
            for (std::size_t i = 0; i < c; ++i) dst[i] += src[i];
          }
        }
      }
    }
  }
}

template <typename S>
void im2col3d(const S* x, std::size_t batch, std::size_t h, std::size_t w,
              std::size_t d, std::size_t c, std::size_t k0, std::size_t k1,
              std::size_t k2, std::size_t oh, std::size_t ow, std::size_t od,
              S* cols) {
  const std::size_t patch = k0 * k1 * k2 * c;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        for (std::size_t oz = 0; oz < od; ++oz) {
          S* row =
              cols + (((b * oh + oy) * ow + ox) * od + oz) * patch;
          for (std::size_t d0 = 0; d0 < k0; ++d0) {
            for (std::size_t d1 = 0; d1 < k1; ++d1) {
              for (std::size_t d2 = 0; d2 < k2; ++d2) {
                const S* src =
                    x + ((((b * h + oy + d0) * w + ox + d1) * d + oz + d2)) * c;
                S* dst = row + ((d0 * k1 + d1) * k2 + d2) * c;
                std::copy(src, src + c, dst);
              }
            }
          }
        }
      }
    }
  }
}

template <typename S>
void col2im3d(const S* cols, std::size_t batch, std::size_t h, std::size_t w,
              std::size_t d, std::size_t c, std::size_t k0, std::size_t k1,
              std::size_t k2, std::size_t oh, std::size_t ow, std::size_t od,
              S* x) {
  const std::size_t patch = k0 * k1 * k2 * c;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        for (std::size_t oz = 0; oz < od; ++oz) {
          const S* row =
              cols + (((b * oh + oy) * ow + ox) * od + oz) * patch;
          for (std::size_t d0 = 0; d0 < k0; ++d0) {
            for (std::size_t d1 = 0; d1 < k1; ++d1) {
              for (std::size_t d2 = 0; d2 < k2; ++d2) {
                S* dst =
                    x + ((((b * h + oy + d0) * w + ox + d1) * d + oz + d2)) * c;
                const S* src = row + ((d0 * k1 + d1) * k2 + d2) * c;
                for (std::size_t i = 0; i < c; ++i) dst[i] += src[i];
              }
            }
          }
        }
      }
    }
  }
}

template <typename S>
bool want_grad(const TensorT<S>& t) {
  return t.requires_grad();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and linear-algebra primitives
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b,
               TapeT<S>* tape = nullptr) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  std::vector<S> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] + b.data()[i];
  auto out = TensorT<S>::from(a.shape(), std::move(y));
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([a, b, out]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b,
               TapeT<S>* tape = nullptr) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  std::vector<S> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] * b.data()[i];
  auto out = TensorT<S>::from(a.shape(), std::move(y));
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([a, b, out]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.data()[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.data()[i];
      }
    });
  }
  return out;
}

template <typename S>
TensorT<S> scale(const TensorT<S>& a, S c, TapeT<S>* tape = nullptr) {
  std::vector<S> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] * c;
  auto out = TensorT<S>::from(a.shape(), std::move(y));
  if (tape && a.requires_grad()) {
    out.set_requires_grad(true);
    tape->record([a, out, c]() mutable {
      auto g = out.grad();
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
    });
  }
  return out;
}

template <typename S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b,
                  TapeT<S>* tape = nullptr) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul: expects rank-2 operands, got " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner dimensions differ, " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<S> y(m * n);
  detail::gemm_nn(a.raw(), b.raw(), y.data(), m, k, n);
  auto out = TensorT<S>::from({m, n}, std::move(y));
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([a, b, out, m, k, n]() mutable {
      const S* g = out.grad().data();
      if (a.requires_grad()) {
        detail::gemm_nt(g, b.raw(), a.grad().data(), m, n, k, true);
      }
      if (b.requires_grad()) {
        detail::gemm_tn(a.raw(), g, b.grad().data(), k, m, n, true);
      }
    });
  }
  return out;
}

// y[..., c] = x[..., c] + bias[c]
template <typename S>
TensorT<S> bias_add(const TensorT<S>& x, const TensorT<S>& bias,
                    TapeT<S>* tape = nullptr) {
  if (bias.rank() != 1 || x.rank() < 1 ||
      x.shape().back() != bias.dim(0)) {
    throw ShapeError("bias_add: bias " + shape_str(bias.shape()) +
                     " does not match trailing dim of " + shape_str(x.shape()));
  }
  const std::size_t c = bias.dim(0);
  const std::size_t rows = x.size() / c;
  std::vector<S> y(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < c; ++i) {
      y[r * c + i] = x.data()[r * c + i] + bias.data()[i];
    }
  }
  auto out = TensorT<S>::from(x.shape(), std::move(y));
  if (tape && (x.requires_grad() || bias.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([x, bias, out, rows, c]() mutable {
      auto g = out.grad();
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (bias.requires_grad()) {
        auto gb = bias.grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t i = 0; i < c; ++i) gb[i] += g[r * c + i];
        }
      }
    });
  }
  return out;
}

template <typename S>
TensorT<S> reshape(const TensorT<S>& x, const Shape& shape,
                   TapeT<S>* tape = nullptr) {
  if (shape_numel(shape) != x.size()) {
    throw ShapeError("reshape: element count changes from " +
                     shape_str(x.shape()) + " to " + shape_str(shape));
  }
  auto out = TensorT<S>::from(shape,
                              std::vector<S>(x.data().begin(), x.data().end()));
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    tape->record([x, out]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

template <typename S>
TensorT<S> flatten(const TensorT<S>& x, TapeT<S>* tape = nullptr) {
  if (x.rank() < 2) throw ShapeError("flatten: expects rank >= 2");
  return reshape(x, {x.dim(0), x.size() / x.dim(0)}, tape);
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

namespace detail {

template <typename S, typename Fwd, typename Bwd>
TensorT<S> unary_op(const TensorT<S>& x, TapeT<S>* tape, Fwd fwd, Bwd bwd) {
  std::vector<S> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = fwd(x.data()[i]);
  auto out = TensorT<S>::from(x.shape(), std::move(y));
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    tape->record([x, out, bwd]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        gx[i] += g[i] * bwd(x.data()[i], out.data()[i]);
      }
    });
  }
  return out;
}

template <typename S>
S stable_sigmoid(S v) {
  if (v >= S(0)) {
    return S(1) / (S(1) + std::exp(-v));
  }
  const S e = std::exp(v);
  return e / (S(1) + e);
}

}  // namespace detail

template <typename S>
TensorT<S> relu(const TensorT<S>& x, TapeT<S>* tape = nullptr) {
  return detail::unary_op(
      x, tape, [](S v) { return v > S(0) ? v : S(0); },
      [](S v, S) { return v > S(0) ? S(1) : S(0); });
}

template <typename S>
TensorT<S> leaky_relu(const TensorT<S>& x, S alpha, TapeT<S>* tape = nullptr) {
  return detail::unary_op(
      x, tape, [alpha](S v) { return v > S(0) ? v : alpha * v; },
      [alpha](S v, S) { return v > S(0) ? S(1) : alpha; });
}

template <typename S>
TensorT<S> sigmoid(const TensorT<S>& x, TapeT<S>* tape = nullptr) {
  return detail::unary_op(
      x, tape, [](S v) { return detail::stable_sigmoid(v); },
      [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
TensorT<S> tanh_act(const TensorT<S>& x, TapeT<S>* tape = nullptr) {
  return detail::unary_op(
      x, tape, [](S v) { return std::tanh(v); },
      [](S, S y) { return S(1) - y * y; });
}

// Softmax over the last axis; each row sums to one.
template <typename S>
TensorT<S> softmax(const TensorT<S>& x, TapeT<S>* tape = nullptr) {
  if (x.rank() < 1) throw ShapeError("softmax: expects rank >= 1");
  const std::size_t c = x.shape().back();
  const std::size_t rows = x.size() / c;
  std::vector<S> y(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const S* xr = x.raw() + r * c;
    S* yr = y.data() + r * c;
    S mx = xr[0];
    for (std::size_t i = 1; i < c; ++i) mx = std::max(mx, xr[i]);
    S sum = S(0);
    for (std::size_t i = 0; i < c; ++i) {
      yr[i] = std::exp(xr[i] - mx);
      sum += yr[i];
    }
    for (std::size_t i = 0; i < c; ++i) yr[i] /= sum;
  }
  auto out = TensorT<S>::from(x.shape(), std::move(y));
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    tape->record([x, out, rows, c]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const S* yr = out.raw() + r * c;
        const S* gr = g.data() + r * c;
        S dot = S(0);
        for (std::size_t i = 0; i < c; ++i) dot += gr[i] * yr[i];
        for (std::size_t i = 0; i < c; ++i) {
          gx[r * c + i] += yr[i] * (gr[i] - dot);
        }
      }
    });
  }
  return out;
}

template <typename S>
TensorT<S> apply_activation(const TensorT<S>& x, ActKind kind, S alpha = S(0.2),
                            TapeT<S>* tape = nullptr) {
  switch (kind) {
    case ActKind::relu:
      return relu(x, tape);
    case ActKind::leaky_relu:
      return leaky_relu(x, alpha, tape);
    case ActKind::sigmoid:
      return sigmoid(x, tape);
    case ActKind::tanh:
      return tanh_act(x, tape);
    case ActKind::softmax:
      return softmax(x, tape);
  }
  throw ContractError("apply_activation: unknown kind");
}

// Inverted dropout: in training mode each element is dropped with the given
// probability and survivors are scaled by 1/(1-rate), so the expectation is
// unchanged. Inference mode is the identity. Mask is a pure function of the
// seed.
template <typename S>
TensorT<S> dropout(const TensorT<S>& x, double rate, bool training,
                   std::uint64_t seed, TapeT<S>* tape = nullptr) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ContractError("dropout: rate must be in [0, 1), got " +
                        std::to_string(rate));
  }
  if (!training || rate == 0.0) {
    std::vector<S> y(x.data().begin(), x.data().end());
    auto out = TensorT<S>::from(x.shape(), std::move(y));
    if (tape && x.requires_grad()) {
      out.set_requires_grad(true);
      tape->record([x, out]() mutable {
        auto g = out.grad();
        auto gx = x.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      });
    }
    return out;
  }
  const S keep_scale = S(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<S>>(x.size());
  Rng rng(seed);
  std::vector<S> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const S m = rng.next_double() >= rate ? keep_scale : S(0);
    (*mask)[i] = m;
    y[i] = x.data()[i] * m;
  }
  auto out = TensorT<S>::from(x.shape(), std::move(y));
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    tape->record([x, out, mask]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*mask)[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolutions and pooling (channels-last layouts)
// ---------------------------------------------------------------------------

// input [B,H,W,Cin], kernel [kh,kw,Cin,Cout] -> [B,H',W',Cout]
template <typename S>
TensorT<S> conv2d(const TensorT<S>& x, const TensorT<S>& kernel,
                  std::size_t stride, Padding padding,
                  const std::optional<TensorT<S>>& bias = std::nullopt,
                  TapeT<S>* tape = nullptr) {
  if (x.rank() != 4 || kernel.rank() != 4) {
    throw ShapeError("conv2d: expects input rank 4 and kernel rank 4");
  }
  if (stride == 0) throw ContractError("conv2d: stride must be positive");
  const std::size_t batch = x.dim(0), h = x.dim(1), w = x.dim(2),
                    cin = x.dim(3);
  const std::size_t kh = kernel.dim(0), kw = kernel.dim(1),
                    cout = kernel.dim(3);
  if (kernel.dim(2) != cin) {
    throw ShapeError("conv2d: channel mismatch, input has " +
                     std::to_string(cin) + ", kernel expects " +
                     std::to_string(kernel.dim(2)));
  }
  if (bias && (bias->rank() != 1 || bias->dim(0) != cout)) {
    throw ShapeError("conv2d: bias must have shape [out_channels]");
  }
  const auto g = detail::conv2d_geometry(h, w, kh, kw, stride, padding);
  const std::size_t rows = batch * g.out_h * g.out_w;
  const std::size_t patch = kh * kw * cin;
  auto cols = std::make_shared<std::vector<S>>(rows * patch);
  detail::im2col2d(x.raw(), batch, h, w, cin, kh, kw, stride, g.pad_h0,
                   g.pad_w0, g.out_h, g.out_w, cols->data());
  std::vector<S> y(rows * cout);
  detail::gemm_nn(cols->data(), kernel.raw(), y.data(), rows, patch, cout);
  if (bias) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < cout; ++i) y[r * cout + i] += bias->data()[i];
    }
  }
  auto out = TensorT<S>::from({batch, g.out_h, g.out_w, cout}, std::move(y));

  const bool need = x.requires_grad() || kernel.requires_grad() ||
                    (bias && bias->requires_grad());
  if (tape && need) {
    out.set_requires_grad(true);
    tape->record([x, kernel, bias, out, cols, g, batch, h, w, cin, kh, kw,
                  cout, stride, rows, patch]() mutable {
      const S* dy = out.grad().data();
      if (kernel.requires_grad()) {
        detail::gemm_tn(cols->data(), dy, kernel.grad().data(), patch, rows,
                        cout, true);
      }
      if (bias && bias->requires_grad()) {
        auto gb = bias->grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t i = 0; i < cout; ++i) gb[i] += dy[r * cout + i];
        }
      }
      if (x.requires_grad()) {
        std::vector<S> dcols(rows * patch);
        detail::gemm_nt(dy, kernel.raw(), dcols.data(), rows, cout, patch);
        detail::col2im2d(dcols.data(), batch, h, w, cin, kh, kw, stride,
                         g.pad_h0, g.pad_w0, g.out_h, g.out_w,
                         x.grad().data());
      }
    });
  }
  return out;
}

namespace detail {

// Kernel [kh,kw,Cin,Cout] repacked to [Cin, kh*kw*Cout] for the transposed
// convolution's per-pixel matmul.
template <typename S>
std::vector<S> repack_convt_kernel(const TensorT<S>& k) {
  const std::size_t kh = k.dim(0), kw = k.dim(1), cin = k.dim(2),
                    cout = k.dim(3);
  std::vector<S> packed(cin * kh * kw * cout);
  for (std::size_t q = 0; q < kh * kw; ++q) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const S* src = k.raw() + (q * cin + ci) * cout;
      S* dst = packed.data() + ci * (kh * kw * cout) + q * cout;
      std::copy(src, src + cout, dst);
    }
  }
  return packed;
}

}  // namespace detail

// Fractionally-strided convolution used for upsampling: output spatial dims
// are exactly input * stride (kernel 5, stride 2 doubles each side).
// input [B,H,W,Cin], kernel [kh,kw,Cin,Cout] -> [B,H*stride,W*stride,Cout]
template <typename S>
TensorT<S> conv2d_transpose(const TensorT<S>& x, const TensorT<S>& kernel,
                            std::size_t stride, TapeT<S>* tape = nullptr) {
  if (x.rank() != 4 || kernel.rank() != 4) {
    throw ShapeError("conv2d_transpose: expects input rank 4, kernel rank 4");
  }
  if (stride == 0) {
    throw ContractError("conv2d_transpose: stride must be positive");
  }
  const std::size_t batch = x.dim(0), h = x.dim(1), w = x.dim(2),
                    cin = x.dim(3);
  const std::size_t kh = kernel.dim(0), kw = kernel.dim(1),
                    cout = kernel.dim(3);
  if (kernel.dim(2) != cin) {
    throw ShapeError("conv2d_transpose: channel mismatch, input has " +
                     std::to_string(cin) + ", kernel expects " +
                     std::to_string(kernel.dim(2)));
  }
  if (kh < stride || kw < stride) {
    throw ShapeError("conv2d_transpose: kernel smaller than stride cannot "
                     "cover the output");
  }
  const std::size_t out_h = h * stride, out_w = w * stride;
  // Geometry of the conv this op is the adjoint of (same padding, mapping
  // [out_h] -> [h]): total pad k - stride, split low/high.
  const std::size_t pad_h0 = (kh - stride) / 2;
  const std::size_t pad_w0 = (kw - stride) / 2;
  const std::size_t rows = batch * h * w;
  const std::size_t patch = kh * kw * cout;

  const std::vector<S> packed = detail::repack_convt_kernel(kernel);
  std::vector<S> cols(rows * patch);
  detail::gemm_nn(x.raw(), packed.data(), cols.data(), rows, cin, patch);
  std::vector<S> y(batch * out_h * out_w * cout, S(0));
  detail::col2im2d(cols.data(), batch, out_h, out_w, cout, kh, kw, stride,
                   pad_h0, pad_w0, h, w, y.data());
  auto out = TensorT<S>::from({batch, out_h, out_w, cout}, std::move(y));

  if (tape && (x.requires_grad() || kernel.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([x, kernel, out, batch, h, w, cin, kh, kw, cout, stride,
                  out_h, out_w, pad_h0, pad_w0, rows, patch]() mutable {
      std::vector<S> dcols(rows * patch);
      detail::im2col2d(out.grad().data(), batch, out_h, out_w, cout, kh, kw,
                       stride, pad_h0, pad_w0, h, w, dcols.data());
      if (x.requires_grad()) {
        const std::vector<S> packed = detail::repack_convt_kernel(kernel);
        detail::gemm_nt(dcols.data(), packed.data(), x.grad().data(), rows,
                        patch, cin, true);
      }
      if (kernel.requires_grad()) {
        std::vector<S> dpacked(cin * patch);
        detail::gemm_tn(x.raw(), dcols.data(), dpacked.data(), cin, rows,
                        patch);
        auto gk = kernel.grad();
        for (std::size_t q = 0; q < kh * kw; ++q) {
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const S* src = dpacked.data() + ci * patch + q * cout;
            S* dst = gk.data() + (q * cin + ci) * cout;
            for (std::size_t i = 0; i < cout; ++i) dst[i] += src[i];
          }
        }
      }
    });
  }
  return out;
}

// input [B,H,W,D,Cin], kernel [k,k,k,Cin,Cout], stride 1, valid padding.
template <typename S>
TensorT<S> conv3d(const TensorT<S>& x, const TensorT<S>& kernel,
                  const TensorT<S>& bias, TapeT<S>* tape = nullptr) {
  if (x.rank() != 5 || kernel.rank() != 5) {
    throw ShapeError("conv3d: expects input rank 5 and kernel rank 5");
  }
  const std::size_t batch = x.dim(0), h = x.dim(1), w = x.dim(2), d = x.dim(3),
                    cin = x.dim(4);
  const std::size_t k0 = kernel.dim(0), k1 = kernel.dim(1), k2 = kernel.dim(2),
                    cout = kernel.dim(4);
  if (kernel.dim(3) != cin) {
    throw ShapeError("conv3d: channel mismatch, input has " +
                     std::to_string(cin) + ", kernel expects " +
                     std::to_string(kernel.dim(3)));
  }
  if (h < k0 || w < k1 || d < k2) {
    throw ShapeError("conv3d: input " + shape_str(x.shape()) +
                     " smaller than kernel");
  }
  if (bias.rank() != 1 || bias.dim(0) != cout) {
    throw ShapeError("conv3d: bias must have shape [out_channels]");
  }
  const std::size_t oh = h - k0 + 1, ow = w - k1 + 1, od = d - k2 + 1;
  const std::size_t rows = batch * oh * ow * od;
  const std::size_t patch = k0 * k1 * k2 * cin;
  auto cols = std::make_shared<std::vector<S>>(rows * patch);
  detail::im2col3d(x.raw(), batch, h, w, d, cin, k0, k1, k2, oh, ow, od,
                   cols->data());
  std::vector<S> y(rows * cout);
  detail::gemm_nn(cols->data(), kernel.raw(), y.data(), rows, patch, cout);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < cout; ++i) y[r * cout + i] += bias.data()[i];
  }
  auto out = TensorT<S>::from({batch, oh, ow, od, cout}, std::move(y));

  const bool need =
      x.requires_grad() || kernel.requires_grad() || bias.requires_grad();
  if (tape && need) {
    out.set_requires_grad(true);
    tape->record([x, kernel, bias, out, cols, batch, h, w, d, cin, k0, k1, k2,
                  cout, oh, ow, od, rows, patch]() mutable {
      const S* dy = out.grad().data();
      if (kernel.requires_grad()) {
        detail::gemm_tn(cols->data(), dy, kernel.grad().data(), patch, rows,
                        cout, true);
      }
      if (bias.requires_grad()) {
        auto gb = bias.grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t i = 0; i < cout; ++i) gb[i] += dy[r * cout + i];
        }
      }
      if (x.requires_grad()) {
        std::vector<S> dcols(rows * patch);
        detail::gemm_nt(dy, kernel.raw(), dcols.data(), rows, cout, patch);
        detail::col2im3d(dcols.data(), batch, h, w, d, cin, k0, k1, k2, oh, ow,
                         od, x.grad().data());
      }
    });
  }
  return out;
}

// Non-overlapping 2x2x2 max pooling; trailing odd slices are dropped.
// Gradient routes to the argmax position of each window.
template <typename S>
TensorT<S> maxpool3d(const TensorT<S>& x, TapeT<S>* tape = nullptr) {
  if (x.rank() != 5) throw ShapeError("maxpool3d: expects input rank 5");
  const std::size_t batch = x.dim(0), h = x.dim(1), w = x.dim(2), d = x.dim(3),
                    c = x.dim(4);
  if (h < 2 || w < 2 || d < 2) {
    throw ShapeError("maxpool3d: every spatial dim must be >= 2, got " +
                     shape_str(x.shape()));
  }
  const std::size_t oh = h / 2, ow = w / 2, od = d / 2;
  std::vector<S> y(batch * oh * ow * od * c);
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(y.size());
  const S* xd = x.raw();
  std::size_t o = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        for (std::size_t oz = 0; oz < od; ++oz) {
          for (std::size_t i = 0; i < c; ++i, ++o) {
            S best = -std::numeric_limits<S>::infinity();
            std::size_t best_idx = 0;
            for (std::size_t dy = 0; dy < 2; ++dy) {
              for (std::size_t dx = 0; dx < 2; ++dx) {
                for (std::size_t dz = 0; dz < 2; ++dz) {
                  const std::size_t idx =
                      ((((b * h + 2 * oy + dy) * w + 2 * ox + dx) * d +
                        2 * oz + dz)) *
                          c +
                      i;
                  if (xd[idx] > best) {
                    best = xd[idx];
                    best_idx = idx;
                  }
                }
              }
            }
            y[o] = best;
            (*argmax)[o] = static_cast<std::uint32_t>(best_idx);
          }
        }
      }
    }
  }
  auto out = TensorT<S>::from({batch, oh, ow, od, c}, std::move(y));
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    tape->record([x, out, argmax]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[(*argmax)[i]] += g[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batch normalization over all non-channel axes (channels last)
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> batchnorm(const TensorT<S>& x, const TensorT<S>& gamma,
                     const TensorT<S>& beta, TensorT<S>& running_mean,
                     TensorT<S>& running_var, double momentum, double epsilon,
                     bool training, TapeT<S>* tape = nullptr) {
  if (x.rank() < 2) throw ShapeError("batchnorm: expects rank >= 2 input");
  const std::size_t c = x.shape().back();
  if (gamma.size() != c || beta.size() != c || running_mean.size() != c ||
      running_var.size() != c) {
    throw ShapeError("batchnorm: per-channel parameters must have length " +
                     std::to_string(c));
  }
  const std::size_t rows = x.size() / c;
  if (training && x.dim(0) < 2) {
    throw ContractError("batchnorm: training mode needs batch >= 2");
  }

  auto xhat = std::make_shared<std::vector<S>>(x.size());
  auto inv_std = std::make_shared<std::vector<S>>(c);
  if (training) {
    std::vector<S> mean(c, S(0)), var(c, S(0));
    const S* xd = x.raw();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < c; ++i) mean[i] += xd[r * c + i];
    }
    for (std::size_t i = 0; i < c; ++i) mean[i] /= S(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < c; ++i) {
        const S dlt = xd[r * c + i] - mean[i];
        var[i] += dlt * dlt;
      }
    }
    for (std::size_t i = 0; i < c; ++i) var[i] /= S(rows);
    for (std::size_t i = 0; i < c; ++i) {
      (*inv_std)[i] = S(1) / std::sqrt(var[i] + S(epsilon));
    }
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < c; ++i) {
        (*xhat)[r * c + i] = (xd[r * c + i] - mean[i]) * (*inv_std)[i];
      }
    }
    auto rm = running_mean.data();
    auto rv = running_var.data();
    for (std::size_t i = 0; i < c; ++i) {
      rm[i] = S(momentum) * rm[i] + S(1.0 - momentum) * mean[i];
      rv[i] = S(momentum) * rv[i] + S(1.0 - momentum) * var[i];
    }
  } else {
    for (std::size_t i = 0; i < c; ++i) {
      (*inv_std)[i] =
          S(1) / std::sqrt(running_var.data()[i] + S(epsilon));
    }
    const S* xd = x.raw();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < c; ++i) {
        (*xhat)[r * c + i] =
            (xd[r * c + i] - running_mean.data()[i]) * (*inv_std)[i];
      }
    }
  }

  std::vector<S> y(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < c; ++i) {
      y[r * c + i] = gamma.data()[i] * (*xhat)[r * c + i] + beta.data()[i];
    }
  }
  auto out = TensorT<S>::from(x.shape(), std::move(y));

  const bool need =
      x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  if (tape && need) {
    out.set_requires_grad(true);
    tape->record([x, gamma, beta, out, xhat, inv_std, rows, c,
                  training]() mutable {
      auto g = out.grad();
      std::vector<S> sum_dy(c, S(0)), sum_dy_xhat(c, S(0));
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < c; ++i) {
          sum_dy[i] += g[r * c + i];
          sum_dy_xhat[i] += g[r * c + i] * (*xhat)[r * c + i];
        }
      }
      if (gamma.requires_grad()) {
        auto gg = gamma.grad();
        for (std::size_t i = 0; i < c; ++i) gg[i] += sum_dy_xhat[i];
      }
      if (beta.requires_grad()) {
        auto gb = beta.grad();
        for (std::size_t i = 0; i < c; ++i) gb[i] += sum_dy[i];
      }
      if (x.requires_grad()) {
        auto gx = x.grad();
        if (training) {
          const S n = S(rows);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t i = 0; i < c; ++i) {
              const S term = g[r * c + i] - sum_dy[i] / n -
                             (*xhat)[r * c + i] * sum_dy_xhat[i] / n;
              gx[r * c + i] += gamma.data()[i] * (*inv_std)[i] * term;
            }
          }
        } else {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t i = 0; i < c; ++i) {
              gx[r * c + i] +=
                  g[r * c + i] * gamma.data()[i] * (*inv_std)[i];
            }
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions and losses
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> sum_all(const TensorT<S>& x, TapeT<S>* tape = nullptr) {
  S total = S(0);
  for (S v : x.data()) total += v;
  auto out = TensorT<S>::scalar(total);
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    tape->record([x, out]() mutable {
      const S g = out.grad()[0];
      auto gx = x.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  }
  return out;
}

template <typename S>
TensorT<S> mean_all(const TensorT<S>& x, TapeT<S>* tape = nullptr) {
  S total = S(0);
  for (S v : x.data()) total += v;
  const S n = S(x.size());
  auto out = TensorT<S>::scalar(total / n);
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    tape->record([x, out, n]() mutable {
      const S g = out.grad()[0] / n;
      auto gx = x.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  }
  return out;
}

// Mean binary cross-entropy between predicted probabilities and targets.
// Probabilities are clamped away from {0,1}; the gradient is exactly zero in
// the clamped region. Targets are treated as constants.
template <typename S>
TensorT<S> bce_loss(const TensorT<S>& p, const TensorT<S>& target,
                    TapeT<S>* tape = nullptr) {
  if (p.shape() != target.shape()) {
    throw ShapeError("bce_loss: shape mismatch " + shape_str(p.shape()) +
                     " vs " + shape_str(target.shape()));
  }
  const S eps = S(1e-7);
  const std::size_t n = p.size();
  S total = S(0);
  for (std::size_t i = 0; i < n; ++i) {
    const S pc = std::clamp(p.data()[i], eps, S(1) - eps);
    const S t = target.data()[i];
    total -= t * std::log(pc) + (S(1) - t) * std::log(S(1) - pc);
  }
  auto out = TensorT<S>::scalar(total / S(n));
  if (tape && p.requires_grad()) {
    out.set_requires_grad(true);
    tape->record([p, target, out, eps, n]() mutable {
      const S g = out.grad()[0] / S(n);
      auto gp = p.grad();
      for (std::size_t i = 0; i < n; ++i) {
        const S v = p.data()[i];
        if (v <= eps || v >= S(1) - eps) continue;
        const S t = target.data()[i];
        gp[i] += g * (v - t) / (v * (S(1) - v));
      }
    });
  }
  return out;
}

// Mean cross-entropy of probability rows [B,C] against one-hot targets.
template <typename S>
TensorT<S> cross_entropy_loss(const TensorT<S>& probs, const TensorT<S>& onehot,
                              TapeT<S>* tape = nullptr) {
  if (probs.rank() != 2 || probs.shape() != onehot.shape()) {
    throw ShapeError("cross_entropy_loss: expects matching rank-2 shapes");
  }
  const S eps = S(1e-7);
  const std::size_t batch = probs.dim(0);
  S total = S(0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const S t = onehot.data()[i];
    if (t != S(0)) total -= t * std::log(std::max(probs.data()[i], eps));
  }
  auto out = TensorT<S>::scalar(total / S(batch));
  if (tape && probs.requires_grad()) {
    out.set_requires_grad(true);
    tape->record([probs, onehot, out, eps, batch]() mutable {
      const S g = out.grad()[0] / S(batch);
      auto gp = probs.grad();
      for (std::size_t i = 0; i < probs.size(); ++i) {
        const S t = onehot.data()[i];
        if (t == S(0)) continue;
        const S v = probs.data()[i];
        if (v <= eps) continue;
        gp[i] += -g * t / v;
      }
    });
  }
  return out;
}

}  // namespace volgan
