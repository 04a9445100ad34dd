#pragma once

#include <string>
#include <vector>

#include "volgan/common.hpp"
#include "volgan/ops.hpp"
#include "volgan/tensor.hpp"

namespace volgan {

enum class LayerKind {
  dense,
  batchnorm,
  leaky_relu,
  relu,
  reshape,
  conv2d,
  conv2d_transpose,
  conv3d,
  maxpool3d,
  dropout,
  flatten,
  softmax,
  sigmoid,
  tanh,
};

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::leaky_relu: return "leaky_relu";
    case LayerKind::relu: return "relu";
    case LayerKind::reshape: return "reshape";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::conv2d_transpose: return "conv2d_transpose";
    case LayerKind::conv3d: return "conv3d";
    case LayerKind::maxpool3d: return "maxpool3d";
    case LayerKind::dropout: return "dropout";
    case LayerKind::flatten: return "flatten";
    case LayerKind::softmax: return "softmax";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::tanh: return "tanh";
  }
  return "?";
}

// One layer of a sequential model. Only the fields relevant to `kind` are
// meaningful; validate() checks they are complete.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t units = 0;        // dense output width
  std::size_t filters = 0;      // conv output channels
  std::size_t kernel = 0;       // conv kernel side
  std::size_t stride = 1;       // conv2d / conv2d_transpose
  Padding padding = Padding::valid;
  float alpha = 0.2f;           // leaky_relu slope
  float rate = 0.3f;            // dropout rate
  float bn_momentum = 0.9f;
  float bn_epsilon = 1e-5f;
  Shape target_shape;           // reshape target (per sample, no batch dim)
  bool has_bias = true;

  static LayerSpec Dense(std::size_t units, bool bias = true) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.units = units;
    s.has_bias = bias;
    return s;
  }
  static LayerSpec BatchNorm() {
    LayerSpec s;
    s.kind = LayerKind::batchnorm;
    return s;
  }
  static LayerSpec LeakyRelu(float alpha = 0.2f) {
    LayerSpec s;
    s.kind = LayerKind::leaky_relu;
    s.alpha = alpha;
    return s;
  }
  static LayerSpec Relu() {
    LayerSpec s;
    s.kind = LayerKind::relu;
    return s;
  }
  static LayerSpec Reshape(Shape target) {
    LayerSpec s;
    s.kind = LayerKind::reshape;
    s.target_shape = std::move(target);
    return s;
  }
  static LayerSpec Conv2d(std::size_t kernel, std::size_t filters,
                          std::size_t stride, Padding padding,
                          bool bias = true) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.kernel = kernel;
    s.filters = filters;
    s.stride = stride;
    s.padding = padding;
    s.has_bias = bias;
    return s;
  }
  static LayerSpec Conv2dTranspose(std::size_t kernel, std::size_t filters,
                                   std::size_t stride) {
    LayerSpec s;
    s.kind = LayerKind::conv2d_transpose;
    s.kernel = kernel;
    s.filters = filters;
    s.stride = stride;
    s.has_bias = false;
    return s;
  }
  static LayerSpec Conv3d(std::size_t filters, std::size_t kernel = 3) {
    LayerSpec s;
    s.kind = LayerKind::conv3d;
    s.kernel = kernel;
    s.filters = filters;
    return s;
  }
  static LayerSpec MaxPool3d() {
    LayerSpec s;
    s.kind = LayerKind::maxpool3d;
    return s;
  }
  static LayerSpec Dropout(float rate = 0.3f) {
    LayerSpec s;
    s.kind = LayerKind::dropout;
    s.rate = rate;
    return s;
  }
  static LayerSpec Flatten() {
    LayerSpec s;
    s.kind = LayerKind::flatten;
    return s;
  }
  static LayerSpec Softmax() {
    LayerSpec s;
    s.kind = LayerKind::softmax;
    return s;
  }
  static LayerSpec Sigmoid() {
    LayerSpec s;
    s.kind = LayerKind::sigmoid;
    return s;
  }
  static LayerSpec Tanh() {
    LayerSpec s;
    s.kind = LayerKind::tanh;
    return s;
  }

  void validate() const {
    switch (kind) {
      case LayerKind::dense:
        if (units == 0) throw ConfigError("dense layer needs units > 0");
        break;
      case LayerKind::conv2d:
      case LayerKind::conv2d_transpose:
        if (kernel == 0 || filters == 0 || stride == 0) {
          throw ConfigError(std::string(layer_kind_name(kind)) +
                            " layer needs kernel, filters and stride > 0");
        }
        break;
      case LayerKind::conv3d:
        if (kernel == 0 || filters == 0) {
          throw ConfigError("conv3d layer needs kernel and filters > 0");
        }
        break;
      case LayerKind::dropout:
        if (rate < 0.0f || rate >= 1.0f) {
          throw ConfigError("dropout rate must be in [0, 1)");
        }
        break;
      case LayerKind::reshape:
        if (target_shape.empty()) {
          throw ConfigError("reshape layer needs a target shape");
        }
        for (std::size_t d : target_shape) {
          if (d == 0) throw ConfigError("reshape target has a zero dim");
        }
        break;
      default:
        break;
    }
  }
};

}  // namespace volgan
