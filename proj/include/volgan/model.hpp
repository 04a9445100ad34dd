#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "volgan/common.hpp"
#include "volgan/layers.hpp"
#include "volgan/ops.hpp"
#include "volgan/tape.hpp"
#include "volgan/tensor.hpp"

namespace volgan {

enum class ModelKind : std::uint32_t {
  custom = 0,
  generator = 1,
  discriminator = 2,
  classifier = 3,
};

// Whether batch-norm layers account for their running statistics. The fixed
// convention here is 4 tensors per channel (gamma, beta, running mean,
// running variance); with it disabled only the learned pair is counted.
struct ParamCountConvention {
  bool batchnorm_counts_running_stats = true;
};

// Per-sample output shape of every layer, in order. Throws ShapeError naming
// the first incompatible layer.
inline std::vector<Shape> infer_shapes(const std::vector<LayerSpec>& layers,
                                       const Shape& input_shape) {
  std::vector<Shape> out;
  out.reserve(layers.size());
  Shape cur = input_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    l.validate();
    auto fail = [&](const std::string& why) {
      throw ShapeError("layer " + std::to_string(i) + " (" +
                       layer_kind_name(l.kind) + "): " + why + "; input " +
                       shape_str(cur));
    };
    switch (l.kind) {
      case LayerKind::dense:
        if (cur.size() != 1) fail("expects a flat feature vector");
        cur = {l.units};
        break;
      case LayerKind::batchnorm:
      case LayerKind::leaky_relu:
      case LayerKind::relu:
      case LayerKind::dropout:
      case LayerKind::softmax:
      case LayerKind::sigmoid:
      case LayerKind::tanh:
        if (cur.empty()) fail("expects rank >= 1");
        break;
      case LayerKind::reshape:
        if (shape_numel(cur) != shape_numel(l.target_shape)) {
          fail("element count mismatch with target " +
               shape_str(l.target_shape));
        }
        cur = l.target_shape;
        break;
      case LayerKind::flatten:
        if (cur.empty()) fail("expects rank >= 1");
        cur = {shape_numel(cur)};
        break;
      case LayerKind::conv2d: {
        if (cur.size() != 3) fail("expects [h,w,c] input");
        if (l.padding == Padding::valid &&
            (cur[0] < l.kernel || cur[1] < l.kernel)) {
          fail("input smaller than kernel");
        }
        const auto geom = detail::conv2d_geometry(cur[0], cur[1], l.kernel,
                                                  l.kernel, l.stride,
                                                  l.padding);
        cur = {geom.out_h, geom.out_w, l.filters};
        break;
      }
      case LayerKind::conv2d_transpose:
        if (cur.size() != 3) fail("expects [h,w,c] input");
        if (l.kernel < l.stride) fail("kernel must be >= stride");
        cur = {cur[0] * l.stride, cur[1] * l.stride, l.filters};
        break;
      case LayerKind::conv3d:
        if (cur.size() != 4) fail("expects [h,w,d,c] input");
        if (cur[0] < l.kernel || cur[1] < l.kernel || cur[2] < l.kernel) {
          fail("input smaller than kernel");
        }
        cur = {cur[0] - l.kernel + 1, cur[1] - l.kernel + 1,
               cur[2] - l.kernel + 1, l.filters};
        break;
      case LayerKind::maxpool3d:
        if (cur.size() != 4) fail("expects [h,w,d,c] input");
        if (cur[0] < 2 || cur[1] < 2 || cur[2] < 2) {
          fail("every spatial dim must be >= 2");
        }
        cur = {cur[0] / 2, cur[1] / 2, cur[2] / 2, cur[3]};
        break;
    }
    out.push_back(cur);
  }
  return out;
}

struct LayerParams {
  std::map<std::string, Tensor> named;
};

// Sequential model: layer specs, per-sample shape trace, and per-layer
// parameter tensors. Copies share parameter storage (handle semantics), so a
// trainer mutating its model is visible through every handle to it.
struct ModelGraph {
  ModelKind kind = ModelKind::custom;
  Shape input_shape;
  std::vector<LayerSpec> layers;
  std::vector<Shape> output_shapes;
  std::vector<LayerParams> params;

  Shape output_shape() const {
    return output_shapes.empty() ? input_shape : output_shapes.back();
  }

  // Parameters the optimizer updates, in a fixed (layer, name) order.
  std::vector<Tensor> trainable_params() {
    std::vector<Tensor> out;
    for (auto& layer : params) {
      for (auto& [name, tensor] : layer.named) {
        if (name == "running_mean" || name == "running_var") continue;
        out.push_back(tensor);
      }
    }
    return out;
  }

  std::vector<Tensor> all_params() {
    std::vector<Tensor> out;
    for (auto& layer : params) {
      for (auto& [name, tensor] : layer.named) out.push_back(tensor);
    }
    return out;
  }
};

inline std::size_t layer_param_count(const LayerSpec& l, const Shape& in,
                                     const ParamCountConvention& conv) {
  switch (l.kind) {
    case LayerKind::dense:
      return in[0] * l.units + (l.has_bias ? l.units : 0);
    case LayerKind::batchnorm:
      return (conv.batchnorm_counts_running_stats ? 4 : 2) * in.back();
    case LayerKind::conv2d:
    case LayerKind::conv2d_transpose:
      return l.kernel * l.kernel * in[2] * l.filters +
             (l.has_bias ? l.filters : 0);
    case LayerKind::conv3d:
      return l.kernel * l.kernel * l.kernel * in[3] * l.filters +
             (l.has_bias ? l.filters : 0);
    default:
      return 0;
  }
}

struct ParamCountReport {
  std::vector<std::size_t> per_layer;
  std::size_t total = 0;
};

inline ParamCountReport count_params(const ModelGraph& model,
                                     const ParamCountConvention& conv = {}) {
  ParamCountReport report;
  Shape in = model.input_shape;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const std::size_t n = layer_param_count(model.layers[i], in, conv);
    report.per_layer.push_back(n);
    report.total += n;
    in = model.output_shapes[i];
  }
  return report;
}

namespace detail {

inline float trunc_normal(Rng& rng, float stddev) {
  double z = rng.next_normal();
  while (std::abs(z) > 2.0) z = rng.next_normal();
  return static_cast<float>(z * stddev);
}

inline Tensor init_weight(const Shape& shape, Rng& rng, float stddev = 0.02f) {
  std::vector<float> v(shape_numel(shape));
  for (auto& x : v) x = trunc_normal(rng, stddev);
  auto t = Tensor::from(shape, std::move(v));
  t.set_requires_grad(true);
  return t;
}

inline Tensor init_const(const Shape& shape, float value, bool trainable) {
  auto t = Tensor::full(shape, value);
  t.set_requires_grad(trainable);
  return t;
}

}  // namespace detail

// (Re)allocates and initializes every parameter tensor. Weights draw from a
// truncated normal (|z| <= 2 sigma, sigma = 0.02); batch-norm starts at
// identity. Same seed, same model -> identical parameters.
inline void init_params(ModelGraph& model, std::uint64_t seed) {
  model.params.assign(model.layers.size(), LayerParams{});
  Shape in = model.input_shape;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& l = model.layers[i];
    auto& p = model.params[i].named;
    auto rng_for = [&](const char* name) {
      return Rng(hash_str(hash_combine(seed, i), name));
    };
    switch (l.kind) {
      case LayerKind::dense: {
        Rng rng = rng_for("weight");
        p["weight"] = detail::init_weight({in[0], l.units}, rng);
        if (l.has_bias) p["bias"] = detail::init_const({l.units}, 0.0f, true);
        break;
      }
      case LayerKind::conv2d:
      case LayerKind::conv2d_transpose: {
        Rng rng = rng_for("kernel");
        p["kernel"] =
            detail::init_weight({l.kernel, l.kernel, in[2], l.filters}, rng);
        if (l.has_bias) {
          p["bias"] = detail::init_const({l.filters}, 0.0f, true);
        }
        break;
      }
      case LayerKind::conv3d: {
        Rng rng = rng_for("kernel");
        p["kernel"] = detail::init_weight(
            {l.kernel, l.kernel, l.kernel, in[3], l.filters}, rng);
        if (l.has_bias) {
          p["bias"] = detail::init_const({l.filters}, 0.0f, true);
        }
        break;
      }
      case LayerKind::batchnorm: {
        const std::size_t c = in.back();
        p["gamma"] = detail::init_const({c}, 1.0f, true);
        p["beta"] = detail::init_const({c}, 0.0f, true);
        p["running_mean"] = detail::init_const({c}, 0.0f, false);
        p["running_var"] = detail::init_const({c}, 1.0f, false);
        break;
      }
      default:
        break;
    }
    in = model.output_shapes[i];
  }
}

inline ModelGraph make_model(ModelKind kind, Shape input_shape,
                             std::vector<LayerSpec> layers,
                             std::uint64_t seed = 0) {
  ModelGraph m;
  m.kind = kind;
  m.input_shape = std::move(input_shape);
  m.layers = std::move(layers);
  m.output_shapes = infer_shapes(m.layers, m.input_shape);
  init_params(m, seed);
  return m;
}

// Runs the model on a batch ([batch, per-sample dims...]). Dropout draws a
// mask from hash(dropout_seed, layer index) in training mode; batch norm
// switches between batch and running statistics.
inline Tensor forward_model(ModelGraph& model, const Tensor& input,
                            bool training, Tape* tape = nullptr,
                            std::uint64_t dropout_seed = 0) {
  if (input.rank() != model.input_shape.size() + 1) {
    throw ShapeError("forward: input rank " + std::to_string(input.rank()) +
                     " does not match model input " +
                     shape_str(model.input_shape) + " plus batch dim");
  }
  for (std::size_t i = 0; i < model.input_shape.size(); ++i) {
    if (input.dim(i + 1) != model.input_shape[i]) {
      throw ShapeError("forward: input " + shape_str(input.shape()) +
                       " does not match model input " +
                       shape_str(model.input_shape));
    }
  }
  const std::size_t batch = input.dim(0);
  Tensor x = input;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& l = model.layers[i];
    auto& p = model.params[i].named;
    switch (l.kind) {
      case LayerKind::dense: {
        x = matmul(x, p.at("weight"), tape);
        if (l.has_bias) x = bias_add(x, p.at("bias"), tape);
        break;
      }
      case LayerKind::batchnorm: {
        Tensor rm = p.at("running_mean");
        Tensor rv = p.at("running_var");
        x = batchnorm(x, p.at("gamma"), p.at("beta"), rm, rv,
                      double(l.bn_momentum), double(l.bn_epsilon), training,
                      tape);
        break;
      }
      case LayerKind::leaky_relu:
        x = leaky_relu(x, l.alpha, tape);
        break;
      case LayerKind::relu:
        x = relu(x, tape);
        break;
      case LayerKind::reshape: {
        Shape target{batch};
        target.insert(target.end(), l.target_shape.begin(),
                      l.target_shape.end());
        x = reshape(x, target, tape);
        break;
      }
      case LayerKind::conv2d: {
        std::optional<Tensor> bias;
        if (l.has_bias) bias = p.at("bias");
        x = conv2d(x, p.at("kernel"), l.stride, l.padding, bias, tape);
        break;
      }
      case LayerKind::conv2d_transpose:
        x = conv2d_transpose(x, p.at("kernel"), l.stride, tape);
        break;
      case LayerKind::conv3d:
        x = conv3d(x, p.at("kernel"), p.at("bias"), tape);
        break;
      case LayerKind::maxpool3d:
        x = maxpool3d(x, tape);
        break;
      case LayerKind::dropout:
        x = dropout(x, double(l.rate), training, hash_combine(dropout_seed, i),
                    tape);
        break;
      case LayerKind::flatten:
        x = flatten(x, tape);
        break;
      case LayerKind::softmax:
        x = softmax(x, tape);
        break;
      case LayerKind::sigmoid:
        x = sigmoid(x, tape);
        break;
      case LayerKind::tanh:
        x = tanh_act(x, tape);
        break;
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// Architecture builders
// ---------------------------------------------------------------------------

struct GeneratorConfig {
  std::size_t noise_dim = 500;
  std::size_t image_size = 64;   // output side; must be divisible by 4
  std::size_t base_channels = 256;
  float leaky_alpha = 0.2f;
};

// Upsampling generator: dense stem, reshape to a (size/4)^2 feature map,
// then two stride-2 transposed convolutions up to a single-channel tanh
// image. At the defaults the layer widths and parameter counts match the
// published 64x64 configuration exactly.
inline ModelGraph build_generator(const GeneratorConfig& cfg = {},
                                  std::uint64_t seed = 0) {
  if (cfg.image_size % 4 != 0 || cfg.image_size < 8) {
    throw ConfigError("generator image_size must be a multiple of 4, >= 8");
  }
  if (cfg.base_channels % 4 != 0) {
    throw ConfigError("generator base_channels must be divisible by 4");
  }
  const std::size_t stem = cfg.image_size / 4;
  std::vector<LayerSpec> layers = {
      LayerSpec::Dense(4 * cfg.base_channels, /*bias=*/false),
      LayerSpec::BatchNorm(),
      LayerSpec::LeakyRelu(cfg.leaky_alpha),
      LayerSpec::Dense(stem * stem * cfg.base_channels, /*bias=*/true),
      LayerSpec::LeakyRelu(cfg.leaky_alpha),
      LayerSpec::Reshape({stem, stem, cfg.base_channels}),
      LayerSpec::Conv2dTranspose(5, cfg.base_channels / 4, 2),
      LayerSpec::BatchNorm(),
      LayerSpec::LeakyRelu(cfg.leaky_alpha),
      LayerSpec::Conv2dTranspose(5, 1, 2),
      LayerSpec::Tanh(),
  };
  return make_model(ModelKind::generator, {cfg.noise_dim}, std::move(layers),
                    seed);
}

inline ModelGraph build_generator(std::size_t noise_dim,
                                  std::uint64_t seed = 0) {
  GeneratorConfig cfg;
  cfg.noise_dim = noise_dim;
  return build_generator(cfg, seed);
}

struct DiscriminatorConfig {
  std::size_t image_size = 64;
  std::size_t base_channels = 64;
  float dropout_rate = 0.3f;
  float leaky_alpha = 0.2f;
};

inline ModelGraph build_discriminator(const DiscriminatorConfig& cfg = {},
                                      std::uint64_t seed = 0) {
  if (cfg.image_size % 4 != 0 || cfg.image_size < 8) {
    throw ConfigError("discriminator image_size must be a multiple of 4, >= 8");
  }
  std::vector<LayerSpec> layers = {
      LayerSpec::Conv2d(5, cfg.base_channels, 2, Padding::same, true),
      LayerSpec::LeakyRelu(cfg.leaky_alpha),
      LayerSpec::Dropout(cfg.dropout_rate),
      LayerSpec::Conv2d(5, 2 * cfg.base_channels, 2, Padding::same, true),
      LayerSpec::LeakyRelu(cfg.leaky_alpha),
      LayerSpec::Dropout(cfg.dropout_rate),
      LayerSpec::Flatten(),
      LayerSpec::Dense(64),
      LayerSpec::Dense(64),
      LayerSpec::Dense(1),
      LayerSpec::Sigmoid(),
  };
  return make_model(ModelKind::discriminator, {cfg.image_size, cfg.image_size, 1},
                    std::move(layers), seed);
}

struct ClassifierConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t depth = 22;
  std::size_t filters = 64;
  std::size_t dense1 = 1024;
  std::size_t dense2 = 256;
  std::size_t classes = 2;
};

// 3-D CNN over [h,w,depth,1] stacks. The three-block layout matches the
// published 32x32x22 configuration; for smaller inputs where that layout
// cannot fit, a two-conv variant with a single pooling stage is used.
inline ModelGraph build_classifier(const ClassifierConfig& cfg = {},
                                   std::uint64_t seed = 0) {
  const Shape input = {cfg.height, cfg.width, cfg.depth, 1};
  std::vector<LayerSpec> full = {
      LayerSpec::Conv3d(cfg.filters),
      LayerSpec::Relu(),
      LayerSpec::MaxPool3d(),
      LayerSpec::BatchNorm(),
      LayerSpec::Conv3d(cfg.filters),
      LayerSpec::Relu(),
      LayerSpec::MaxPool3d(),
      LayerSpec::BatchNorm(),
      LayerSpec::Conv3d(cfg.filters),
      LayerSpec::Relu(),
      LayerSpec::Flatten(),
      LayerSpec::Dense(cfg.dense1),
      LayerSpec::Relu(),
      LayerSpec::Dense(cfg.dense2),
      LayerSpec::Relu(),
      LayerSpec::Dense(cfg.classes),
      LayerSpec::Softmax(),
  };
  try {
    infer_shapes(full, input);
    return make_model(ModelKind::classifier, input, std::move(full), seed);
  } catch (const ShapeError&) {
    // compact variant for small desk-scale inputs
  }
  std::vector<LayerSpec> compact = {
      LayerSpec::Conv3d(cfg.filters),
      LayerSpec::Relu(),
      LayerSpec::MaxPool3d(),
      LayerSpec::BatchNorm(),
      LayerSpec::Conv3d(cfg.filters),
      LayerSpec::Relu(),
      LayerSpec::Flatten(),
      LayerSpec::Dense(cfg.dense1),
      LayerSpec::Relu(),
      LayerSpec::Dense(cfg.dense2),
      LayerSpec::Relu(),
      LayerSpec::Dense(cfg.classes),
      LayerSpec::Softmax(),
  };
  return make_model(ModelKind::classifier, input, std::move(compact), seed);
}

// ---------------------------------------------------------------------------
// Checkpoints: u32 version, u32 kind, u32 layer count, then per layer a u32
// parameter count followed by (name, tensor dump) entries in name order.
// Byte-stable for identical parameters.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(std::ostream& os, const ModelGraph& model) {
  detail::put_u32_le(os, kCheckpointVersion);
  detail::put_u32_le(os, static_cast<std::uint32_t>(model.kind));
  detail::put_u32_le(os, static_cast<std::uint32_t>(model.layers.size()));
  for (const auto& layer : model.params) {
    detail::put_u32_le(os, static_cast<std::uint32_t>(layer.named.size()));
    for (const auto& [name, tensor] : layer.named) {
      detail::put_u32_le(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), std::streamsize(name.size()));
      write_tensor_dump(os, tensor);
    }
  }
}

inline void save_checkpoint(const std::string& path, const ModelGraph& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  save_checkpoint(os, model);
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

// Loads parameter values into an already-built model of the same
// architecture; shapes and names must match exactly.
inline void load_checkpoint(std::istream& is, ModelGraph& model) {
  const std::uint32_t version = detail::get_u32_le(is);
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint version " + std::to_string(version) +
                  " unsupported");
  }
  const std::uint32_t kind = detail::get_u32_le(is);
  if (kind != static_cast<std::uint32_t>(model.kind)) {
    throw IoError("checkpoint model kind mismatch");
  }
  const std::uint32_t layer_count = detail::get_u32_le(is);
  if (layer_count != model.layers.size()) {
    throw IoError("checkpoint layer count mismatch");
  }
  for (auto& layer : model.params) {
    const std::uint32_t n = detail::get_u32_le(is);
    if (n != layer.named.size()) {
      throw IoError("checkpoint parameter count mismatch");
    }
    for (auto& [name, tensor] : layer.named) {
      const std::uint32_t len = detail::get_u32_le(is);
      std::string got(len, '\0');
      is.read(got.data(), len);
      if (!is || got != name) {
        throw IoError("checkpoint parameter name mismatch: expected " + name);
      }
      Tensor loaded = read_tensor_dump(is);
      if (loaded.shape() != tensor.shape()) {
        throw IoError("checkpoint parameter shape mismatch for " + name);
      }
      std::copy(loaded.data().begin(), loaded.data().end(),
                tensor.data().begin());
    }
  }
}

inline void load_checkpoint(const std::string& path, ModelGraph& model) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  load_checkpoint(is, model);
}

}  // namespace volgan
