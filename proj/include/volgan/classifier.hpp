#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "volgan/common.hpp"
#include "volgan/metrics.hpp"
#include "volgan/model.hpp"
#include "volgan/optim.hpp"
#include "volgan/volume.hpp"

namespace volgan {

enum class SampleProvenance { real, generated };

// Class index convention throughout the classifier: 0 = bipolar (positive),
// 1 = normal.
inline std::size_t class_index(Label label) {
  if (label == Label::bipolar) return 0;
  if (label == Label::normal) return 1;
  throw ContractError("class_index: sample must be labeled");
}

// One classifier-ready stack: [h, w, depth] grid in [-1, 1].
struct LabeledSample {
  std::vector<float> values;  // ((y * w + x) * depth + z)
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t depth = 0;
  Label label = Label::unlabeled;
  SampleProvenance provenance = SampleProvenance::real;
  std::string id;
};

// Converts a (resized) slice stack into a classifier sample. Phantom-derived
// stacks stand in for real scans, so everything that is not GAN-generated
// maps to the real side.
inline LabeledSample sample_from_stack(const SliceStack& s) {
  LabeledSample out;
  out.height = s.height;
  out.width = s.width;
  out.depth = s.count();
  out.label = s.label;
  out.provenance = s.provenance == Provenance::generated
                       ? SampleProvenance::generated
                       : SampleProvenance::real;
  out.id = s.id;
  out.values.resize(out.height * out.width * out.depth);
  for (std::size_t z = 0; z < out.depth; ++z) {
    const auto& grid = s.slices[z];
    for (std::size_t y = 0; y < out.height; ++y) {
      for (std::size_t x = 0; x < out.width; ++x) {
        out.values[(y * out.width + x) * out.depth + z] =
            grid[y * out.width + x];
      }
    }
  }
  return out;
}

struct ClassifierTrainConfig {
  int epochs = 100;
  int batch_size = 8;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  std::size_t filters = 64;
  std::size_t dense1 = 1024;
  std::size_t dense2 = 256;

  void validate() const {
    if (epochs < 1) throw ConfigError("classifier: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("classifier: batch_size must be >= 1");
  }
};

struct ClassifierTrainResult {
  ModelGraph model;
  std::vector<float> epoch_loss;
};

namespace detail {

inline Tensor samples_to_batch(const std::vector<const LabeledSample*>& batch) {
  const std::size_t h = batch[0]->height, w = batch[0]->width,
                    d = batch[0]->depth;
  std::vector<float> data;
  data.reserve(batch.size() * h * w * d);
  for (const auto* s : batch) {
    data.insert(data.end(), s->values.begin(), s->values.end());
  }
  return Tensor::from({batch.size(), h, w, d, 1}, std::move(data));
}

inline Tensor onehot_labels(const std::vector<const LabeledSample*>& batch) {
  std::vector<float> t(batch.size() * 2, 0.0f);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    t[i * 2 + class_index(batch[i]->label)] = 1.0f;
  }
  return Tensor::from({batch.size(), 2}, std::move(t));
}

// Consecutive chunks of `batch` indices; a trailing single sample is merged
// into the previous chunk so batch norm always sees at least two rows.
inline std::vector<std::vector<std::size_t>> make_batches(
    const std::vector<std::size_t>& order, std::size_t batch) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch) {
    const std::size_t end = std::min(order.size(), i + batch);
    out.emplace_back(order.begin() + i, order.begin() + end);
  }
  if (out.size() >= 2 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back()[0]);
    out.pop_back();
  }
  return out;
}

}  // namespace detail

// Softmax cross-entropy training with Adam. Deterministic per seed; returns
// the model plus the mean training loss per epoch.
inline ClassifierTrainResult train_classifier(
    const std::vector<LabeledSample>& train, const ClassifierTrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw ContractError("train_classifier: empty train set");
  bool has_bipolar = false, has_normal = false;
  for (const auto& s : train) {
    has_bipolar |= s.label == Label::bipolar;
    has_normal |= s.label == Label::normal;
  }
  if (!has_bipolar || !has_normal) {
    throw ContractError("train_classifier: both classes must be present in "
                        "the training set");
  }
  const std::size_t h = train[0].height, w = train[0].width,
                    d = train[0].depth;
  for (const auto& s : train) {
    if (s.height != h || s.width != w || s.depth != d) {
      throw ShapeError("train_classifier: inconsistent sample dims");
    }
  }

  ClassifierConfig mcfg;
  mcfg.height = h;
  mcfg.width = w;
  mcfg.depth = d;
  mcfg.filters = cfg.filters;
  mcfg.dense1 = cfg.dense1;
  mcfg.dense2 = cfg.dense2;
  ClassifierTrainResult result;
  result.model = build_classifier(mcfg, hash_str(cfg.seed, "classifier-init"));

  auto params = result.model.trainable_params();
  AdamState opt;
  opt.learning_rate = cfg.learning_rate;

  Rng rng(hash_str(cfg.seed, "classifier-train"));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    const auto batches =
        detail::make_batches(order, std::size_t(cfg.batch_size));
    float epoch_loss = 0.0f;
    for (const auto& batch_idx : batches) {
      std::vector<const LabeledSample*> batch;
      for (std::size_t i : batch_idx) batch.push_back(&train[i]);
      Tensor x = detail::samples_to_batch(batch);
      Tensor target = detail::onehot_labels(batch);
      zero_grads<float>(params);
      Tape tape;
      Tensor probs = forward_model(result.model, x, true, &tape,
                                   rng.next_u64());
      Tensor loss = cross_entropy_loss(probs, target, &tape);
      epoch_loss += loss.item() * float(batch.size());
      backward(loss, tape);
      adam_step<float>(params, opt);
    }
    result.epoch_loss.push_back(epoch_loss / float(train.size()));
  }
  return result;
}

// Probabilities (p_bipolar, p_normal) for one stack; inference mode, pure.
inline std::array<double, 2> predict(ModelGraph& model,
                                     const LabeledSample& sample) {
  const Shape& in = model.input_shape;
  if (sample.height != in[0] || sample.width != in[1] ||
      sample.depth != in[2]) {
    throw ShapeError("predict: sample " + std::to_string(sample.height) + "x" +
                     std::to_string(sample.width) + "x" +
                     std::to_string(sample.depth) +
                     " does not match model input " + shape_str(in));
  }
  Tensor x = Tensor::from({1, sample.height, sample.width, sample.depth, 1},
                          std::vector<float>(sample.values));
  Tensor probs = forward_model(model, x, false);
  return {double(probs.data()[0]), double(probs.data()[1])};
}

inline Label predict_label(ModelGraph& model, const LabeledSample& sample) {
  const auto p = predict(model, sample);
  return p[0] >= p[1] ? Label::bipolar : Label::normal;
}

inline ConfusionMatrix evaluate_confusion(
    ModelGraph& model, const std::vector<const LabeledSample*>& samples) {
  ConfusionMatrix cm;
  for (const auto* s : samples) {
    const Label predicted = predict_label(model, *s);
    if (s->label == Label::bipolar) {
      predicted == Label::bipolar ? ++cm.tp : ++cm.fn;
    } else {
      predicted == Label::normal ? ++cm.tn : ++cm.fp;
    }
  }
  return cm;
}

// ---------------------------------------------------------------------------
// Stratified k-fold plans
// ---------------------------------------------------------------------------

struct FoldPlan {
  int k = 5;
  std::vector<int> assignments;  // fold index per sample
};

// Seeded stratified partition. Each class is shuffled and dealt round-robin;
// the dealing start rotates by the previous class's remainder so total fold
// sizes also differ by at most one. Generated samples are refused: they may
// never reach a validation fold.
inline FoldPlan make_folds(const std::vector<LabeledSample>& samples, int k,
                           std::uint64_t seed) {
  if (k < 2) throw ContractError("make_folds: k must be >= 2");
  std::map<Label, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].provenance != SampleProvenance::real) {
      throw ContractError("make_folds: generated sample '" + samples[i].id +
                          "' cannot enter a cross-validation plan");
    }
    by_class[samples[i].label].push_back(i);
  }
  for (auto& [label, idx] : by_class) {
    if (idx.size() < std::size_t(k)) {
      throw ContractError(std::string("make_folds: class '") +
                          label_name(label) + "' has " +
                          std::to_string(idx.size()) + " samples, fewer than " +
                          std::to_string(k) + " folds");
    }
  }

  FoldPlan plan;
  plan.k = k;
  plan.assignments.assign(samples.size(), -1);
  std::size_t start = 0;
  for (auto& [label, idx] : by_class) {
    Rng rng(hash_str(hash_combine(seed, std::uint64_t(label)), "folds"));
    rng.shuffle(idx);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      plan.assignments[idx[i]] = int((start + i) % std::size_t(k));
    }
    start = (start + idx.size()) % std::size_t(k);
  }
  return plan;
}

}  // namespace volgan
