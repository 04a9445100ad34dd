#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "volgan/common.hpp"
#include "volgan/model.hpp"
#include "volgan/optim.hpp"
#include "volgan/parallel.hpp"
#include "volgan/volume.hpp"

namespace volgan {

inline constexpr std::size_t kBandDepth = 22;

struct GanTrainConfig {
  int max_epochs = 20000;
  // Updates stop here when set; mirrors the observation that outputs settle
  // well before the epoch cap.
  std::optional<int> early_stop_epoch = 8000;
  int batch_size = 16;
  std::size_t noise_dim = 500;
  std::vector<int> snapshot_epochs = {1, 50, 1000, 10000};
  std::uint64_t seed = 1;
  int d_steps_per_g = 1;
  std::size_t image_size = 64;
  std::size_t gen_base_channels = 256;
  std::size_t disc_base_channels = 64;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  float dropout_rate = 0.3f;
  float leaky_alpha = 0.2f;
  std::string snapshot_dir;  // empty: keep snapshots in memory only

  int effective_epochs() const {
    return early_stop_epoch ? std::min(*early_stop_epoch, max_epochs)
                            : max_epochs;
  }

  void validate() const {
    if (max_epochs < 1) throw ConfigError("gan: max_epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("gan: batch_size must be >= 1");
    if (noise_dim == 0) throw ConfigError("gan: noise_dim must be >= 1");
    if (d_steps_per_g < 1) throw ConfigError("gan: d_steps must be >= 1");
    if (early_stop_epoch && (*early_stop_epoch < 1 ||
                             *early_stop_epoch > max_epochs)) {
      throw ConfigError("gan: early_stop_epoch must lie in [1, max_epochs]");
    }
    for (int e : snapshot_epochs) {
      if (e < 1 || e > max_epochs) {
        throw ConfigError("gan: snapshot epoch " + std::to_string(e) +
                          " outside [1, max_epochs=" +
                          std::to_string(max_epochs) + "]");
      }
    }
    if (dropout_rate < 0.0f || dropout_rate >= 1.0f) {
      throw ConfigError("gan: dropout rate must be in [0, 1)");
    }
    if (image_size % 4 != 0 || image_size < 8) {
      throw ConfigError("gan: image_size must be a multiple of 4, >= 8");
    }
  }
};

// Generator/discriminator pair trained on one (class, depth layer) slot.
struct GanPair {
  ModelGraph generator;
  ModelGraph discriminator;
  Label class_tag = Label::unlabeled;
  int depth_index = 0;
  int epoch = 0;
  std::vector<std::pair<float, float>> loss_history;  // (g_loss, d_loss)
  std::vector<std::pair<int, std::vector<float>>> snapshots;  // (epoch, image)
};

struct GanBank {
  std::map<std::pair<Label, int>, GanPair> pairs;

  bool complete_for(Label label) const {
    for (std::size_t d = 0; d < kBandDepth; ++d) {
      if (!pairs.count({label, int(d)})) return false;
    }
    return true;
  }
};

namespace detail {

inline std::string pair_stem(Label label, int depth) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%02d", depth);
  return std::string(label_name(label)) + "_d" + buf;
}

// Batch of slices -> [n, h, w, 1] tensor.
inline Tensor slices_to_batch(const std::vector<const std::vector<float>*>& sl,
                              std::size_t h, std::size_t w) {
  std::vector<float> data;
  data.reserve(sl.size() * h * w);
  for (const auto* grid : sl) data.insert(data.end(), grid->begin(), grid->end());
  return Tensor::from({sl.size(), h, w, 1}, std::move(data));
}

inline Tensor noise_batch(Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<float> z(n * dim);
  for (auto& v : z) v = float(rng.next_normal());
  return Tensor::from({n, dim}, std::move(z));
}

}  // namespace detail

// Runs the generator on a noise batch and returns one flat image per row.
inline std::vector<std::vector<float>> generate_images(ModelGraph& generator,
                                                       const Tensor& noise,
                                                       bool training = false) {
  Tensor out = forward_model(generator, noise, training);
  const std::size_t n = out.dim(0);
  const std::size_t per = out.size() / n;
  std::vector<std::vector<float>> images(n);
  for (std::size_t i = 0; i < n; ++i) {
    images[i].assign(out.data().begin() + i * per,
                     out.data().begin() + (i + 1) * per);
  }
  return images;
}

// Writes the fixed-noise generation as a PGM named
// <class>_d<depth>_epoch<zero-padded>.pgm and appends one record to the
// pair's snapshot index. Requires at least one trained epoch.
inline std::string snapshot_progress(GanPair& pair, const Tensor& fixed_noise,
                                     const std::string& dir) {
  if (pair.epoch < 1) {
    throw ContractError("snapshot_progress: pair has not been trained");
  }
  const auto images = generate_images(pair.generator, fixed_noise);
  const std::size_t h = pair.generator.output_shape()[0];
  const std::size_t w = pair.generator.output_shape()[1];
  char ep[16];
  std::snprintf(ep, sizeof(ep), "%06d", pair.epoch);
  const std::string stem = detail::pair_stem(pair.class_tag, pair.depth_index);
  const std::string name = stem + "_epoch" + ep + ".pgm";
  write_pgm(dir + "/" + name, images[0], h, w);

  std::ofstream idx(dir + "/" + stem + "_snapshots.csv", std::ios::app);
  if (!idx) throw IoError("cannot append snapshot index in " + dir);
  const auto [g_loss, d_loss] = pair.loss_history.back();
  char line[160];
  std::snprintf(line, sizeof(line), "%d,%s,%.6f,%.6f\n", pair.epoch,
                name.c_str(), double(g_loss), double(d_loss));
  idx << line;
  return name;
}

// Adversarial training on one depth layer's slices. Per epoch: d_steps
// discriminator updates (real batch toward 1, fake batch toward 0), then one
// generator update through the non-saturating objective (fakes toward 1).
// Everything is driven by config.seed, so identical configs produce
// bit-identical pairs.
inline GanPair train_slice_gan(const std::vector<std::vector<float>>& slices,
                               const GanTrainConfig& config, Label class_tag,
                               int depth_index) {
  config.validate();
  if (slices.size() < 2) {
    throw ContractError("train_slice_gan: need at least 2 training slices, "
                        "got " + std::to_string(slices.size()));
  }
  const std::size_t hw = config.image_size;
  for (const auto& s : slices) {
    if (s.size() != hw * hw) {
      throw ShapeError("train_slice_gan: slice has " +
                       std::to_string(s.size()) + " pixels, expected " +
                       std::to_string(hw * hw));
    }
    for (float v : s) {
      if (!(v >= -1.00001f && v <= 1.00001f)) {
        throw ContractError("train_slice_gan: slice values must lie in "
                            "[-1, 1]");
      }
    }
  }

  GanPair pair;
  pair.class_tag = class_tag;
  pair.depth_index = depth_index;
  GeneratorConfig gcfg;
  gcfg.noise_dim = config.noise_dim;
  gcfg.image_size = config.image_size;
  gcfg.base_channels = config.gen_base_channels;
  gcfg.leaky_alpha = config.leaky_alpha;
  pair.generator = build_generator(gcfg, hash_str(config.seed, "generator"));
  DiscriminatorConfig dcfg;
  dcfg.image_size = config.image_size;
  dcfg.base_channels = config.disc_base_channels;
  dcfg.dropout_rate = config.dropout_rate;
  dcfg.leaky_alpha = config.leaky_alpha;
  pair.discriminator =
      build_discriminator(dcfg, hash_str(config.seed, "discriminator"));

  auto g_params = pair.generator.trainable_params();
  auto d_params = pair.discriminator.trainable_params();
  AdamState g_opt, d_opt;
  g_opt.learning_rate = d_opt.learning_rate = config.learning_rate;
  g_opt.beta1 = d_opt.beta1 = config.beta1;
  g_opt.beta2 = d_opt.beta2 = config.beta2;

  Rng rng(hash_str(config.seed, "train-loop"));
  const Tensor fixed_noise =
      randn_seeded({1, config.noise_dim}, hash_str(config.seed, "fixed-noise"));

  const std::size_t batch =
      std::min<std::size_t>(std::size_t(config.batch_size), slices.size());
  std::vector<std::size_t> order(slices.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t cursor = 0;
  auto next_real_batch = [&]() {
    std::vector<const std::vector<float>*> picked;
    picked.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      picked.push_back(&slices[order[cursor++]]);
    }
    return detail::slices_to_batch(picked, hw, hw);
  };

  const Tensor ones = Tensor::full({batch, 1}, 1.0f);
  const Tensor zeros_t = Tensor::full({batch, 1}, 0.0f);
  const int total_epochs = config.effective_epochs();

  for (int epoch = 1; epoch <= total_epochs; ++epoch) {
    float d_loss = 0.0f;
    for (int step = 0; step < config.d_steps_per_g; ++step) {
      zero_grads<float>(d_params);
      {
        Tape tape;
        Tensor p = forward_model(pair.discriminator, next_real_batch(), true,
                                 &tape, rng.next_u64());
        Tensor loss = bce_loss(p, ones, &tape);
        d_loss = loss.item();
        backward(loss, tape);
      }
      {
        // fakes are detached: the generator runs untaped here
        Tensor fake = forward_model(
            pair.generator, detail::noise_batch(rng, batch, config.noise_dim),
            true);
        Tape tape;
        Tensor p = forward_model(pair.discriminator, fake, true, &tape,
                                 rng.next_u64());
        Tensor loss = bce_loss(p, zeros_t, &tape);
        d_loss += loss.item();
        backward(loss, tape);
      }
      adam_step<float>(d_params, d_opt);
    }

    zero_grads<float>(g_params);
    zero_grads<float>(d_params);
    float g_loss;
    {
      Tape tape;
      Tensor fake = forward_model(
          pair.generator, detail::noise_batch(rng, batch, config.noise_dim),
          true, &tape);
      Tensor p =
          forward_model(pair.discriminator, fake, true, &tape, rng.next_u64());
      Tensor loss = bce_loss(p, ones, &tape);
      g_loss = loss.item();
      backward(loss, tape);
    }
    adam_step<float>(g_params, g_opt);

    if (!std::isfinite(g_loss) || !std::isfinite(d_loss)) {
      throw DivergenceError(epoch, "g_loss=" + std::to_string(g_loss) +
                                       " d_loss=" + std::to_string(d_loss));
    }
    pair.loss_history.emplace_back(g_loss, d_loss);
    pair.epoch = epoch;

    for (int se : config.snapshot_epochs) {
      if (se != epoch) continue;
      auto images = generate_images(pair.generator, fixed_noise);
      pair.snapshots.emplace_back(epoch, std::move(images[0]));
      if (!config.snapshot_dir.empty()) {
        snapshot_progress(pair, fixed_noise, config.snapshot_dir);
      }
    }
  }

  if (!config.snapshot_dir.empty()) {
    const std::string stem =
        detail::pair_stem(pair.class_tag, pair.depth_index);
    std::ofstream log(config.snapshot_dir + "/" + stem + "_loss.csv");
    if (!log) throw IoError("cannot write loss log in " + config.snapshot_dir);
    for (std::size_t e = 0; e < pair.loss_history.size(); ++e) {
      char line[96];
      std::snprintf(line, sizeof(line), "%zu,%.6f,%.6f\n", e + 1,
                    double(pair.loss_history[e].first),
                    double(pair.loss_history[e].second));
      log << line;
    }
  }
  return pair;
}

// Trains one pair per (class, depth layer) over the 22-slice band; 44 pairs
// for a two-class dataset. Pair seeds derive from
// hash(config.seed, class_tag, depth_index), so any degree of parallelism
// yields the same bank.
inline GanBank train_gan_bank(const std::vector<SliceStack>& stacks,
                              const GanTrainConfig& config, int jobs = 1) {
  config.validate();
  std::map<Label, std::vector<const SliceStack*>> by_class;
  for (const auto& s : stacks) {
    if (s.count() != kBandDepth) {
      throw ContractError("train_gan_bank: stack '" + s.id + "' has " +
                          std::to_string(s.count()) + " slices, expected " +
                          std::to_string(kBandDepth));
    }
    if (s.height != config.image_size || s.width != config.image_size) {
      throw ShapeError("train_gan_bank: stack '" + s.id + "' is " +
                       std::to_string(s.height) + "x" +
                       std::to_string(s.width) + ", config expects " +
                       std::to_string(config.image_size));
    }
    by_class[s.label].push_back(&s);
  }
  for (Label label : {Label::bipolar, Label::normal}) {
    if (by_class[label].size() < 2) {
      throw ContractError(std::string("train_gan_bank: class '") +
                          label_name(label) + "' needs >= 2 samples, got " +
                          std::to_string(by_class[label].size()));
    }
  }

  struct Job {
    Label label;
    int depth;
  };
  std::vector<Job> jobs_list;
  for (Label label : {Label::bipolar, Label::normal}) {
    for (std::size_t d = 0; d < kBandDepth; ++d) {
      jobs_list.push_back({label, int(d)});
    }
  }
  std::vector<GanPair> results(jobs_list.size());
  parallel_for(jobs_list.size(), jobs, [&](std::size_t i) {
    const Job job = jobs_list[i];
    std::vector<std::vector<float>> slices;
    for (const SliceStack* s : by_class[job.label]) {
      slices.push_back(s->slices[std::size_t(job.depth)]);
    }
    GanTrainConfig pair_cfg = config;
    pair_cfg.seed = hash_combine(hash_str(config.seed, label_name(job.label)),
                                 std::uint64_t(job.depth));
    results[i] = train_slice_gan(slices, pair_cfg, job.label, job.depth);
  });

  GanBank bank;
  for (std::size_t i = 0; i < jobs_list.size(); ++i) {
    bank.pairs[{jobs_list[i].label, jobs_list[i].depth}] =
        std::move(results[i]);
  }
  return bank;
}

// Assembles one synthetic stack from a complete per-class bank: one noise
// draw per depth layer, seed derived from (seed, depth).
inline SliceStack synthesize_stack(GanBank& bank, Label class_tag,
                                   std::uint64_t seed) {
  if (!bank.complete_for(class_tag)) {
    throw ContractError(std::string("synthesize_stack: bank incomplete for "
                                    "class '") +
                        label_name(class_tag) + "'");
  }
  SliceStack out;
  out.label = class_tag;
  out.provenance = Provenance::generated;
  for (std::size_t d = 0; d < kBandDepth; ++d) {
    GanPair& pair = bank.pairs.at({class_tag, int(d)});
    const auto& oshape = pair.generator.output_shape();
    out.height = oshape[0];
    out.width = oshape[1];
    const Tensor z =
        randn_seeded({1, pair.generator.input_shape[0]},
                     hash_combine(hash_str(seed, "synthesize"), d));
    auto images = generate_images(pair.generator, z);
    out.slices.push_back(std::move(images[0]));
    out.depth_indices.push_back(int(d));
  }
  return out;
}

// Balanced real-vs-fake accuracy of the trained discriminator; fakes come
// from a training-mode generator batch (the distribution it was trained
// against), scoring runs in inference mode.
inline double discriminator_accuracy(GanPair& pair,
                                     const std::vector<std::vector<float>>&
                                         real_slices,
                                     std::size_t per_side, std::uint64_t seed) {
  Rng rng(hash_str(seed, "disc-acc"));
  std::vector<const std::vector<float>*> real;
  for (std::size_t i = 0; i < per_side; ++i) {
    real.push_back(&real_slices[rng.next_below(real_slices.size())]);
  }
  const std::size_t hw = pair.discriminator.input_shape[0];
  Tensor real_batch = detail::slices_to_batch(real, hw, hw);
  Tensor z = detail::noise_batch(rng, per_side,
                                 pair.generator.input_shape[0]);
  Tensor fake_batch = forward_model(pair.generator, z, true);

  Tensor p_real = forward_model(pair.discriminator, real_batch, false);
  Tensor p_fake = forward_model(pair.discriminator, fake_batch, false);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < per_side; ++i) {
    if (p_real.data()[i] > 0.5f) ++correct;
    if (p_fake.data()[i] <= 0.5f) ++correct;
  }
  return double(correct) / double(2 * per_side);
}

// ---------------------------------------------------------------------------
// Bank persistence: one checkpoint per (class, depth, role) plus a small
// key=value meta file describing the architecture.
// ---------------------------------------------------------------------------

struct GanBankMeta {
  std::size_t image_size = 64;
  std::size_t noise_dim = 500;
  std::size_t gen_base_channels = 256;
  std::size_t disc_base_channels = 64;
  float dropout_rate = 0.3f;
  float leaky_alpha = 0.2f;
  int trained_epochs = 0;
};

inline void save_bank(const std::string& dir, GanBank& bank,
                      const GanBankMeta& meta) {
  std::ofstream mf(dir + "/bank_meta.txt");
  if (!mf) throw IoError("cannot write bank meta in " + dir);
  mf << "image_size=" << meta.image_size << "\n"
     << "noise_dim=" << meta.noise_dim << "\n"
     << "gen_base_channels=" << meta.gen_base_channels << "\n"
     << "disc_base_channels=" << meta.disc_base_channels << "\n"
     << "dropout_rate=" << meta.dropout_rate << "\n"
     << "leaky_alpha=" << meta.leaky_alpha << "\n"
     << "trained_epochs=" << meta.trained_epochs << "\n";
  for (auto& [key, pair] : bank.pairs) {
    const std::string stem = detail::pair_stem(key.first, key.second);
    save_checkpoint(dir + "/gan_" + stem + "_generator.ckpt", pair.generator);
    save_checkpoint(dir + "/gan_" + stem + "_discriminator.ckpt",
                    pair.discriminator);
  }
}

inline GanBankMeta load_bank_meta(const std::string& dir) {
  std::ifstream mf(dir + "/bank_meta.txt");
  if (!mf) throw IoError("cannot open bank meta: " + dir + "/bank_meta.txt");
  GanBankMeta meta;
  std::string line;
  while (std::getline(mf, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "image_size") meta.image_size = std::stoul(value);
    else if (key == "noise_dim") meta.noise_dim = std::stoul(value);
    else if (key == "gen_base_channels") meta.gen_base_channels = std::stoul(value);
    else if (key == "disc_base_channels") meta.disc_base_channels = std::stoul(value);
    else if (key == "dropout_rate") meta.dropout_rate = std::stof(value);
    else if (key == "leaky_alpha") meta.leaky_alpha = std::stof(value);
    else if (key == "trained_epochs") meta.trained_epochs = std::stoi(value);
    else throw ConfigError("bank meta: unknown key '" + key + "'");
  }
  return meta;
}

inline GanBank load_bank(const std::string& dir) {
  const GanBankMeta meta = load_bank_meta(dir);
  GanBank bank;
  for (Label label : {Label::bipolar, Label::normal}) {
    for (std::size_t d = 0; d < kBandDepth; ++d) {
      const std::string stem = detail::pair_stem(label, int(d));
      const std::string gpath = dir + "/gan_" + stem + "_generator.ckpt";
      std::ifstream probe(gpath);
      if (!probe) continue;  // partial banks are allowed
      GanPair pair;
      pair.class_tag = label;
      pair.depth_index = int(d);
      pair.epoch = meta.trained_epochs;
      GeneratorConfig gcfg;
      gcfg.noise_dim = meta.noise_dim;
      gcfg.image_size = meta.image_size;
      gcfg.base_channels = meta.gen_base_channels;
      gcfg.leaky_alpha = meta.leaky_alpha;
      pair.generator = build_generator(gcfg);
      load_checkpoint(gpath, pair.generator);
      DiscriminatorConfig dcfg;
      dcfg.image_size = meta.image_size;
      dcfg.base_channels = meta.disc_base_channels;
      dcfg.dropout_rate = meta.dropout_rate;
      dcfg.leaky_alpha = meta.leaky_alpha;
      pair.discriminator = build_discriminator(dcfg);
      load_checkpoint(dir + "/gan_" + stem + "_discriminator.ckpt",
                      pair.discriminator);
      bank.pairs[{label, int(d)}] = std::move(pair);
    }
  }
  return bank;
}

}  // namespace volgan
