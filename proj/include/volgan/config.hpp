#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "volgan/classifier.hpp"
#include "volgan/common.hpp"
#include "volgan/gan.hpp"
#include "volgan/phantom.hpp"

namespace volgan {

// Effective run configuration. Precedence: built-in defaults, then the
// preset, then the config file, then command-line flags. Unknown keys are
// rejected rather than ignored.
struct RunConfig {
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string out_dir;
  std::string preset = "full";

  struct PhantomSection {
    int count_normal = 20;
    int count_bipolar = 20;
    std::array<std::size_t, 3> dims{256, 256, 176};
    PhantomParams params;
  } phantom;

  struct PreprocessSection {
    std::size_t downsample = 4;
    std::size_t band = 22;
    std::size_t target_depth = 176;  // depth is padded/cropped to this first
    double test_fraction = 0.25;
  } preprocess;

  GanTrainConfig gan;

  struct ClassifierSection {
    ClassifierTrainConfig train;
    int folds = 5;
  } classifier;

  struct SweepSection {
    std::vector<double> ratios{0.0, 0.25, 0.5, 0.75, 1.0, 3.0};
  } sweep;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<double> parse_double_list(const std::string& value) {
  std::vector<double> out;
  std::istringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

inline std::vector<int> parse_int_list(const std::string& value) {
  std::vector<int> out;
  for (double v : parse_double_list(value)) out.push_back(int(v));
  return out;
}

}  // namespace detail

// Applies one key (section-qualified, e.g. "gan.max_epochs") to the config.
// Throws ConfigError for unknown keys or unparsable values.
inline void apply_config_key(RunConfig& cfg, const std::string& key,
                             const std::string& value) {
  try {
    if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "jobs") cfg.jobs = std::stoi(value);
    else if (key == "out") cfg.out_dir = value;
    else if (key == "phantom.normal") cfg.phantom.count_normal = std::stoi(value);
    else if (key == "phantom.bipolar") cfg.phantom.count_bipolar = std::stoi(value);
    else if (key == "phantom.front") cfg.phantom.dims[0] = std::stoul(value);
    else if (key == "phantom.top") cfg.phantom.dims[1] = std::stoul(value);
    else if (key == "phantom.depth") cfg.phantom.dims[2] = std::stoul(value);
    else if (key == "phantom.signature_amplitude")
      cfg.phantom.params.signature_amplitude = std::stof(value);
    else if (key == "phantom.signature_radius_frac")
      cfg.phantom.params.signature_radius_frac = std::stof(value);
    else if (key == "phantom.noise_amplitude")
      cfg.phantom.params.noise_amplitude = std::stof(value);
    else if (key == "preprocess.downsample")
      cfg.preprocess.downsample = std::stoul(value);
    else if (key == "preprocess.band") cfg.preprocess.band = std::stoul(value);
    else if (key == "preprocess.target_depth")
      cfg.preprocess.target_depth = std::stoul(value);
    else if (key == "preprocess.test_fraction")
      cfg.preprocess.test_fraction = std::stod(value);
    else if (key == "gan.image_size") cfg.gan.image_size = std::stoul(value);
    else if (key == "gan.noise_dim") cfg.gan.noise_dim = std::stoul(value);
    else if (key == "gan.gen_channels")
      cfg.gan.gen_base_channels = std::stoul(value);
    else if (key == "gan.disc_channels")
      cfg.gan.disc_base_channels = std::stoul(value);
    else if (key == "gan.max_epochs") cfg.gan.max_epochs = std::stoi(value);
    else if (key == "gan.early_stop") {
      const int v = std::stoi(value);
      cfg.gan.early_stop_epoch =
          v == 0 ? std::nullopt : std::optional<int>(v);
    } else if (key == "gan.batch_size") cfg.gan.batch_size = std::stoi(value);
    else if (key == "gan.d_steps") cfg.gan.d_steps_per_g = std::stoi(value);
    else if (key == "gan.learning_rate")
      cfg.gan.learning_rate = std::stod(value);
    else if (key == "gan.beta1") cfg.gan.beta1 = std::stod(value);
    else if (key == "gan.beta2") cfg.gan.beta2 = std::stod(value);
    else if (key == "gan.dropout") cfg.gan.dropout_rate = std::stof(value);
    else if (key == "gan.leaky_alpha") cfg.gan.leaky_alpha = std::stof(value);
    else if (key == "gan.snapshot_epochs")
      cfg.gan.snapshot_epochs = detail::parse_int_list(value);
    else if (key == "classifier.epochs")
      cfg.classifier.train.epochs = std::stoi(value);
    else if (key == "classifier.batch_size")
      cfg.classifier.train.batch_size = std::stoi(value);
    else if (key == "classifier.learning_rate")
      cfg.classifier.train.learning_rate = std::stod(value);
    else if (key == "classifier.filters")
      cfg.classifier.train.filters = std::stoul(value);
    else if (key == "classifier.dense1")
      cfg.classifier.train.dense1 = std::stoul(value);
    else if (key == "classifier.dense2")
      cfg.classifier.train.dense2 = std::stoul(value);
    else if (key == "classifier.folds")
      cfg.classifier.folds = std::stoi(value);
    else if (key == "sweep.ratios")
      cfg.sweep.ratios = detail::parse_double_list(value);
    else
      throw ConfigError("unknown config key: '" + key + "'");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("bad value for '" + key + "': '" + value + "'");
  }
}

// Named preset bundles. "full" keeps the published-scale defaults; "desk"
// shrinks images, channel widths and epochs so the whole pipeline runs in
// minutes; "smoke" cuts everything to the bone for end-to-end determinism
// checks.
inline void apply_preset(RunConfig& cfg, const std::string& name) {
  cfg.preset = name;
  if (name == "full") return;
  if (name == "desk" || name == "smoke") {
    cfg.phantom.dims = {64, 64, 88};
    cfg.phantom.params.signature_radius_frac = 0.20f;
    cfg.phantom.params.signature_amplitude = 0.50f;
    cfg.phantom.count_normal = 40;
    cfg.phantom.count_bipolar = 40;
    cfg.gan.image_size = 16;
    cfg.gan.noise_dim = 64;
    cfg.gan.gen_base_channels = 64;
    cfg.gan.disc_base_channels = 16;
    cfg.gan.max_epochs = 400;
    cfg.gan.early_stop_epoch = std::nullopt;
    cfg.gan.snapshot_epochs = {1, 50, 200, 400};
    cfg.classifier.train.epochs = 40;
    cfg.classifier.train.batch_size = 8;
    cfg.classifier.train.filters = 32;
    cfg.classifier.train.dense1 = 256;
    cfg.classifier.train.dense2 = 64;
    cfg.sweep.ratios = {0.0, 0.5};
    if (name == "smoke") {
      cfg.phantom.count_normal = 6;
      cfg.phantom.count_bipolar = 6;
      cfg.gan.max_epochs = 6;
      cfg.gan.snapshot_epochs = {1, 6};
      cfg.classifier.train.epochs = 3;
      cfg.classifier.folds = 3;
      cfg.preprocess.test_fraction = 0.34;
    }
    return;
  }
  throw ConfigError("unknown preset: '" + name +
                    "' (expected full, desk or smoke)");
}

inline void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw ConfigError(path + ":" + std::to_string(lineno) +
                          ": malformed section header");
      }
      section = detail::trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected key = value");
    }
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    apply_config_key(cfg, full, value);
  }
}

// Sorted key=value echo of every effective setting; written into each run's
// reproducibility manifest.
inline std::map<std::string, std::string> config_echo(const RunConfig& cfg) {
  std::map<std::string, std::string> m;
  auto num = [](auto v) { return std::to_string(v); };
  m["seed"] = num(cfg.seed);
  m["jobs"] = num(cfg.jobs);
  m["preset"] = cfg.preset;
  m["out"] = cfg.out_dir;
  m["phantom.normal"] = num(cfg.phantom.count_normal);
  m["phantom.bipolar"] = num(cfg.phantom.count_bipolar);
  m["phantom.front"] = num(cfg.phantom.dims[0]);
  m["phantom.top"] = num(cfg.phantom.dims[1]);
  m["phantom.depth"] = num(cfg.phantom.dims[2]);
  m["phantom.signature_amplitude"] =
      num(cfg.phantom.params.signature_amplitude);
  m["phantom.signature_radius_frac"] =
      num(cfg.phantom.params.signature_radius_frac);
  m["phantom.noise_amplitude"] = num(cfg.phantom.params.noise_amplitude);
  m["preprocess.downsample"] = num(cfg.preprocess.downsample);
  m["preprocess.band"] = num(cfg.preprocess.band);
  m["preprocess.target_depth"] = num(cfg.preprocess.target_depth);
  m["preprocess.test_fraction"] = num(cfg.preprocess.test_fraction);
  m["gan.image_size"] = num(cfg.gan.image_size);
  m["gan.noise_dim"] = num(cfg.gan.noise_dim);
  m["gan.gen_channels"] = num(cfg.gan.gen_base_channels);
  m["gan.disc_channels"] = num(cfg.gan.disc_base_channels);
  m["gan.max_epochs"] = num(cfg.gan.max_epochs);
  m["gan.early_stop"] =
      num(cfg.gan.early_stop_epoch ? *cfg.gan.early_stop_epoch : 0);
  m["gan.batch_size"] = num(cfg.gan.batch_size);
  m["gan.d_steps"] = num(cfg.gan.d_steps_per_g);
  m["gan.learning_rate"] = num(cfg.gan.learning_rate);
  m["gan.beta1"] = num(cfg.gan.beta1);
  m["gan.beta2"] = num(cfg.gan.beta2);
  m["gan.dropout"] = num(cfg.gan.dropout_rate);
  m["gan.leaky_alpha"] = num(cfg.gan.leaky_alpha);
  {
    std::string list;
    for (std::size_t i = 0; i < cfg.gan.snapshot_epochs.size(); ++i) {
      if (i) list += ",";
      list += std::to_string(cfg.gan.snapshot_epochs[i]);
    }
    m["gan.snapshot_epochs"] = list;
  }
  m["classifier.epochs"] = num(cfg.classifier.train.epochs);
  m["classifier.batch_size"] = num(cfg.classifier.train.batch_size);
  m["classifier.learning_rate"] = num(cfg.classifier.train.learning_rate);
  m["classifier.filters"] = num(cfg.classifier.train.filters);
  m["classifier.dense1"] = num(cfg.classifier.train.dense1);
  m["classifier.dense2"] = num(cfg.classifier.train.dense2);
  m["classifier.folds"] = num(cfg.classifier.folds);
  {
    std::string list;
    for (std::size_t i = 0; i < cfg.sweep.ratios.size(); ++i) {
      if (i) list += ",";
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%g", cfg.sweep.ratios[i]);
      list += buf;
    }
    m["sweep.ratios"] = list;
  }
  return m;
}

}  // namespace volgan
