#pragma once

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "volgan/classifier.hpp"
#include "volgan/common.hpp"
#include "volgan/gan.hpp"
#include "volgan/metrics.hpp"
#include "volgan/parallel.hpp"

namespace volgan {

inline std::string ratio_label(double ratio) {
  if (ratio == 0.0) return "Base-0%";
  const double pct = ratio * 100.0;
  char buf[32];
  if (std::abs(pct - std::round(pct)) < 1e-9) {
    std::snprintf(buf, sizeof(buf), "%ld%%", std::lround(pct));
  } else {
    std::snprintf(buf, sizeof(buf), "%.1f%%", pct);
  }
  return buf;
}

// ---------------------------------------------------------------------------
// Augmentation planning
// ---------------------------------------------------------------------------

struct AugPlanClass {
  long class_total = 0;
  long base_train = 0;
  long test = 0;
  long generated_added = 0;
  long final_train = 0;
};

struct AugmentationPlan {
  double ratio = 0.0;
  AugPlanClass normal;
  AugPlanClass bipolar;
  // Published count cells the floor(ratio * class_total) rule cannot
  // reproduce; surfaced, never silently matched.
  std::vector<std::string> warnings;
};

namespace detail {

inline long floor_ratio_count(double ratio, long total) {
  return long(std::floor(ratio * double(total) + 1e-9));
}

struct PublishedCounts {
  double ratio;
  long normal_train;
  long bipolar_train;
};

// Train counts as printed for the 172-sample study split.
inline const std::vector<PublishedCounts>& published_table_counts() {
  static const std::vector<PublishedCounts> rows = {
      {0.0, 92, 37},   {0.25, 122, 49}, {0.5, 153, 61},
      {0.75, 184, 73}, {1.0, 215, 85},  {3.0, 474, 181},
  };
  return rows;
}

}  // namespace detail

// Adds floor(ratio * class_total) generated samples per class to the training
// split; test counts never change. When invoked with the reference 172-sample
// split, any mismatch against the published train counts is reported as a
// warning on the plan.
inline AugmentationPlan plan_augmentation(
    double ratio, std::pair<long, long> class_totals = {123, 49},
    std::pair<long, long> base_train = {92, 37},
    std::pair<long, long> test = {31, 12}) {
  if (ratio < 0.0) {
    throw ContractError("plan_augmentation: ratio must be >= 0, got " +
                        std::to_string(ratio));
  }
  AugmentationPlan plan;
  plan.ratio = ratio;
  plan.normal.class_total = class_totals.first;
  plan.bipolar.class_total = class_totals.second;
  plan.normal.base_train = base_train.first;
  plan.bipolar.base_train = base_train.second;
  plan.normal.test = test.first;
  plan.bipolar.test = test.second;
  for (AugPlanClass* c : {&plan.normal, &plan.bipolar}) {
    c->generated_added = detail::floor_ratio_count(ratio, c->class_total);
    c->final_train = c->base_train + c->generated_added;
  }

  const bool reference_split = class_totals == std::pair<long, long>{123, 49} &&
                               base_train == std::pair<long, long>{92, 37} &&
                               test == std::pair<long, long>{31, 12};
  if (reference_split) {
    for (const auto& row : detail::published_table_counts()) {
      if (std::abs(row.ratio - ratio) > 1e-9) continue;
      if (plan.normal.final_train != row.normal_train) {
        plan.warnings.push_back(
            "count-rule deviation at ratio " + ratio_label(ratio) +
            ": normal train " + std::to_string(plan.normal.final_train) +
            " (rule) vs " + std::to_string(row.normal_train) + " (published)");
      }
      if (plan.bipolar.final_train != row.bipolar_train) {
        plan.warnings.push_back(
            "count-rule deviation at ratio " + ratio_label(ratio) +
            ": bipolar train " + std::to_string(plan.bipolar.final_train) +
            " (rule) vs " + std::to_string(row.bipolar_train) +
            " (published)");
      }
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Sweep data planning (pure; no training). Keeping this separate lets the
// no-leakage property be checked structurally across many seeds.
// ---------------------------------------------------------------------------

struct RatioDataPlan {
  double ratio = 0.0;
  AugmentationPlan plan;
  std::vector<std::string> test_ids;
  std::vector<std::string> train_ids;
  std::vector<std::string> generated_ids;
  FoldPlan folds;  // over train_ids, same order
  std::vector<std::vector<std::string>> fold_val_ids;
};

inline std::string generated_sample_id(Label label, long index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "gen_%s_%04ld", label_name(label), index);
  return buf;
}

inline std::vector<RatioDataPlan> plan_sweep_data(
    const std::vector<LabeledSample>& samples, const std::vector<bool>& is_test,
    std::vector<double> ratios, int k, std::uint64_t seed) {
  if (samples.size() != is_test.size()) {
    throw ContractError("plan_sweep_data: samples / split length mismatch");
  }
  long normal_total = 0, bipolar_total = 0, normal_test = 0, bipolar_test = 0;
  std::vector<LabeledSample> train_pool;
  std::vector<std::string> test_ids, train_ids;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].provenance != SampleProvenance::real) {
      throw ContractError("plan_sweep_data: dataset sample '" + samples[i].id +
                          "' is generated; the sweep synthesizes its own");
    }
    const bool bipolar = samples[i].label == Label::bipolar;
    (bipolar ? bipolar_total : normal_total) += 1;
    if (is_test[i]) {
      (bipolar ? bipolar_test : normal_test) += 1;
      test_ids.push_back(samples[i].id);
    } else {
      train_pool.push_back(samples[i]);
      train_ids.push_back(samples[i].id);
    }
  }

  std::sort(ratios.begin(), ratios.end());
  ratios.erase(std::unique(ratios.begin(), ratios.end()), ratios.end());

  const FoldPlan folds = make_folds(train_pool, k, hash_str(seed, "folds"));
  std::vector<std::vector<std::string>> fold_val_ids(std::size_t(k));
  for (std::size_t i = 0; i < train_pool.size(); ++i) {
    fold_val_ids[std::size_t(folds.assignments[i])].push_back(train_ids[i]);
  }

  std::vector<RatioDataPlan> rows;
  for (double ratio : ratios) {
    RatioDataPlan row;
    row.ratio = ratio;
    row.plan = plan_augmentation(
        ratio, {normal_total, bipolar_total},
        {normal_total - normal_test, bipolar_total - bipolar_test},
        {normal_test, bipolar_test});
    row.test_ids = test_ids;
    row.train_ids = train_ids;
    row.folds = folds;
    row.fold_val_ids = fold_val_ids;
    for (long i = 0; i < row.plan.normal.generated_added; ++i) {
      row.generated_ids.push_back(generated_sample_id(Label::normal, i));
    }
    for (long i = 0; i < row.plan.bipolar.generated_added; ++i) {
      row.generated_ids.push_back(generated_sample_id(Label::bipolar, i));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Sweep execution
// ---------------------------------------------------------------------------

struct RatioResult {
  AugmentationPlan plan;
  std::vector<ConfusionMatrix> fold_confusions;
  ConfusionMatrix cv_confusion;   // sum over folds
  MetricSet cv_metrics;
  ConfusionMatrix test_confusion;  // fixed held-out test set
  MetricSet test_metrics;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> test_ids;
  std::vector<std::vector<std::string>> fold_val_ids;
  std::vector<std::string> generated_ids;
};

struct ExperimentReport {
  std::vector<RatioResult> rows;  // ratio ascending
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config_echo;
};

struct SweepConfig {
  std::vector<double> ratios{0.0, 0.25, 0.5, 0.75, 1.0, 3.0};
  int folds = 5;
  ClassifierTrainConfig classifier;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::map<std::string, std::string> config_echo;
};

// Full augmentation-ratio sweep. The held-out test split and the fold plan
// are fixed once and reused for every ratio; generated samples are injected
// into training sides only. Each (fold | final) training job derives its own
// seed, so rows are reproducible under any `jobs` setting.
inline ExperimentReport run_sweep(const std::vector<LabeledSample>& samples,
                                  const std::vector<bool>& is_test,
                                  GanBank* bank, const SweepConfig& cfg) {
  const auto data_plans =
      plan_sweep_data(samples, is_test, cfg.ratios, cfg.folds, cfg.seed);

  std::vector<const LabeledSample*> test_set;
  std::vector<LabeledSample> train_pool;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (is_test[i]) {
      test_set.push_back(&samples[i]);
    } else {
      train_pool.push_back(samples[i]);
    }
  }

  long max_normal = 0, max_bipolar = 0;
  for (const auto& row : data_plans) {
    max_normal = std::max(max_normal, row.plan.normal.generated_added);
    max_bipolar = std::max(max_bipolar, row.plan.bipolar.generated_added);
  }
  if ((max_normal > 0 || max_bipolar > 0)) {
    if (bank == nullptr || !bank->complete_for(Label::normal) ||
        !bank->complete_for(Label::bipolar)) {
      throw ContractError("run_sweep: augmentation requested but the GAN bank "
                          "is missing or incomplete");
    }
  }

  // Generated sample i of a class is the same tensor in every row that uses
  // it (seeds keyed by class and index only).
  auto synthesize_class = [&](Label label, long count) {
    std::vector<LabeledSample> out;
    for (long i = 0; i < count; ++i) {
      SliceStack stack = synthesize_stack(
          *bank, label,
          hash_combine(hash_str(cfg.seed, label_name(label)),
                       std::uint64_t(i)));
      SliceStack resized = resize_stack(stack);
      resized.id = generated_sample_id(label, i);
      LabeledSample s = sample_from_stack(resized);
      out.push_back(std::move(s));
    }
    return out;
  };
  const std::vector<LabeledSample> gen_normal =
      synthesize_class(Label::normal, max_normal);
  const std::vector<LabeledSample> gen_bipolar =
      synthesize_class(Label::bipolar, max_bipolar);

  ExperimentReport report;
  report.seed = cfg.seed;
  report.config_echo = cfg.config_echo;

  for (std::size_t r = 0; r < data_plans.size(); ++r) {
    const RatioDataPlan& dp = data_plans[r];
    const auto t0 = std::chrono::steady_clock::now();
    RatioResult row;
    row.plan = dp.plan;
    row.seed = hash_combine(hash_str(cfg.seed, "row"), r);
    row.test_ids = dp.test_ids;
    row.fold_val_ids = dp.fold_val_ids;
    row.generated_ids = dp.generated_ids;

    std::vector<LabeledSample> generated;
    generated.insert(generated.end(), gen_normal.begin(),
                     gen_normal.begin() + dp.plan.normal.generated_added);
    generated.insert(generated.end(), gen_bipolar.begin(),
                     gen_bipolar.begin() + dp.plan.bipolar.generated_added);

    const int k = dp.folds.k;
    row.fold_confusions.assign(std::size_t(k), ConfusionMatrix{});
    ConfusionMatrix final_cm;

    // k fold jobs plus the final full-pool training
    parallel_for(std::size_t(k) + 1, cfg.jobs, [&](std::size_t job) {
      ClassifierTrainConfig tcfg = cfg.classifier;
      if (job < std::size_t(k)) {
        std::vector<LabeledSample> fold_train;
        std::vector<const LabeledSample*> fold_val;
        for (std::size_t i = 0; i < train_pool.size(); ++i) {
          if (dp.folds.assignments[i] == int(job)) {
            fold_val.push_back(&train_pool[i]);
          } else {
            fold_train.push_back(train_pool[i]);
          }
        }
        fold_train.insert(fold_train.end(), generated.begin(),
                          generated.end());
        tcfg.seed = hash_combine(hash_str(row.seed, "fold"), job);
        auto trained = train_classifier(fold_train, tcfg);
        row.fold_confusions[job] = evaluate_confusion(trained.model, fold_val);
      } else {
        std::vector<LabeledSample> full_train = train_pool;
        full_train.insert(full_train.end(), generated.begin(),
                          generated.end());
        tcfg.seed = hash_str(row.seed, "final");
        auto trained = train_classifier(full_train, tcfg);
        final_cm = evaluate_confusion(trained.model, test_set);
      }
    });

    for (const auto& cm : row.fold_confusions) row.cv_confusion += cm;
    row.cv_metrics = compute_metrics(row.cv_confusion);
    row.test_confusion = final_cm;
    row.test_metrics = compute_metrics(row.test_confusion);
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    report.rows.push_back(std::move(row));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

enum class ReportFormat { csv, markdown };

namespace detail {

inline std::string csv_cell(const std::string& s) {
  if (s.find(',') == std::string::npos && s.find('"') == std::string::npos) {
    return s;
  }
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

inline std::string count_cell(const AugPlanClass& c) {
  return "(" + std::to_string(c.final_train) + ", " + std::to_string(c.test) +
         ")";
}

// The metrics row rendered in the comparison table uses the ratio with the
// best held-out accuracy (ties resolved toward the lower ratio).
inline std::size_t headline_row(const ExperimentReport& r) {
  std::size_t best = 0;
  double best_acc = -1.0;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& acc = r.rows[i].test_metrics.accuracy;
    if (acc && *acc > best_acc + 1e-12) {
      best_acc = *acc;
      best = i;
    }
  }
  return best;
}

}  // namespace detail

inline std::string render_report(const ExperimentReport& report,
                                 ReportFormat format) {
  std::vector<std::pair<std::string, std::vector<std::string>>> rows;
  auto add_row = [&](const std::string& label,
                     auto cell_of) {
    std::vector<std::string> cells;
    for (const auto& r : report.rows) cells.push_back(cell_of(r));
    rows.emplace_back(label, std::move(cells));
  };
  add_row("Normal (Train, Test)", [](const RatioResult& r) {
    return detail::count_cell(r.plan.normal);
  });
  add_row("Bipolar (Train, Test)", [](const RatioResult& r) {
    return detail::count_cell(r.plan.bipolar);
  });
  add_row("Accuracy rate", [](const RatioResult& r) {
    return format_metric(r.test_metrics.accuracy);
  });
  add_row("F1-score", [](const RatioResult& r) {
    return format_metric(r.test_metrics.f1);
  });
  add_row("Sensitivity", [](const RatioResult& r) {
    return format_metric(r.test_metrics.sensitivity);
  });
  add_row("Specificity", [](const RatioResult& r) {
    return format_metric(r.test_metrics.specificity);
  });
  add_row("Precision", [](const RatioResult& r) {
    return format_metric(r.test_metrics.precision);
  });
  add_row("CV Accuracy rate", [](const RatioResult& r) {
    return format_metric(r.cv_metrics.accuracy);
  });
  add_row("CV F1-score", [](const RatioResult& r) {
    return format_metric(r.cv_metrics.f1);
  });

  std::vector<std::string> header{"Augmentation Ratio"};
  for (const auto& r : report.rows) header.push_back(ratio_label(r.plan.ratio));

  std::vector<std::string> warnings;
  for (const auto& r : report.rows) {
    warnings.insert(warnings.end(), r.plan.warnings.begin(),
                    r.plan.warnings.end());
  }

  std::string out;
  if (format == ReportFormat::csv) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out += ",";
      out += detail::csv_cell(header[i]);
    }
    out += "\n";
    for (const auto& [label, cells] : rows) {
      out += detail::csv_cell(label);
      for (const auto& c : cells) out += "," + detail::csv_cell(c);
      out += "\n";
    }
    for (const auto& w : warnings) {
      out += detail::csv_cell("# " + w) + "\n";
    }
    return out;
  }

  auto md_row = [](const std::vector<std::string>& cells) {
    std::string line = "|";
    for (const auto& c : cells) line += " " + c + " |";
    return line + "\n";
  };
  out += "# Augmentation sweep report\n\n";
  out += "Seed: " + std::to_string(report.seed) + "\n\n";
  out += "## Impact of data augmentation on the classifier\n\n";
  out += md_row(header);
  std::vector<std::string> sep(header.size(), "---");
  out += md_row(sep);
  for (const auto& [label, cells] : rows) {
    std::vector<std::string> line{label};
    line.insert(line.end(), cells.begin(), cells.end());
    out += md_row(line);
  }
  if (!report.rows.empty()) {
    const auto& best = report.rows[detail::headline_row(report)];
    out += "\n## Metrics at the best ratio (" +
           ratio_label(best.plan.ratio) + ")\n\n";
    out += md_row({"Model", "Summary", "Increasing", "Classifier",
                   "Sensitivity", "Specificity", "Precision", "Accuracy",
                   "F1-score"});
    out += md_row(std::vector<std::string>(9, "---"));
    out += md_row({"Current run",
                   std::to_string(best.plan.normal.class_total) + " Normal " +
                       std::to_string(best.plan.bipolar.class_total) +
                       " Bipolar",
                   "GAN", "CNN", format_metric(best.test_metrics.sensitivity),
                   format_metric(best.test_metrics.specificity),
                   format_metric(best.test_metrics.precision),
                   format_metric(best.test_metrics.accuracy),
                   format_metric(best.test_metrics.f1)});
  }
  if (!warnings.empty()) {
    out += "\n## Count-rule deviations\n\n";
    for (const auto& w : warnings) out += "- " + w + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON-lines experiment log
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json metrics_json(const MetricSet& m) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"accuracy", opt(m.accuracy)},
          {"sensitivity", opt(m.sensitivity)},
          {"specificity", opt(m.specificity)},
          {"precision", opt(m.precision)},
          {"f1", opt(m.f1)}};
}

inline MetricSet metrics_from_json(const nlohmann::json& j) {
  MetricSet m;
  auto opt = [&](const char* key) -> std::optional<double> {
    if (j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
  };
  m.accuracy = opt("accuracy");
  m.sensitivity = opt("sensitivity");
  m.specificity = opt("specificity");
  m.precision = opt("precision");
  m.f1 = opt("f1");
  return m;
}

inline nlohmann::json confusion_json(const ConfusionMatrix& c) {
  return {{"tp", c.tp}, {"fn", c.fn}, {"tn", c.tn}, {"fp", c.fp}};
}

inline ConfusionMatrix confusion_from_json(const nlohmann::json& j) {
  ConfusionMatrix c;
  c.tp = j.at("tp").get<long>();
  c.fn = j.at("fn").get<long>();
  c.tn = j.at("tn").get<long>();
  c.fp = j.at("fp").get<long>();
  return c;
}

inline nlohmann::json plan_json(const AugmentationPlan& p) {
  auto cls = [](const AugPlanClass& c) {
    return nlohmann::json{{"class_total", c.class_total},
                          {"base_train", c.base_train},
                          {"test", c.test},
                          {"generated_added", c.generated_added},
                          {"final_train", c.final_train}};
  };
  return {{"ratio", p.ratio},
          {"normal", cls(p.normal)},
          {"bipolar", cls(p.bipolar)},
          {"warnings", p.warnings}};
}

inline AugmentationPlan plan_from_json(const nlohmann::json& j) {
  AugmentationPlan p;
  p.ratio = j.at("ratio").get<double>();
  auto cls = [](const nlohmann::json& c) {
    AugPlanClass out;
    out.class_total = c.at("class_total").get<long>();
    out.base_train = c.at("base_train").get<long>();
    out.test = c.at("test").get<long>();
    out.generated_added = c.at("generated_added").get<long>();
    out.final_train = c.at("final_train").get<long>();
    return out;
  };
  p.normal = cls(j.at("normal"));
  p.bipolar = cls(j.at("bipolar"));
  p.warnings = j.at("warnings").get<std::vector<std::string>>();
  return p;
}

}  // namespace detail

inline void write_experiment_log(const std::string& path,
                                 const ExperimentReport& report) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open experiment log for writing: " + path);
  nlohmann::json meta = {{"type", "meta"},
                         {"seed", report.seed},
                         {"config", report.config_echo}};
  os << meta.dump() << "\n";
  for (const auto& r : report.rows) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& cm : r.fold_confusions) {
      folds.push_back(detail::confusion_json(cm));
    }
    nlohmann::json row = {
        {"type", "row"},
        {"ratio", r.plan.ratio},
        {"plan", detail::plan_json(r.plan)},
        {"fold_confusions", folds},
        {"cv_confusion", detail::confusion_json(r.cv_confusion)},
        {"cv_metrics", detail::metrics_json(r.cv_metrics)},
        {"test_confusion", detail::confusion_json(r.test_confusion)},
        {"test_metrics", detail::metrics_json(r.test_metrics)},
        {"wall_seconds", r.wall_seconds},
        {"seed", r.seed},
        {"test_ids", r.test_ids},
        {"fold_val_ids", r.fold_val_ids},
        {"generated_ids", r.generated_ids},
    };
    os << row.dump() << "\n";
  }
  if (!os) throw IoError("failed writing experiment log: " + path);
}

inline ExperimentReport read_experiment_log(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open experiment log: " + path);
  ExperimentReport report;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "meta") {
      report.seed = j.at("seed").get<std::uint64_t>();
      report.config_echo =
          j.at("config").get<std::map<std::string, std::string>>();
      continue;
    }
    RatioResult r;
    r.plan = detail::plan_from_json(j.at("plan"));
    for (const auto& cm : j.at("fold_confusions")) {
      r.fold_confusions.push_back(detail::confusion_from_json(cm));
    }
    r.cv_confusion = detail::confusion_from_json(j.at("cv_confusion"));
    r.cv_metrics = detail::metrics_from_json(j.at("cv_metrics"));
    r.test_confusion = detail::confusion_from_json(j.at("test_confusion"));
    r.test_metrics = detail::metrics_from_json(j.at("test_metrics"));
    r.wall_seconds = j.at("wall_seconds").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.test_ids = j.at("test_ids").get<std::vector<std::string>>();
    r.fold_val_ids =
        j.at("fold_val_ids").get<std::vector<std::vector<std::string>>>();
    r.generated_ids = j.at("generated_ids").get<std::vector<std::string>>();
    report.rows.push_back(std::move(r));
  }
  return report;
}

// Stratified train/test split: per class, round(fraction * count) samples go
// to the test side, chosen by seeded shuffle.
inline std::vector<bool> split_train_test(
    const std::vector<LabeledSample>& samples, double test_fraction,
    std::uint64_t seed) {
  if (test_fraction < 0.0 || test_fraction >= 1.0) {
    throw ContractError("split_train_test: fraction must be in [0, 1)");
  }
  std::map<Label, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    by_class[samples[i].label].push_back(i);
  }
  std::vector<bool> is_test(samples.size(), false);
  for (auto& [label, idx] : by_class) {
    Rng rng(hash_str(hash_combine(seed, std::uint64_t(label)), "split"));
    rng.shuffle(idx);
    const std::size_t n_test = std::size_t(
        std::lround(test_fraction * double(idx.size())));
    for (std::size_t i = 0; i < n_test; ++i) is_test[idx[i]] = true;
  }
  return is_test;
}

}  // namespace volgan
