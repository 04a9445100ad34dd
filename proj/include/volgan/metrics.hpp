#pragma once

#include <cstdio>
#include <optional>
#include <string>

#include "volgan/common.hpp"

namespace volgan {

// Binary confusion counts with bipolar as the positive class.
struct ConfusionMatrix {
  long tp = 0;
  long fn = 0;
  long tn = 0;
  long fp = 0;

  long total() const { return tp + fn + tn + fp; }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    tp += other.tp;
    fn += other.fn;
    tn += other.tn;
    fp += other.fp;
    return *this;
  }
};

// A metric whose denominator is zero is reported as absent, never NaN.
struct MetricSet {
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> precision;
  std::optional<double> f1;
};

inline MetricSet compute_metrics(const ConfusionMatrix& c) {
  if (c.tp < 0 || c.fn < 0 || c.tn < 0 || c.fp < 0) {
    throw ContractError("compute_metrics: negative confusion counts");
  }
  if (c.total() == 0) {
    throw ContractError("compute_metrics: empty confusion matrix");
  }
  MetricSet m;
  m.accuracy = double(c.tp + c.tn) / double(c.total());
  if (c.tp + c.fn > 0) m.sensitivity = double(c.tp) / double(c.tp + c.fn);
  if (c.tn + c.fp > 0) m.specificity = double(c.tn) / double(c.tn + c.fp);
  if (c.tp + c.fp > 0) m.precision = double(c.tp) / double(c.tp + c.fp);
  if (m.precision && m.sensitivity && (*m.precision + *m.sensitivity) > 0.0) {
    m.f1 = 2.0 * *m.precision * *m.sensitivity /
           (*m.precision + *m.sensitivity);
  }
  return m;
}

// "60.3%" with one decimal, or "n/a" for an undefined metric.
inline std::string format_metric(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", *v * 100.0);
  return buf;
}

}  // namespace volgan
