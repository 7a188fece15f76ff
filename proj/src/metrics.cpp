#include "mmfusion/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json_util.hpp"
#include "mmfusion/error.hpp"

namespace mmf {
namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw ParameterError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
  if (a == 0) throw ParameterError(std::string(what) + ": empty input");
}

std::size_t infer_k(std::span<const int> pred, std::span<const int> truth) {
  int hi = 0;
  for (int v : pred) hi = std::max(hi, v);
  for (int v : truth) hi = std::max(hi, v);
  return static_cast<std::size_t>(hi) + 1;
}

void check_labels(std::span<const int> labels, std::size_t k, const char* what) {
  for (int v : labels)
    if (v < 0 || static_cast<std::size_t>(v) >= k)
      throw ValidationError(std::string(what) + ": label " + std::to_string(v) + " outside [0, " +
                            std::to_string(k) + ")");
}

}  // namespace

double balanced_accuracy_binary(std::span<const int> pred, std::span<const int> truth) {
  check_lengths(pred.size(), truth.size(), "balanced_accuracy_binary");
  check_labels(pred, 2, "balanced_accuracy_binary");
  check_labels(truth, 2, "balanced_accuracy_binary");
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] == 1) (pred[i] == 1 ? tp : fn)++;
    else (pred[i] == 0 ? tn : fp)++;
  }
  if (tp + fn == 0 || tn + fp == 0)
    throw UndefinedMetricError("balanced accuracy undefined: truth contains a single class");
  return 0.5 * (double(tp) / double(tp + fn) + double(tn) / double(tn + fp));
}

double balanced_accuracy_multiclass(std::span<const int> pred, std::span<const int> truth, std::size_t k) {
  check_lengths(pred.size(), truth.size(), "balanced_accuracy_multiclass");
  if (k == 0) k = infer_k(pred, truth);
  check_labels(pred, k, "balanced_accuracy_multiclass");
  check_labels(truth, k, "balanced_accuracy_multiclass");
  std::vector<std::size_t> hit(k, 0), support(k, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++support[truth[i]];
    if (pred[i] == truth[i]) ++hit[truth[i]];
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    if (support[c] == 0)
      throw UndefinedMetricError("balanced accuracy undefined: class " + std::to_string(c) + " absent from truth");
    sum += double(hit[c]) / double(support[c]);
  }
  return sum / double(k);
}

double accuracy(std::span<const int> pred, std::span<const int> truth) {
  check_lengths(pred.size(), truth.size(), "accuracy");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return double(hit) / double(pred.size());
}

double mae(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred.size(), truth.size(), "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(truth[i] - pred[i]);
  return s / double(pred.size());
}

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

ClassificationReport classification_report(std::span<const int> pred, std::span<const int> truth, std::size_t k) {
  check_lengths(pred.size(), truth.size(), "classification_report");
  if (k == 0) throw ParameterError("classification_report: k must be >= 1");
  check_labels(pred, k, "classification_report");
  check_labels(truth, k, "classification_report");
  ClassificationReport r;
  r.confusion = ConfusionMatrix(k);
  for (std::size_t i = 0; i < pred.size(); ++i) ++r.confusion(truth[i], pred[i]);
  r.precision.assign(k, 0.0);
  r.recall.assign(k, 0.0);
  r.f1.assign(k, 0.0);
  std::size_t diag = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t predicted = 0, actual = 0;
    for (std::size_t o = 0; o < k; ++o) {
      predicted += r.confusion(o, c);
      actual += r.confusion(c, o);
    }
    const double tp = double(r.confusion(c, c));
    diag += r.confusion(c, c);
    if (predicted > 0) r.precision[c] = tp / double(predicted);
    if (actual > 0) r.recall[c] = tp / double(actual);
    const double pr = r.precision[c] + r.recall[c];
    if (pr > 0.0) r.f1[c] = 2.0 * r.precision[c] * r.recall[c] / pr;
    r.macro_precision += r.precision[c];
    r.macro_recall += r.recall[c];
    r.macro_f1 += r.f1[c];
  }
  r.macro_precision /= double(k);
  r.macro_recall /= double(k);
  r.macro_f1 /= double(k);
  r.accuracy = double(diag) / double(pred.size());
  return r;
}

MetricReport evaluate_classification(std::span<const int> pred, std::span<const int> truth, std::size_t k) {
  const auto cr = classification_report(pred, truth, k);
  MetricReport m;
  m.n = pred.size();
  m.accuracy = cr.accuracy;
  m.macro_f1 = cr.macro_f1;
  m.precision = cr.macro_precision;
  m.recall = cr.macro_recall;
  try {
    m.balanced_accuracy = k == 2 ? balanced_accuracy_binary(pred, truth) : balanced_accuracy_multiclass(pred, truth, k);
  } catch (const UndefinedMetricError&) {
  }
  return m;
}

MetricReport evaluate_severity(std::span<const double> pred, std::span<const int> truth, std::size_t levels) {
  check_lengths(pred.size(), truth.size(), "evaluate_severity");
  std::vector<double> t(truth.begin(), truth.end());
  std::vector<int> rounded(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = std::round(pred[i]);
    rounded[i] = static_cast<int>(std::clamp(r, 0.0, double(levels - 1)));
  }
  MetricReport m = evaluate_classification(rounded, truth, levels);
  m.mae = mae(pred, t);
  return m;
}

std::string to_json(const MetricReport& r) {
  detail::json j;
  j["n"] = r.n;
  auto put = [&](const char* key, const std::optional<double>& v) {
    j[key] = v ? detail::json(*v) : detail::json(nullptr);
  };
  put("balanced_accuracy", r.balanced_accuracy);
  put("accuracy", r.accuracy);
  put("mae", r.mae);
  put("macro_f1", r.macro_f1);
  put("precision", r.precision);
  put("recall", r.recall);
  return j.dump();
}

MetricReport metric_report_from_json(std::string_view text) {
  detail::json j;
  try {
    j = detail::json::parse(text);
  } catch (const detail::json::exception& e) {
    throw ValidationError(std::string("metric report: ") + e.what());
  }
  MetricReport r;
  r.n = detail::require<std::size_t>(j, "n");
  auto get = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return detail::require<double>(j, key);
  };
  r.balanced_accuracy = get("balanced_accuracy");
  r.accuracy = get("accuracy");
  r.mae = get("mae");
  r.macro_f1 = get("macro_f1");
  r.precision = get("precision");
  r.recall = get("recall");
  return r;
}

std::string markdown_row(std::string_view name, const MetricReport& plain, const MetricReport* normalized) {
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * *v);
    return std::string(buf);
  };
  std::string row = "| " + std::string(name) + " | " + cell(plain.balanced_accuracy) + " | ";
  row += normalized ? cell(normalized->balanced_accuracy) : std::string("-");
  row += " |";
  return row;
}

}  // namespace mmf
