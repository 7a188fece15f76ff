#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmf {

// Mean of the two class recalls. Labels are 0/1; both classes must occur in truth.
double balanced_accuracy_binary(std::span<const int> pred, std::span<const int> truth);

// Mean per-class recall over classes 0..k-1; every class must occur in truth.
// k = 0 means "one more than the largest label seen".
double balanced_accuracy_multiclass(std::span<const int> pred, std::span<const int> truth, std::size_t k = 0);

double accuracy(std::span<const int> pred, std::span<const int> truth);

double mae(std::span<const double> pred, std::span<const double> truth);

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t k = 0;
  std::vector<std::size_t> counts;

  explicit ConfusionMatrix(std::size_t k_ = 0) : k(k_), counts(k_ * k_, 0) {}
  std::size_t& operator()(std::size_t truth, std::size_t pred) { return counts[truth * k + pred]; }
  std::size_t operator()(std::size_t truth, std::size_t pred) const { return counts[truth * k + pred]; }
  std::size_t total() const;
};

struct ClassificationReport {
  ConfusionMatrix confusion;
  std::vector<double> precision;  // 0 for a class that is never predicted
  std::vector<double> recall;     // 0 for a class that never occurs
  std::vector<double> f1;         // 0 when precision + recall = 0
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
};

ClassificationReport classification_report(std::span<const int> pred, std::span<const int> truth, std::size_t k);

struct MetricReport {
  std::size_t n = 0;
  std::optional<double> balanced_accuracy;  // absent when a class is missing from truth
  std::optional<double> accuracy;
  std::optional<double> mae;
  std::optional<double> macro_f1;
  std::optional<double> precision;  // macro average
  std::optional<double> recall;     // macro average

  bool operator==(const MetricReport&) const = default;
};

// Fills every classification field; balanced accuracy is left empty instead of throwing.
MetricReport evaluate_classification(std::span<const int> pred, std::span<const int> truth, std::size_t k);

// MAE plus classification metrics over the rounded, clamped level index.
MetricReport evaluate_severity(std::span<const double> pred, std::span<const int> truth, std::size_t levels);

std::string to_json(const MetricReport& report);
MetricReport metric_report_from_json(std::string_view text);

// "| name | BA | BA (w/ norm) |" with values as percentages to one decimal.
std::string markdown_row(std::string_view name, const MetricReport& plain, const MetricReport* normalized = nullptr);

}  // namespace mmf
