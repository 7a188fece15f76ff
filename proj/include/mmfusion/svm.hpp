#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmfusion/matrix.hpp"

namespace mmf {

enum class KernelKind { Linear, RBF };

std::string_view to_string(KernelKind k);
KernelKind parse_kernel_kind(std::string_view s);

struct KernelSpec {
  KernelKind kind = KernelKind::Linear;
  std::optional<double> gamma;  // RBF only; unset means 1 / (dim * variance of the training features)

  bool operator==(const KernelSpec&) const = default;
};

double kernel_value(const KernelSpec& k, std::span<const double> a, std::span<const double> b);

// Binary model over labels -1/+1. f(x) = sum_i alphas_signed[i] * K(sv_i, x) + bias.
struct SvmModel {
  KernelSpec kernel;  // gamma always resolved for RBF
  Matrix support_vectors;
  std::vector<double> alphas_signed;
  double bias = 0.0;
  double C = 1.0;

  bool operator==(const SvmModel&) const = default;
};

struct SvmFit {
  SvmModel model;
  std::vector<double> alphas;           // one per training row, in [0, C]
  std::vector<double> objective_trace;  // dual objective after every SMO step
  std::size_t iterations = 0;
  double kkt_residual = 0.0;            // largest KKT violation over the training rows
};

constexpr std::size_t kSvmMaxIterations = 100000;

// SMO with maximal-violating-pair selection over a precomputed kernel matrix.
// Stops once the violating-pair gap drops below tol.
SvmFit solve_svm_binary(const Matrix& x, std::span<const int> y, const KernelSpec& kernel, double C,
                        double tol = 1e-3, std::size_t max_iterations = kSvmMaxIterations);

SvmModel train_svm_binary(const Matrix& x, std::span<const int> y, const KernelSpec& kernel, double C,
                          double tol = 1e-3);

std::vector<double> decision_values(const SvmModel& model, const Matrix& x);

struct SvmPrediction {
  std::vector<int> labels;  // -1/+1; a decision value of exactly 0 maps to +1
  std::vector<double> values;
};

SvmPrediction predict(const SvmModel& model, const Matrix& x);

// Largest violation of the KKT conditions of (model, alphas) on its training data:
// alpha=0 needs y f >= 1, 0<alpha<C needs y f = 1, alpha=C needs y f <= 1.
double kkt_residual(const SvmModel& model, std::span<const double> alphas, const Matrix& x, std::span<const int> y);

// One-vs-rest over labels 0..k-1. With k = 2 this holds a single binary model whose
// positive side is class 1. Classes absent from training get no model and never win.
struct MulticlassSvm {
  std::size_t classes = 2;
  std::vector<std::optional<SvmModel>> models;

  bool operator==(const MulticlassSvm&) const = default;
};

MulticlassSvm train_svm_multiclass(const Matrix& x, std::span<const int> y, const KernelSpec& kernel, double C,
                                   double tol = 1e-3, std::size_t k = 0);

struct MulticlassPrediction {
  std::vector<int> labels;  // argmax, ties to the smallest class index
  Matrix values;            // n x k (n x 1 for the binary case)
};

MulticlassPrediction predict(const MulticlassSvm& model, const Matrix& x);

struct SearchSpace {
  std::vector<double> C = {0.1, 1.0, 10.0};
  std::vector<double> gamma;  // ignored for Linear; empty means the automatic default only
  std::size_t trials = 9;
  std::uint64_t seed = 0;
};

struct TuneTrial {
  double C = 0.0;
  std::optional<double> gamma;
  double score = 0.0;  // -infinity when the candidate failed to train or score
};

struct TuneResult {
  double C = 0.0;
  std::optional<double> gamma;
  double score = 0.0;
  std::vector<TuneTrial> trials;  // in evaluation order
};

// Objectives: "balanced_accuracy", "accuracy", "macro_f1". Every candidate is tried when
// trials covers the grid, otherwise a seeded sample without replacement. Ties keep the
// earlier candidate in grid order.
TuneResult tune(const Matrix& x_train, std::span<const int> y_train, const Matrix& x_dev, std::span<const int> y_dev,
                KernelKind kernel, const SearchSpace& space, std::string_view objective, std::size_t k = 0,
                double tol = 1e-3);

// <stem>.json holds kernel, C, biases and signed alphas; <stem>.bin holds the support
// vectors as little-endian float64.
void save_svm(const MulticlassSvm& model, const std::filesystem::path& stem);
MulticlassSvm load_svm(const std::filesystem::path& stem);

}  // namespace mmf
