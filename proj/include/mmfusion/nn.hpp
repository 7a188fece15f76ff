#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmfusion/matrix.hpp"

namespace mmf::nn {

enum class Architecture { MLP, CNN, BiLSTM, CNN_BiLSTM };
enum class Activation { ReLU, Tanh };
enum class HeadKind { BinaryLogits, MulticlassLogits, Regression };

std::string_view to_string(Architecture a);
std::string_view to_string(Activation a);
std::string_view to_string(HeadKind h);
Architecture parse_architecture(std::string_view s);
Activation parse_activation(std::string_view s);
HeadKind parse_head_kind(std::string_view s);

struct Head {
  HeadKind kind = HeadKind::BinaryLogits;
  std::size_t classes = 2;  // MulticlassLogits only

  std::size_t outputs() const noexcept;
  bool operator==(const Head&) const = default;
};

// Layer layout per architecture:
//   MLP         dense(+activation) for each width in `hidden`, then head
//   CNN         conv1d over time (kernel_size x input_dim per filter, no padding),
//               activation, global max-pool over time, head
//   BiLSTM      forward and backward LSTM, final hidden states concatenated, head
//   CNN_BiLSTM  conv1d + activation feeding the BiLSTM
// Sequences shorter than kernel_size are zero-padded at the end to kernel_size.
struct ModelSpec {
  Architecture architecture = Architecture::MLP;
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden;  // MLP layer widths
  std::size_t kernel_size = 3;
  std::size_t n_filters = 8;
  std::size_t lstm_hidden = 8;
  Head head;
  Activation activation = Activation::ReLU;

  bool operator==(const ModelSpec&) const = default;
};

void validate_spec(const ModelSpec& spec);
// Width of the vector that feeds the head.
std::size_t penultimate_dim(const ModelSpec& spec);

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  bool operator==(const Tensor&) const = default;
};

using ParamSet = std::map<std::string, Tensor>;

std::uint64_t parameter_checksum(const ParamSet& params);

struct TrainedModel {
  ModelSpec spec;
  ParamSet parameters;
  std::vector<double> train_history;  // mean training loss per epoch
  std::vector<double> dev_history;    // mean Dev loss per epoch, when Dev data was given
  std::size_t best_epoch = 0;         // 1-based; the Dev-loss minimum under early stopping
  std::uint64_t seed = 0;
};

enum class Optimizer { SGD, Adam };

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::optional<std::size_t> early_stop_patience;  // epochs without Dev-loss improvement
};

void validate_train_config(const TrainConfig& config);

// Classification heads take the class index as the target.
struct Sample {
  Matrix x;
  double target = 0.0;
};

struct ForwardResult {
  std::vector<double> output;       // logits, or a single regression value
  std::vector<double> penultimate;  // vector feeding the head
};

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases, drawn in
// parameter-name order from mmf::Rng(seed).
TrainedModel init_model(const ModelSpec& spec, std::uint64_t seed);

ForwardResult forward(const TrainedModel& model, const Matrix& x);

// Softmax cross-entropy for logit heads (log-sum-exp stabilised), squared error for regression.
double loss(const Head& head, std::span<const double> output, double target);

// Gradient of the per-sample loss with respect to every parameter.
ParamSet backward(const TrainedModel& model, const Matrix& x, double target);

// Mini-batch training; gradients are averaged over each batch, variable-length sequences
// need no padding. Samples are first put in a canonical order (content digest), so the
// result depends only on the multiset of samples and the seed.
TrainedModel train(const ModelSpec& spec, std::span<const Sample> data, const TrainConfig& config,
                   std::span<const Sample> dev = {});

Matrix extract_features(const TrainedModel& model, std::span<const Matrix> xs);

int predicted_class(std::span<const double> output);

// Several trunks whose penultimate vectors are concatenated into one shared linear head.
// Parameters are named "branch<i>.<layer>..." plus "head.W"/"head.b".
struct JointSpec {
  std::vector<ModelSpec> branches;  // each branch's own head field is ignored
  Head head;
};

struct JointModel {
  JointSpec spec;
  ParamSet parameters;
  std::vector<double> train_history;
  std::vector<double> dev_history;
  std::size_t best_epoch = 0;
  std::uint64_t seed = 0;
};

struct JointSample {
  std::vector<Matrix> inputs;  // one per branch
  double target = 0.0;
};

JointModel init_joint(const JointSpec& spec, std::uint64_t seed);
ForwardResult forward(const JointModel& model, std::span<const Matrix> inputs);
ParamSet backward(const JointModel& model, std::span<const Matrix> inputs, double target);
JointModel train_joint(const JointSpec& spec, std::span<const JointSample> data, const TrainConfig& config,
                       std::span<const JointSample> dev = {});

// Checkpoint: <stem>.json manifest (spec, seed, histories, parameter table) plus
// <stem>.bin holding the parameters as little-endian float64 at the listed offsets.
void save_checkpoint(const TrainedModel& model, const std::filesystem::path& stem);
TrainedModel load_checkpoint(const std::filesystem::path& stem);

}  // namespace mmf::nn
