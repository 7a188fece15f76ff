#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmfusion/embeddings.hpp"
#include "mmfusion/matrix.hpp"
#include "mmfusion/nn.hpp"
#include "mmfusion/svm.hpp"

namespace mmf {

// ---- data level -------------------------------------------------------------

// Row-wise concatenation of per-modality chunk matrices of one session.
// Throws AlignmentError naming the session and the chunk counts when they differ.
EmbeddingMatrix fuse_data_level(std::span<const EmbeddingMatrix> modalities);
EmbeddingMatrix fuse_data_level(const EmbeddingMatrix& text, const EmbeddingMatrix& audio,
                                const EmbeddingMatrix& video);

// ---- feature level ----------------------------------------------------------

enum class FeatureMode { FullTraining, FrozenBackbone };

std::string_view to_string(FeatureMode m);
FeatureMode parse_feature_mode(std::string_view s);

// Concatenates per-modality feature vectors; an empty list is a ConfigError.
std::vector<double> fuse_features(std::span<const std::vector<double>> per_modality);

// Fixed per-modality networks feeding a separately trained head. The backbones are
// copied in and never updated.
struct FrozenFusion {
  std::vector<nn::TrainedModel> backbones;
  nn::TrainedModel head;  // MLP over the concatenated penultimate vectors
};

std::vector<double> frozen_features(std::span<const nn::TrainedModel> backbones, std::span<const Matrix> inputs);

// head_hidden lists the fused head's hidden widths; empty means a single linear layer.
FrozenFusion train_frozen_fusion(std::span<const nn::TrainedModel> backbones, std::span<const nn::JointSample> train,
                                 const nn::Head& head, std::span<const std::size_t> head_hidden,
                                 const nn::TrainConfig& config, std::span<const nn::JointSample> dev = {});

nn::ForwardResult forward(const FrozenFusion& fusion, std::span<const Matrix> inputs);

// ---- decision level ---------------------------------------------------------

// One session's per-modality outputs. Predictions are class indices (binary, multiclass)
// or real severity values; logits may be empty when a channel has none.
struct DecisionRecord {
  std::int64_t session_id = 0;
  std::vector<std::string> modalities;
  std::vector<double> predictions;
  std::vector<std::vector<double>> logits;
  std::optional<double> llm_prediction;

  bool operator==(const DecisionRecord&) const = default;
};

enum class DecisionKind { Binary, Logits, Multiclass };

struct DecisionFusion {
  DecisionKind kind = DecisionKind::Binary;
  bool include_llm = false;
  std::size_t classes = 2;
  MulticlassSvm svm;
};

// {0,1} predictions mapped to {-1,+1}, LLM channel last. Throws DataError listing the
// sessions that lack an LLM prediction when include_llm is set.
Matrix decision_binary_features(std::span<const DecisionRecord> records, bool include_llm);
// Per-channel one-hot encoding of class predictions.
Matrix decision_onehot_features(std::span<const DecisionRecord> records, std::size_t classes, bool include_llm);
Matrix decision_logit_features(std::span<const DecisionRecord> records);

DecisionFusion fuse_decision_binary(std::span<const DecisionRecord> records, std::span<const int> labels,
                                    bool include_llm, const KernelSpec& kernel = {}, double C = 1.0);
DecisionFusion fuse_decision_logits(std::span<const DecisionRecord> records, std::span<const int> labels,
                                    std::size_t classes = 2, const KernelSpec& kernel = {}, double C = 1.0);
DecisionFusion fuse_decision_multiclass(std::span<const DecisionRecord> records, std::span<const int> labels,
                                        std::size_t classes, bool include_llm, const KernelSpec& kernel = {},
                                        double C = 1.0);

std::vector<int> predict(const DecisionFusion& fusion, std::span<const DecisionRecord> records);

// Least-squares blend with intercept of the per-modality severity values (plus the LLM
// value when included). A rank-deficient design falls back to the plain average.
struct SeverityCombiner {
  bool include_llm = false;
  double intercept = 0.0;
  std::vector<double> weights;
  bool equal_weight_fallback = false;
};

SeverityCombiner fuse_severity_decision(std::span<const DecisionRecord> records, std::span<const double> targets,
                                        bool include_llm);
std::vector<double> predict(const SeverityCombiner& combiner, std::span<const DecisionRecord> records);

// ---- external LLM predictions -----------------------------------------------

// Tasks: dep_binary, ptsd_binary, multiclass, dep_severity, ptsd_severity.
void validate_llm_task(std::string_view task);
double llm_value_limit(std::string_view task);

// JSONL of {"session_id": n, "task": "...", "prediction": v}; only lines for `task` are kept.
// Duplicate ids are a DataError; values outside the task's label range a ValidationError.
std::map<std::int64_t, double> load_llm_predictions(const std::filesystem::path& path, std::string_view task);

void save_decision_records(const std::filesystem::path& path, std::span<const DecisionRecord> records);
std::vector<DecisionRecord> load_decision_records(const std::filesystem::path& path);

}  // namespace mmf
