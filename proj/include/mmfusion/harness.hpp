#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmfusion/chunking.hpp"
#include "mmfusion/corpus.hpp"
#include "mmfusion/embeddings.hpp"
#include "mmfusion/fusion.hpp"
#include "mmfusion/metrics.hpp"
#include "mmfusion/nn.hpp"
#include "mmfusion/svm.hpp"

namespace mmf {

enum class Task { DepBinary, PtsdBinary, DepSeverity, PtsdSeverity, Multiclass };

std::string_view to_string(Task t);
Task parse_task(std::string_view s);
bool is_severity(Task t);
// Classes for classification tasks, severity levels for severity tasks.
std::size_t task_classes(Task t);
nn::Head task_head(Task t);
// Class index, or severity level index for severity tasks.
int task_label(Task t, const Session& s);

enum class FusionKind {
  None,
  DataLevel,
  FeatureLevel,
  DecisionBinary,
  DecisionLogits,
  DecisionMulticlass,
  DecisionSeverity,
};

std::string_view to_string(FusionKind k);
FusionKind parse_fusion_kind(std::string_view s);

enum class HeadChoice { MLP, SVM };

// Where chunk vectors come from. Planted reads the synthetic generator's per-utterance
// latents (mean over each chunk's utterances) through an in-memory store.
enum class EmbeddingSource { Planted, Deterministic, Store, Remote };

std::string_view to_string(EmbeddingSource s);
EmbeddingSource parse_embedding_source(std::string_view s);

struct SvmHeadConfig {
  KernelSpec kernel;
  double C = 1.0;
  double tol = 1e-3;
  std::optional<SearchSpace> search;  // tuned on Dev when present
};

struct ModalityConfig {
  std::string name = "text";  // text | audio | video
  std::string format = "utterances_10_overlap_4";
  bool normalize = false;
  nn::ModelSpec model;  // input_dim and head are filled in from the data and task
  HeadChoice head = HeadChoice::MLP;
  SvmHeadConfig svm;
};

struct EmbeddingConfig {
  EmbeddingSource source = EmbeddingSource::Planted;
  ProviderConfig provider;  // Deterministic, Store, Remote
  bool cache = true;        // reuse vectors stored under <output_dir>/cache
};

struct FusionConfig {
  FusionKind kind = FusionKind::None;
  FeatureMode mode = FeatureMode::FrozenBackbone;
  bool include_llm = false;
  std::string llm_predictions;        // JSONL path
  std::vector<std::size_t> head_hidden;  // feature level, frozen backbone
  nn::ModelSpec model;                 // data level; input_dim is filled in
  KernelSpec kernel;                   // decision level
  double C = 1.0;
};

struct CorpusConfig {
  std::string path;                       // JSONL corpus, or
  std::optional<SyntheticSpec> synthetic;  // generated with seeds.data
};

struct Seeds {
  std::uint64_t data = 0;
  std::uint64_t init = 0;
  std::uint64_t search = 0;
};

struct ExperimentConfig {
  std::string name = "experiment";
  CorpusConfig corpus;
  Task task = Task::DepBinary;
  EmbeddingConfig embedding;
  std::vector<ModalityConfig> modalities;
  FusionConfig fusion;
  nn::TrainConfig train;
  Seeds seeds;
  std::string output_dir;  // empty: nothing is written
};

// Parses and validates; ConfigError messages name the offending field.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Canonical JSON (sorted keys, every field present).
std::string config_to_json(const ExperimentConfig& config);
void validate_config(const ExperimentConfig& config);
// Hash of the canonical JSON without name and output_dir, as 16 hex digits.
std::string config_digest(const ExperimentConfig& config);

// Counts uses of Test-split information by learned components.
struct AccessAudit {
  std::size_t test_target_reads = 0;
  std::size_t test_rows_fitted = 0;

  bool operator==(const AccessAudit&) const = default;
};

struct RunResult {
  std::string digest;
  ExperimentConfig config;
  std::map<std::string, MetricReport> metrics;               // train / dev / test of the final predictor
  std::map<std::string, MetricReport> modality_dev_metrics;  // per modality, before fusion
  std::map<std::string, MetricReport> modality_test_metrics;
  std::map<std::string, std::string> model_checksums;
  std::vector<std::string> artifacts;
  std::vector<std::string> notes;
  AccessAudit audit_before_eval;
  bool failed = false;
  std::string failure;
  double wall_time_s = 0.0;
};

// Executes the configured stages; stage failures surface as StageError.
RunResult run(const ExperimentConfig& config);

// Hash of metrics and model checksums (wall time and paths excluded).
std::string result_fingerprint(const RunResult& result);

std::string run_result_to_json(const RunResult& result);
RunResult run_result_from_json(std::string_view text);

// ---- pipeline building blocks -------------------------------------------------

// Store of chunk vectors built from planted latents, keyed like the real providers'
// content (chunk text for text, audio_content_key for audio).
EmbeddingStore planted_store(std::span<const Session> sessions, std::string_view modality, const FormatSpec& format);

// One matrix per session. Audio content keys and text are embedded through `provider`;
// video comes from frame max-pooling and ignores it.
std::vector<EmbeddingMatrix> embed_modality(std::span<const Session> sessions, std::string_view modality,
                                            const FormatSpec& format, const EmbeddingProvider* provider);

// Rows fed to a network: MLP inputs are mean-pooled to one row.
Matrix model_input(const EmbeddingMatrix& m, nn::Architecture architecture);

struct MetricDelta {
  std::string metric;
  double before = 0.0;
  double after = 0.0;
  double delta = 0.0;  // after - before
  bool improved = false;  // higher is better, except MAE
};

std::vector<MetricDelta> compare_reports(const MetricReport& before, const MetricReport& after);

struct SwapReport {
  std::vector<int> mlp_predictions;
  std::vector<int> svm_predictions;
  MetricReport mlp;
  MetricReport svm;
  std::vector<MetricDelta> deltas;  // svm relative to mlp
  MulticlassSvm model;
};

// Replaces the trained network's linear head with an SVM fitted on Train penultimate features.
SwapReport swap_head_to_svm(const nn::TrainedModel& trained, std::span<const nn::Sample> train,
                            std::span<const nn::Sample> test, const KernelSpec& kernel, double C,
                            double tol = 1e-3);

// ---- report tables --------------------------------------------------------------

// Formats: rows per (modality, format, head); BA and BA (w/ norm) columns.
// Models: rows per (modality, format, architecture, head); BA column.
// Fusion: rows per fusion strategy and modality set; BA column.
// Severity: rows per configuration; MAE column (lower is better).
enum class TableLayout { Formats, Models, Fusion, Severity };

std::string_view to_string(TableLayout l);
TableLayout parse_table_layout(std::string_view s);

struct Tables {
  std::string markdown;
  std::string csv;
};

// Best Test value per group is bold; the row with the best Dev value per group carries a dagger.
Tables report_tables(std::span<const RunResult> results, TableLayout layout);

}  // namespace mmf
