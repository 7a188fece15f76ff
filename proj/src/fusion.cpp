#include "mmfusion/fusion.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <set>

#include "json_util.hpp"
#include "mmfusion/error.hpp"

namespace mmf {

EmbeddingMatrix fuse_data_level(std::span<const EmbeddingMatrix> modalities) {
  if (modalities.empty()) throw ConfigError("data-level fusion needs at least one modality");
  const auto& first = modalities.front();
  for (const auto& m : modalities) {
    if (m.session_id != first.session_id)
      throw AlignmentError("data-level fusion: session " + std::to_string(first.session_id) +
                           " combined with session " + std::to_string(m.session_id));
    if (m.rows.rows() != first.rows.rows()) {
      std::string counts;
      for (const auto& o : modalities) counts += (counts.empty() ? "" : " vs ") + std::to_string(o.rows.rows());
      throw AlignmentError("data-level fusion: session " + std::to_string(first.session_id) +
                           " has mismatched chunk counts (" + counts + ")");
    }
  }
  EmbeddingMatrix out;
  out.session_id = first.session_id;
  std::size_t width = 0;
  for (const auto& m : modalities) {
    width += m.dim();
    out.format_name += (out.format_name.empty() ? "" : "+") + m.format_name;
  }
  out.rows = Matrix(first.rows.rows(), width);
  for (std::size_t r = 0; r < out.rows.rows(); ++r) {
    auto dst = out.rows.row(r).begin();
    for (const auto& m : modalities) dst = std::copy(m.rows.row(r).begin(), m.rows.row(r).end(), dst);
  }
  return out;
}

EmbeddingMatrix fuse_data_level(const EmbeddingMatrix& text, const EmbeddingMatrix& audio,
                                const EmbeddingMatrix& video) {
  const EmbeddingMatrix all[3] = {text, audio, video};
  return fuse_data_level(all);
}

std::string_view to_string(FeatureMode m) {
  return m == FeatureMode::FullTraining ? "full_training" : "frozen_backbone";
}

FeatureMode parse_feature_mode(std::string_view s) {
  if (s == "full_training") return FeatureMode::FullTraining;
  if (s == "frozen_backbone") return FeatureMode::FrozenBackbone;
  throw ValidationError("unknown feature fusion mode '" + std::string(s) + "'");
}

std::vector<double> fuse_features(std::span<const std::vector<double>> per_modality) {
  if (per_modality.empty()) throw ConfigError("feature-level fusion needs at least one modality");
  std::vector<double> out;
  for (const auto& v : per_modality) out.insert(out.end(), v.begin(), v.end());
  return out;
}

std::vector<double> frozen_features(std::span<const nn::TrainedModel> backbones, std::span<const Matrix> inputs) {
  if (backbones.size() != inputs.size())
    throw ConfigError("feature-level fusion: " + std::to_string(backbones.size()) + " backbones but " +
                      std::to_string(inputs.size()) + " inputs");
  std::vector<std::vector<double>> parts;
  for (std::size_t i = 0; i < backbones.size(); ++i) parts.push_back(nn::forward(backbones[i], inputs[i]).penultimate);
  return fuse_features(parts);
}

namespace {

std::vector<nn::Sample> fused_samples(std::span<const nn::TrainedModel> backbones,
                                      std::span<const nn::JointSample> data) {
  std::vector<nn::Sample> out;
  out.reserve(data.size());
  for (const auto& s : data) {
    Matrix x(0, 0);
    x.append_row(frozen_features(backbones, s.inputs));
    out.push_back(nn::Sample{std::move(x), s.target});
  }
  return out;
}

}  // namespace

FrozenFusion train_frozen_fusion(std::span<const nn::TrainedModel> backbones, std::span<const nn::JointSample> train,
                                 const nn::Head& head, std::span<const std::size_t> head_hidden,
                                 const nn::TrainConfig& config, std::span<const nn::JointSample> dev) {
  if (backbones.empty()) throw ConfigError("feature-level fusion needs at least one modality");
  FrozenFusion f;
  f.backbones.assign(backbones.begin(), backbones.end());
  const auto tr = fused_samples(f.backbones, train);
  const auto dv = fused_samples(f.backbones, dev);
  nn::ModelSpec spec;
  spec.architecture = nn::Architecture::MLP;
  spec.input_dim = 0;
  for (const auto& b : f.backbones) spec.input_dim += nn::penultimate_dim(b.spec);
  spec.hidden.assign(head_hidden.begin(), head_hidden.end());
  spec.head = head;
  f.head = nn::train(spec, tr, config, dv);
  return f;
}

nn::ForwardResult forward(const FrozenFusion& fusion, std::span<const Matrix> inputs) {
  Matrix x(0, 0);
  x.append_row(frozen_features(fusion.backbones, inputs));
  return nn::forward(fusion.head, x);
}

namespace {

void check_channels(std::span<const DecisionRecord> records) {
  if (records.empty()) throw ValidationError("decision fusion: no records");
  const std::size_t m = records.front().predictions.size();
  if (m == 0) throw ValidationError("decision fusion: records carry no modality predictions");
  for (const auto& r : records) {
    if (r.predictions.size() != m)
      throw ValidationError("decision fusion: session " + std::to_string(r.session_id) + " has " +
                            std::to_string(r.predictions.size()) + " channels, expected " + std::to_string(m));
    if (r.modalities != records.front().modalities)
      throw ValidationError("decision fusion: session " + std::to_string(r.session_id) +
                            " lists different modalities");
  }
}

void check_llm(std::span<const DecisionRecord> records) {
  std::string missing;
  std::size_t count = 0;
  for (const auto& r : records)
    if (!r.llm_prediction) {
      if (count++ < 20) missing += (missing.empty() ? "" : ", ") + std::to_string(r.session_id);
    }
  if (count > 0)
    throw DataError("LLM prediction missing for " + std::to_string(count) + " session(s): " + missing +
                    (count > 20 ? ", ..." : ""));
}

double signed_label(double p, std::int64_t session) {
  if (p == 1.0) return 1.0;
  if (p == 0.0) return -1.0;
  throw ValidationError("decision fusion: session " + std::to_string(session) + " has non-binary prediction " +
                        std::to_string(p));
}

void check_labels(std::span<const DecisionRecord> records, std::size_t n_labels) {
  if (records.size() != n_labels)
    throw ValidationError("decision fusion: " + std::to_string(records.size()) + " records but " +
                          std::to_string(n_labels) + " labels");
}

}  // namespace

Matrix decision_binary_features(std::span<const DecisionRecord> records, bool include_llm) {
  check_channels(records);
  if (include_llm) check_llm(records);
  Matrix x(0, records.front().predictions.size() + (include_llm ? 1 : 0));
  std::vector<double> row;
  for (const auto& r : records) {
    row.clear();
    for (double p : r.predictions) row.push_back(signed_label(p, r.session_id));
    if (include_llm) row.push_back(signed_label(*r.llm_prediction, r.session_id));
    x.append_row(row);
  }
  return x;
}

Matrix decision_onehot_features(std::span<const DecisionRecord> records, std::size_t classes, bool include_llm) {
  check_channels(records);
  if (include_llm) check_llm(records);
  const std::size_t channels = records.front().predictions.size() + (include_llm ? 1 : 0);
  Matrix x(records.size(), channels * classes);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    for (std::size_t c = 0; c < channels; ++c) {
      const double p = c < r.predictions.size() ? r.predictions[c] : *r.llm_prediction;
      if (p != std::floor(p) || p < 0 || p >= double(classes))
        throw ValidationError("decision fusion: session " + std::to_string(r.session_id) + " has class " +
                              std::to_string(p) + " outside [0, " + std::to_string(classes) + ")");
      x(i, c * classes + std::size_t(p)) = 1.0;
    }
  }
  return x;
}

Matrix decision_logit_features(std::span<const DecisionRecord> records) {
  check_channels(records);
  Matrix x(0, 0);
  std::vector<double> row;
  for (const auto& r : records) {
    if (r.logits.size() != r.predictions.size())
      throw ValidationError("decision fusion: session " + std::to_string(r.session_id) + " lacks logits");
    row.clear();
    for (const auto& l : r.logits) {
      for (double v : l)
        if (!std::isfinite(v))
          throw ValidationError("decision fusion: session " + std::to_string(r.session_id) + " has non-finite logits");
      row.insert(row.end(), l.begin(), l.end());
    }
    if (row.empty()) throw ValidationError("decision fusion: session " + std::to_string(r.session_id) + " has empty logits");
    if (x.rows() > 0 && row.size() != x.cols())
      throw ValidationError("decision fusion: session " + std::to_string(r.session_id) + " has logit width " +
                            std::to_string(row.size()) + ", expected " + std::to_string(x.cols()));
    x.append_row(row);
  }
  return x;
}

DecisionFusion fuse_decision_binary(std::span<const DecisionRecord> records, std::span<const int> labels,
                                    bool include_llm, const KernelSpec& kernel, double C) {
  check_labels(records, labels.size());
  DecisionFusion f{DecisionKind::Binary, include_llm, 2, {}};
  f.svm = train_svm_multiclass(decision_binary_features(records, include_llm), labels, kernel, C, 1e-3, 2);
  return f;
}

DecisionFusion fuse_decision_logits(std::span<const DecisionRecord> records, std::span<const int> labels,
                                    std::size_t classes, const KernelSpec& kernel, double C) {
  check_labels(records, labels.size());
  DecisionFusion f{DecisionKind::Logits, false, classes, {}};
  f.svm = train_svm_multiclass(decision_logit_features(records), labels, kernel, C, 1e-3, classes);
  return f;
}

DecisionFusion fuse_decision_multiclass(std::span<const DecisionRecord> records, std::span<const int> labels,
                                        std::size_t classes, bool include_llm, const KernelSpec& kernel, double C) {
  check_labels(records, labels.size());
  DecisionFusion f{DecisionKind::Multiclass, include_llm, classes, {}};
  f.svm = train_svm_multiclass(decision_onehot_features(records, classes, include_llm), labels, kernel, C, 1e-3,
                               classes);
  return f;
}

std::vector<int> predict(const DecisionFusion& fusion, std::span<const DecisionRecord> records) {
  Matrix x;
  switch (fusion.kind) {
    case DecisionKind::Binary: x = decision_binary_features(records, fusion.include_llm); break;
    case DecisionKind::Logits: x = decision_logit_features(records); break;
    case DecisionKind::Multiclass: x = decision_onehot_features(records, fusion.classes, fusion.include_llm); break;
  }
  return predict(fusion.svm, x).labels;
}

namespace {

std::vector<double> severity_row(const DecisionRecord& r, bool include_llm) {
  std::vector<double> row(r.predictions.begin(), r.predictions.end());
  if (include_llm) row.push_back(*r.llm_prediction);
  for (double v : row)
    if (!std::isfinite(v))
      throw ValidationError("severity fusion: session " + std::to_string(r.session_id) + " has a non-finite value");
  return row;
}

}  // namespace

SeverityCombiner fuse_severity_decision(std::span<const DecisionRecord> records, std::span<const double> targets,
                                        bool include_llm) {
  check_channels(records);
  if (records.size() != targets.size())
    throw ValidationError("severity fusion: " + std::to_string(records.size()) + " records but " +
                          std::to_string(targets.size()) + " targets");
  if (include_llm) check_llm(records);
  const std::size_t m = records.front().predictions.size() + (include_llm ? 1 : 0);
  Eigen::MatrixXd A(records.size(), m + 1);
  Eigen::VectorXd b(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto row = severity_row(records[i], include_llm);
    A(i, 0) = 1.0;
    for (std::size_t c = 0; c < m; ++c) A(i, c + 1) = row[c];
    b(i) = targets[i];
  }
  SeverityCombiner out;
  out.include_llm = include_llm;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (records.size() < m + 1 || qr.rank() < static_cast<Eigen::Index>(m + 1)) {
    out.equal_weight_fallback = true;
    out.intercept = 0.0;
    out.weights.assign(m, 1.0 / double(m));
    return out;
  }
  const Eigen::VectorXd w = qr.solve(b);
  out.intercept = w(0);
  for (std::size_t c = 0; c < m; ++c) out.weights.push_back(w(c + 1));
  return out;
}

std::vector<double> predict(const SeverityCombiner& combiner, std::span<const DecisionRecord> records) {
  if (records.empty()) return {};
  check_channels(records);
  if (combiner.include_llm) check_llm(records);
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const auto row = severity_row(r, combiner.include_llm);
    if (row.size() != combiner.weights.size())
      throw ValidationError("severity fusion: session " + std::to_string(r.session_id) + " has " +
                            std::to_string(row.size()) + " channels, combiner expects " +
                            std::to_string(combiner.weights.size()));
    double v = combiner.intercept;
    for (std::size_t c = 0; c < row.size(); ++c) v += combiner.weights[c] * row[c];
    out.push_back(v);
  }
  return out;
}

void validate_llm_task(std::string_view task) { (void)llm_value_limit(task); }

double llm_value_limit(std::string_view task) {
  if (task == "dep_binary" || task == "ptsd_binary") return 1;
  if (task == "multiclass") return 3;
  if (task == "dep_severity") return 4;
  if (task == "ptsd_severity") return 2;
  throw ValidationError("unknown LLM task '" + std::string(task) + "'");
}

std::map<std::int64_t, double> load_llm_predictions(const std::filesystem::path& path, std::string_view task) {
  const double limit = llm_value_limit(task);
  const bool integral = task != "dep_severity" && task != "ptsd_severity";
  std::ifstream in(path);
  if (!in) throw DataError("cannot read LLM predictions " + path.string());
  std::map<std::int64_t, double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    detail::json j;
    try {
      j = detail::json::parse(line);
    } catch (const detail::json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
    std::int64_t id;
    std::string t;
    double v;
    try {
      id = detail::require<std::int64_t>(j, "session_id");
      t = detail::require<std::string>(j, "task");
      v = detail::require<double>(j, "prediction");
      validate_llm_task(t);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
    if (t != task) continue;
    if (!std::isfinite(v) || v < 0.0 || v > limit || (integral && v != std::floor(v)))
      throw ValidationError("LLM prediction for session " + std::to_string(id) + " (" + t + ") is " +
                            std::to_string(v) + ", outside the task range 0.." + std::to_string(int(limit)));
    if (!out.emplace(id, v).second)
      throw DataError("duplicate LLM prediction for session " + std::to_string(id) + " (" + t + ")");
  }
  return out;
}

void save_decision_records(const std::filesystem::path& path, std::span<const DecisionRecord> records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) {
    detail::json j{{"session_id", r.session_id},
                   {"modalities", r.modalities},
                   {"predictions", r.predictions},
                   {"logits", r.logits}};
    j["llm_prediction"] = r.llm_prediction ? detail::json(*r.llm_prediction) : detail::json(nullptr);
    out << j.dump() << "\n";
  }
}

std::vector<DecisionRecord> load_decision_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<DecisionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = detail::json::parse(line);
      DecisionRecord r;
      r.session_id = detail::require<std::int64_t>(j, "session_id");
      r.modalities = detail::require<std::vector<std::string>>(j, "modalities");
      r.predictions = detail::require<std::vector<double>>(j, "predictions");
      r.logits = detail::require<std::vector<std::vector<double>>>(j, "logits");
      if (j.contains("llm_prediction") && !j.at("llm_prediction").is_null())
        r.llm_prediction = detail::require<double>(j, "llm_prediction");
      out.push_back(std::move(r));
    } catch (const detail::json::exception& e) {
      throw ParseError(e.what(), line_no);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

}  // namespace mmf
