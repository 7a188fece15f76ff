#include "mmfusion/harness.hpp"

#include <chrono>
#include <fstream>
#include <functional>
#include <memory>

#include "harness_config.hpp"
#include "mmfusion/error.hpp"
#include "mmfusion/random.hpp"

namespace mmf {

namespace fs = std::filesystem;
using detail::json;

EmbeddingStore planted_store(std::span<const Session> sessions, std::string_view modality, const FormatSpec& format) {
  if (modality != "text" && modality != "audio")
    throw ParameterError("planted embeddings exist for text and audio only, not '" + std::string(modality) + "'");
  const bool text = modality == "text";
  std::size_t dim = 0;
  for (const auto& s : sessions) {
    if (!s.planted) throw DataError("session " + std::to_string(s.id) + " carries no planted latents");
    dim = text ? s.planted->text.cols() : s.planted->audio.cols();
    break;
  }
  EmbeddingStore store(dim, "planted");
  std::vector<double> v(dim);
  for (const auto& s : sessions) {
    if (!s.planted) throw DataError("session " + std::to_string(s.id) + " carries no planted latents");
    const Matrix& lat = text ? s.planted->text : s.planted->audio;
    const auto chunked = format_session(s, format);
    for (const auto& c : chunked.chunks) {
      std::fill(v.begin(), v.end(), 0.0);
      for (auto u : c.utterance_indices)
        for (std::size_t d = 0; d < dim; ++d) v[d] += lat(u, d);
      for (auto& x : v) x /= double(c.utterance_indices.size());
      store.insert(text ? c.text : audio_content_key(s.id, c.audio_segments), v);
    }
  }
  return store;
}

std::vector<EmbeddingMatrix> embed_modality(std::span<const Session> sessions, std::string_view modality,
                                            const FormatSpec& format, const EmbeddingProvider* provider) {
  if (modality != "text" && modality != "audio" && modality != "video")
    throw ParameterError("unknown modality '" + std::string(modality) + "'");
  if (modality != "video" && !provider) throw ParameterError("embedding provider required for " + std::string(modality));
  std::vector<EmbeddingMatrix> out;
  out.reserve(sessions.size());
  for (const auto& s : sessions) {
    const auto chunked = format_session(s, format);
    if (chunked.chunks.empty())
      throw DataError("session " + std::to_string(s.id) + " produced no chunks for format " + format.name());
    EmbeddingMatrix m;
    m.session_id = s.id;
    m.format_name = format.name();
    if (modality == "video") {
      if (!s.frames) throw DataError("session " + std::to_string(s.id) + " has no video frames");
      const auto pooled = pool_video_per_utterance(*s.frames, s.utterances);
      m.rows = video_chunk_vectors(pooled, chunked);
    } else {
      m.rows = Matrix(0, provider->dim());
      for (const auto& c : chunked.chunks) {
        const std::string content = modality == "text" ? c.text : audio_content_key(s.id, c.audio_segments);
        m.rows.append_row(embed(*provider, content));
      }
    }
    if (format.sums_chunks()) {
      std::vector<std::vector<double>> rows;
      for (std::size_t r = 0; r < m.rows.rows(); ++r) rows.emplace_back(m.rows.row(r).begin(), m.rows.row(r).end());
      Matrix summed(0, m.rows.cols());
      summed.append_row(sum_answer_vectors(rows));
      m.rows = std::move(summed);
    }
    out.push_back(std::move(m));
  }
  return out;
}

Matrix model_input(const EmbeddingMatrix& m, nn::Architecture architecture) {
  if (architecture != nn::Architecture::MLP || m.rows.rows() == 1) return m.rows;
  Matrix pooled(1, m.rows.cols());
  for (std::size_t r = 0; r < m.rows.rows(); ++r)
    for (std::size_t c = 0; c < m.rows.cols(); ++c) pooled(0, c) += m.rows(r, c);
  for (auto& v : pooled.data()) v /= double(m.rows.rows());
  return pooled;
}

std::vector<MetricDelta> compare_reports(const MetricReport& before, const MetricReport& after) {
  std::vector<MetricDelta> out;
  auto add = [&](const char* name, const std::optional<double>& b, const std::optional<double>& a, bool higher) {
    if (!b || !a) return;
    MetricDelta d{name, *b, *a, *a - *b, false};
    d.improved = higher ? d.delta > 0.0 : d.delta < 0.0;
    out.push_back(d);
  };
  add("balanced_accuracy", before.balanced_accuracy, after.balanced_accuracy, true);
  add("accuracy", before.accuracy, after.accuracy, true);
  add("macro_f1", before.macro_f1, after.macro_f1, true);
  add("mae", before.mae, after.mae, false);
  return out;
}

SwapReport swap_head_to_svm(const nn::TrainedModel& trained, std::span<const nn::Sample> train,
                            std::span<const nn::Sample> test, const KernelSpec& kernel, double C, double tol) {
  if (trained.spec.head.kind == nn::HeadKind::Regression)
    throw ConfigError("swap_head_to_svm: the model has a regression head");
  const std::size_t k = trained.spec.head.outputs();
  std::vector<Matrix> xs_train, xs_test;
  std::vector<int> y_train, y_test;
  for (const auto& s : train) {
    xs_train.push_back(s.x);
    y_train.push_back(static_cast<int>(s.target));
  }
  for (const auto& s : test) {
    xs_test.push_back(s.x);
    y_test.push_back(static_cast<int>(s.target));
  }
  const Matrix f_train = nn::extract_features(trained, xs_train);
  const Matrix f_test = nn::extract_features(trained, xs_test);

  SwapReport r;
  r.model = train_svm_multiclass(f_train, y_train, kernel, C, tol, k);
  r.svm_predictions = predict(r.model, f_test).labels;
  for (const auto& x : xs_test) r.mlp_predictions.push_back(nn::predicted_class(nn::forward(trained, x).output));
  r.mlp = evaluate_classification(r.mlp_predictions, y_test, k);
  r.svm = evaluate_classification(r.svm_predictions, y_test, k);
  r.deltas = compare_reports(r.mlp, r.svm);
  return r;
}

namespace {

// Looks vectors up in a store first and remembers new ones.
class CachingProvider final : public EmbeddingProvider {
 public:
  CachingProvider(const EmbeddingProvider& inner, EmbeddingStore& store) : inner_(inner), store_(store) {}
  std::size_t dim() const override { return inner_.dim(); }
  std::vector<double> embed(std::string_view content) const override {
    if (const auto* v = store_.find(content)) return *v;
    auto v = inner_.embed(content);
    store_.insert(std::string(content), v);
    ++misses_;
    return v;
  }
  std::size_t misses() const { return misses_; }

 private:
  const EmbeddingProvider& inner_;
  EmbeddingStore& store_;
  mutable std::size_t misses_ = 0;
};

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e.what());
  }
}

// One modality's per-session outputs, indexed like the session list.
struct ModalityOutputs {
  std::vector<double> predictions;  // class index or severity value
  std::vector<std::vector<double>> logits;
};

struct Split3 {
  std::vector<std::size_t> train, dev, test;
};

std::uint64_t svm_checksum(const MulticlassSvm& m) {
  std::uint64_t h = fnv1a64(std::string_view("svm"));
  for (const auto& b : m.models) {
    if (!b) continue;
    h = fnv1a64(b->alphas_signed, h);
    h = fnv1a64(std::span<const double>(&b->bias, 1), h);
    h = fnv1a64(b->support_vectors.data(), h);
  }
  return h;
}

}  // namespace

RunResult run(const ExperimentConfig& config) {
  validate_config(config);
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  res.config = config;
  res.digest = config_digest(config);
  const Task task = config.task;
  const std::size_t classes = task_classes(task);
  const bool severity = is_severity(task);
  const fs::path out_dir = config.output_dir;
  const bool write = !out_dir.empty();
  if (write) fs::create_directories(out_dir);

  AccessAudit audit;
  bool evaluating = false;

  // ---- corpus
  std::vector<Session> sessions = stage("corpus", [&] {
    if (config.corpus.synthetic) {
      SyntheticSpec spec = *config.corpus.synthetic;
      spec.seed = config.seeds.data;
      return generate_synthetic(spec);
    }
    return load_corpus(config.corpus.path);
  });
  Split3 split;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    switch (sessions[i].split) {
      case Split::Train: split.train.push_back(i); break;
      case Split::Dev: split.dev.push_back(i); break;
      case Split::Test: split.test.push_back(i); break;
    }
  }
  if (split.train.empty()) throw StageError("corpus", "no Train-split sessions");

  auto label = [&](std::size_t i) {
    if (sessions[i].split == Split::Test && !evaluating) ++audit.test_target_reads;
    return task_label(task, sessions[i]);
  };
  auto count_test = [&](std::span<const std::size_t> idx) {
    for (auto i : idx)
      if (sessions[i].split == Split::Test) ++audit.test_rows_fitted;
  };

  std::map<std::int64_t, double> llm;
  if (config.fusion.include_llm) {
    llm = stage("fusion", [&] {
      const char* names[] = {"dep_binary", "ptsd_binary", "dep_severity", "ptsd_severity", "multiclass"};
      return load_llm_predictions(config.fusion.llm_predictions, names[static_cast<int>(task)]);
    });
  }

  // ---- chunk + embed
  std::vector<std::vector<EmbeddingMatrix>> matrices;
  for (const auto& mod : config.modalities) {
    matrices.push_back(stage("embed", [&] {
      const FormatSpec format = parse_format(mod.format);
      std::unique_ptr<EmbeddingProvider> provider;
      std::shared_ptr<EmbeddingStore> planted;
      if (mod.name != "video") {
        if (config.embedding.source == EmbeddingSource::Planted) {
          planted = std::make_shared<EmbeddingStore>(planted_store(sessions, mod.name, format));
          provider = std::make_unique<StoreProvider>(planted);
        } else {
          provider = make_provider(config.embedding.provider);
        }
      }
      if (!provider || config.embedding.source == EmbeddingSource::Planted || !config.embedding.cache || !write)
        return embed_modality(sessions, mod.name, format, provider.get());

      const auto& p = config.embedding.provider;
      const std::string tag = std::string(to_string(config.embedding.source)) + "_" +
                              detail::hex16(fnv1a64(p.endpoint + "|" + p.store_path + "|" + std::to_string(p.dim) +
                                                    "|" + std::to_string(p.seed)));
      const fs::path cache_path = out_dir / "cache" / ("embeddings_" + tag + ".jsonl");
      EmbeddingStore store = fs::exists(cache_path) ? EmbeddingStore::load(cache_path)
                                                    : EmbeddingStore(provider->dim(), std::string(to_string(config.embedding.source)));
      CachingProvider caching(*provider, store);
      auto result = embed_modality(sessions, mod.name, format, &caching);
      if (caching.misses() > 0) {
        fs::create_directories(cache_path.parent_path());
        store.save(cache_path);
      }
      return result;
    }));
  }

  // ---- normalize (fitted on Train only)
  for (std::size_t m = 0; m < config.modalities.size(); ++m) {
    if (!config.modalities[m].normalize) continue;
    stage("normalize", [&] {
      std::vector<EmbeddingMatrix> fit_on;
      for (auto i : split.train) fit_on.push_back(matrices[m][i]);
      count_test(split.train);
      const auto stats = fit_normalizer(fit_on);
      for (auto& mat : matrices[m]) mat = apply_normalizer(stats, mat);
      return 0;
    });
  }

  auto train_config = [&](std::size_t offset) {
    nn::TrainConfig tc = config.train;
    tc.seed = splitmix64(config.seeds.init + offset);
    return tc;
  };
  auto samples_for = [&](std::span<const std::size_t> idx, const std::vector<EmbeddingMatrix>& mats,
                         nn::Architecture arch) {
    std::vector<nn::Sample> out;
    for (auto i : idx) out.push_back(nn::Sample{model_input(mats[i], arch), double(label(i))});
    return out;
  };
  auto outputs_of = [&](const nn::ForwardResult& f, ModalityOutputs& o) {
    o.logits.push_back(f.output);
    o.predictions.push_back(severity ? f.output[0] : double(nn::predicted_class(f.output)));
  };

  // ---- per-modality models
  const FusionKind fk = config.fusion.kind;
  const bool need_single = fk != FusionKind::DataLevel &&
                           !(fk == FusionKind::FeatureLevel && config.fusion.mode == FeatureMode::FullTraining);
  std::vector<nn::TrainedModel> models;
  std::vector<ModalityOutputs> mod_out(config.modalities.size());
  if (need_single) {
    for (std::size_t m = 0; m < config.modalities.size(); ++m) {
      const auto& mod = config.modalities[m];
      stage("train", [&] {
        nn::ModelSpec spec = mod.model;
        spec.input_dim = matrices[m].front().dim();
        spec.head = task_head(task);
        const auto tr = samples_for(split.train, matrices[m], spec.architecture);
        const auto dv = samples_for(split.dev, matrices[m], spec.architecture);
        count_test(split.train);
        auto model = nn::train(spec, tr, train_config(m), dv);
        res.model_checksums[mod.name] = detail::hex16(nn::parameter_checksum(model.parameters));
        if (write) {
          nn::save_checkpoint(model, out_dir / "models" / mod.name);
          res.artifacts.push_back((out_dir / "models" / (mod.name + ".json")).string());
        }
        models.push_back(std::move(model));
        return 0;
      });
      const auto& model = models.back();
      if (mod.head == HeadChoice::MLP) {
        stage("predict", [&] {
          for (std::size_t i = 0; i < sessions.size(); ++i)
            outputs_of(nn::forward(model, model_input(matrices[m][i], model.spec.architecture)), mod_out[m]);
          return 0;
        });
      } else {
        stage("swap-svm", [&] {
          std::vector<Matrix> xs;
          for (std::size_t i = 0; i < sessions.size(); ++i)
            xs.push_back(model_input(matrices[m][i], model.spec.architecture));
          const Matrix feats = nn::extract_features(model, xs);
          auto rows_of = [&](std::span<const std::size_t> idx) {
            Matrix out(0, feats.cols());
            for (auto i : idx) out.append_row(feats.row(i));
            return out;
          };
          const Matrix f_train = rows_of(split.train);
          std::vector<int> y_train;
          for (auto i : split.train) y_train.push_back(label(i));
          KernelSpec kernel = mod.svm.kernel;
          double C = mod.svm.C;
          if (mod.svm.search && !split.dev.empty()) {
            SearchSpace space = *mod.svm.search;
            space.seed = splitmix64(config.seeds.search + m);
            std::vector<int> y_dev;
            for (auto i : split.dev) y_dev.push_back(label(i));
            const auto best = tune(f_train, y_train, rows_of(split.dev), y_dev, kernel.kind, space,
                                   "balanced_accuracy", classes, mod.svm.tol);
            C = best.C;
            if (kernel.kind == KernelKind::RBF && best.gamma) kernel.gamma = best.gamma;
            res.notes.push_back(mod.name + ": tuned SVM C=" + std::to_string(C) +
                                (kernel.gamma ? " gamma=" + std::to_string(*kernel.gamma) : std::string()));
          }
          count_test(split.train);
          const auto svm = train_svm_multiclass(f_train, y_train, kernel, C, mod.svm.tol, classes);
          res.model_checksums[mod.name + ".svm"] = detail::hex16(svm_checksum(svm));
          if (write) {
            save_svm(svm, out_dir / "models" / (mod.name + "_svm"));
            res.artifacts.push_back((out_dir / "models" / (mod.name + "_svm.json")).string());
          }
          const auto pred = predict(svm, feats);
          for (std::size_t i = 0; i < sessions.size(); ++i) {
            auto v = pred.values.row(i);
            mod_out[m].logits.emplace_back(v.begin(), v.end());
            mod_out[m].predictions.push_back(pred.labels[i]);
          }
          return 0;
        });
      }
    }
  }

  // ---- fusion
  std::vector<double> final_pred;  // per session
  stage("fusion", [&] {
    try {
      switch (fk) {
        case FusionKind::None:
          final_pred = mod_out[0].predictions;
          break;
        case FusionKind::DataLevel: {
          std::vector<EmbeddingMatrix> fused;
          for (std::size_t i = 0; i < sessions.size(); ++i) {
            std::vector<EmbeddingMatrix> parts;
            for (auto& mm : matrices) parts.push_back(mm[i]);
            fused.push_back(fuse_data_level(parts));
          }
          nn::ModelSpec spec = config.fusion.model;
          spec.input_dim = fused.front().dim();
          spec.head = task_head(task);
          const auto tr = samples_for(split.train, fused, spec.architecture);
          const auto dv = samples_for(split.dev, fused, spec.architecture);
          count_test(split.train);
          const auto model = nn::train(spec, tr, train_config(100), dv);
          res.model_checksums["data_fusion"] = detail::hex16(nn::parameter_checksum(model.parameters));
          if (write) nn::save_checkpoint(model, out_dir / "models" / "data_fusion");
          ModalityOutputs o;
          for (std::size_t i = 0; i < sessions.size(); ++i)
            outputs_of(nn::forward(model, model_input(fused[i], spec.architecture)), o);
          final_pred = o.predictions;
          break;
        }
        case FusionKind::FeatureLevel: {
          auto joint_samples = [&](std::span<const std::size_t> idx, const std::vector<nn::Architecture>& archs) {
            std::vector<nn::JointSample> out;
            for (auto i : idx) {
              nn::JointSample js;
              for (std::size_t m = 0; m < matrices.size(); ++m) js.inputs.push_back(model_input(matrices[m][i], archs[m]));
              js.target = double(label(i));
              out.push_back(std::move(js));
            }
            return out;
          };
          std::vector<nn::Architecture> archs;
          for (const auto& mod : config.modalities) archs.push_back(mod.model.architecture);
          const auto tr = joint_samples(split.train, archs);
          const auto dv = joint_samples(split.dev, archs);
          count_test(split.train);
          ModalityOutputs o;
          if (config.fusion.mode == FeatureMode::FrozenBackbone) {
            std::vector<std::uint64_t> before;
            for (const auto& m : models) before.push_back(nn::parameter_checksum(m.parameters));
            const auto fusion =
                train_frozen_fusion(models, tr, task_head(task), config.fusion.head_hidden, train_config(200), dv);
            for (std::size_t m = 0; m < models.size(); ++m)
              if (nn::parameter_checksum(fusion.backbones[m].parameters) != before[m] ||
                  nn::parameter_checksum(models[m].parameters) != before[m])
                throw Error("frozen backbone '" + config.modalities[m].name + "' changed during head training");
            res.model_checksums["feature_fusion_head"] = detail::hex16(nn::parameter_checksum(fusion.head.parameters));
            if (write) nn::save_checkpoint(fusion.head, out_dir / "models" / "feature_fusion_head");
            for (std::size_t i = 0; i < sessions.size(); ++i) {
              std::vector<Matrix> in;
              for (std::size_t m = 0; m < matrices.size(); ++m) in.push_back(model_input(matrices[m][i], archs[m]));
              outputs_of(forward(fusion, in), o);
            }
          } else {
            nn::JointSpec js;
            for (std::size_t m = 0; m < config.modalities.size(); ++m) {
              nn::ModelSpec spec = config.modalities[m].model;
              spec.input_dim = matrices[m].front().dim();
              spec.head = task_head(task);
              js.branches.push_back(spec);
            }
            js.head = task_head(task);
            const auto joint = nn::train_joint(js, tr, train_config(300), dv);
            res.model_checksums["feature_fusion_joint"] = detail::hex16(nn::parameter_checksum(joint.parameters));
            for (std::size_t i = 0; i < sessions.size(); ++i) {
              std::vector<Matrix> in;
              for (std::size_t m = 0; m < matrices.size(); ++m) in.push_back(model_input(matrices[m][i], archs[m]));
              outputs_of(nn::forward(joint, in), o);
            }
          }
          final_pred = o.predictions;
          break;
        }
        case FusionKind::DecisionBinary:
        case FusionKind::DecisionLogits:
        case FusionKind::DecisionMulticlass:
        case FusionKind::DecisionSeverity: {
          std::vector<DecisionRecord> records(sessions.size());
          for (std::size_t i = 0; i < sessions.size(); ++i) {
            auto& r = records[i];
            r.session_id = sessions[i].id;
            for (std::size_t m = 0; m < config.modalities.size(); ++m) {
              r.modalities.push_back(config.modalities[m].name);
              r.predictions.push_back(mod_out[m].predictions[i]);
              r.logits.push_back(mod_out[m].logits[i]);
            }
            if (auto it = llm.find(r.session_id); it != llm.end()) r.llm_prediction = it->second;
          }
          if (write) {
            save_decision_records(out_dir / "decision_records.jsonl", records);
            res.artifacts.push_back((out_dir / "decision_records.jsonl").string());
          }
          std::vector<DecisionRecord> train_records;
          for (auto i : split.train) train_records.push_back(records[i]);
          count_test(split.train);
          const bool with_llm = config.fusion.include_llm;
          KernelSpec kernel = config.fusion.kernel;
          if (fk == FusionKind::DecisionSeverity) {
            std::vector<double> targets;
            for (auto i : split.train) targets.push_back(label(i));
            const auto comb = fuse_severity_decision(train_records, targets, with_llm);
            if (comb.equal_weight_fallback) res.notes.push_back("severity fusion: rank-deficient design, equal-weight average used");
            final_pred = predict(comb, records);
          } else {
            std::vector<int> y;
            for (auto i : split.train) y.push_back(label(i));
            DecisionFusion fusion;
            if (fk == FusionKind::DecisionBinary)
              fusion = fuse_decision_binary(train_records, y, with_llm, kernel, config.fusion.C);
            else if (fk == FusionKind::DecisionLogits)
              fusion = fuse_decision_logits(train_records, y, classes, kernel, config.fusion.C);
            else
              fusion = fuse_decision_multiclass(train_records, y, classes, with_llm, kernel, config.fusion.C);
            res.model_checksums["decision_fusion"] = detail::hex16(svm_checksum(fusion.svm));
            for (int p : predict(fusion, records)) final_pred.push_back(p);
          }
          break;
        }
      }
    } catch (const DegenerateDataError& e) {
      res.failed = true;
      res.failure = std::string("fusion: ") + e.what();
    }
    return 0;
  });

  // ---- evaluate
  res.audit_before_eval = audit;
  evaluating = true;
  auto report = [&](std::span<const std::size_t> idx, const std::vector<double>& pred) -> std::optional<MetricReport> {
    if (idx.empty() || pred.empty()) return std::nullopt;
    std::vector<int> truth;
    for (auto i : idx) truth.push_back(label(i));
    if (severity) {
      std::vector<double> p;
      for (auto i : idx) p.push_back(pred[i]);
      return evaluate_severity(p, truth, classes);
    }
    std::vector<int> p;
    for (auto i : idx) p.push_back(static_cast<int>(pred[i]));
    return evaluate_classification(p, truth, classes);
  };
  stage("evaluate", [&] {
    const std::pair<const char*, const std::vector<std::size_t>*> parts[] = {
        {"train", &split.train}, {"dev", &split.dev}, {"test", &split.test}};
    if (!res.failed)
      for (const auto& [name, idx] : parts)
        if (auto r = report(*idx, final_pred)) res.metrics[name] = *r;
    for (std::size_t m = 0; m < mod_out.size(); ++m) {
      if (mod_out[m].predictions.empty()) continue;
      if (auto r = report(split.dev, mod_out[m].predictions)) res.modality_dev_metrics[config.modalities[m].name] = *r;
      if (auto r = report(split.test, mod_out[m].predictions)) res.modality_test_metrics[config.modalities[m].name] = *r;
    }
    if (write && !final_pred.empty()) {
      std::ofstream out(out_dir / "predictions.jsonl");
      for (std::size_t i = 0; i < sessions.size(); ++i)
        out << json{{"session_id", sessions[i].id}, {"split", to_string(sessions[i].split)}, {"prediction", final_pred[i]}}
                   .dump()
            << "\n";
      res.artifacts.push_back((out_dir / "predictions.jsonl").string());
    }
    return 0;
  });

  res.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (write) {
    res.artifacts.push_back((out_dir / "run_result.json").string());
    std::ofstream out(out_dir / "run_result.json");
    out << run_result_to_json(res) << "\n";
  }
  return res;
}

namespace {

json reports_json(const std::map<std::string, MetricReport>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = json::parse(to_json(v));
  return j;
}

std::map<std::string, MetricReport> reports_from(const json& j) {
  std::map<std::string, MetricReport> out;
  for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = metric_report_from_json(it.value().dump());
  return out;
}

}  // namespace

std::string result_fingerprint(const RunResult& r) {
  json j{{"metrics", reports_json(r.metrics)},
         {"modality_dev", reports_json(r.modality_dev_metrics)},
         {"modality_test", reports_json(r.modality_test_metrics)},
         {"checksums", r.model_checksums},
         {"failed", r.failed}};
  return detail::hex16(fnv1a64(j.dump()));
}

std::string run_result_to_json(const RunResult& r) {
  json j{{"digest", r.digest},
         {"config", detail::config_json(r.config)},
         {"metrics", reports_json(r.metrics)},
         {"modality_dev_metrics", reports_json(r.modality_dev_metrics)},
         {"modality_test_metrics", reports_json(r.modality_test_metrics)},
         {"model_checksums", r.model_checksums},
         {"artifacts", r.artifacts},
         {"notes", r.notes},
         {"audit_before_eval",
          {{"test_target_reads", r.audit_before_eval.test_target_reads},
           {"test_rows_fitted", r.audit_before_eval.test_rows_fitted}}},
         {"failed", r.failed},
         {"failure", r.failure},
         {"wall_time_s", r.wall_time_s},
         {"fingerprint", result_fingerprint(r)}};
  return j.dump(2);
}

RunResult run_result_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("run result: ") + e.what());
  }
  RunResult r;
  try {
    r.digest = j.at("digest").get<std::string>();
    r.config = detail::config_from_json(j.at("config"));
    r.metrics = reports_from(j.at("metrics"));
    r.modality_dev_metrics = reports_from(j.at("modality_dev_metrics"));
    r.modality_test_metrics = reports_from(j.at("modality_test_metrics"));
    r.model_checksums = j.at("model_checksums").get<std::map<std::string, std::string>>();
    r.artifacts = j.at("artifacts").get<std::vector<std::string>>();
    r.notes = j.at("notes").get<std::vector<std::string>>();
    r.audit_before_eval.test_target_reads = j.at("audit_before_eval").at("test_target_reads").get<std::size_t>();
    r.audit_before_eval.test_rows_fitted = j.at("audit_before_eval").at("test_rows_fitted").get<std::size_t>();
    r.failed = j.at("failed").get<bool>();
    r.failure = j.at("failure").get<std::string>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("run result: ") + e.what());
  }
  return r;
}

}  // namespace mmf
