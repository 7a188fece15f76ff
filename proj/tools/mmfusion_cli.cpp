// mmfusion command-line tool. Every subcommand writes into --out (a directory).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmfusion/chunking.hpp"
#include "mmfusion/corpus.hpp"
#include "mmfusion/embeddings.hpp"
#include "mmfusion/error.hpp"
#include "mmfusion/fusion.hpp"
#include "mmfusion/harness.hpp"
#include "mmfusion/metrics.hpp"
#include "mmfusion/nn.hpp"
#include "mmfusion/svm.hpp"

using namespace mmf;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

fs::path out_path(const Globals& g, const std::string& file) {
  fs::create_directories(g.out);
  return fs::path(g.out) / file;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Corpus sessions joined with per-session data by id.
struct Labelled {
  std::vector<Session> sessions;
  std::map<std::int64_t, std::size_t> index;
  Task task = Task::DepBinary;

  int label(std::int64_t id) const { return task_label(task, sessions.at(index.at(id))); }
  Split split(std::int64_t id) const { return sessions.at(index.at(id)).split; }
};

Labelled load_labelled(const std::string& corpus, const std::string& task) {
  Labelled l;
  l.sessions = load_corpus(corpus);
  l.task = parse_task(task);
  for (std::size_t i = 0; i < l.sessions.size(); ++i) l.index[l.sessions[i].id] = i;
  return l;
}

std::vector<EmbeddingMatrix> embeddings_for(const Labelled& l, const std::string& path) {
  auto mats = load_embeddings(path);
  for (const auto& m : mats)
    if (!l.index.count(m.session_id))
      throw DataError("embeddings for session " + std::to_string(m.session_id) + " which is not in the corpus");
  return mats;
}

void normalize_on_train(const Labelled& l, std::vector<EmbeddingMatrix>& mats) {
  std::vector<EmbeddingMatrix> fit_on;
  for (const auto& m : mats)
    if (l.split(m.session_id) == Split::Train) fit_on.push_back(m);
  const auto stats = fit_normalizer(fit_on);
  for (auto& m : mats) m = apply_normalizer(stats, m);
}

std::vector<nn::Sample> samples(const Labelled& l, const std::vector<EmbeddingMatrix>& mats, nn::Architecture arch,
                                Split split) {
  std::vector<nn::Sample> out;
  for (const auto& m : mats)
    if (l.split(m.session_id) == split) out.push_back({model_input(m, arch), double(l.label(m.session_id))});
  return out;
}

DecisionRecord single_record(std::int64_t id, const std::string& modality, double prediction,
                             std::span<const double> logits) {
  DecisionRecord r;
  r.session_id = id;
  r.modalities = {modality};
  r.predictions = {prediction};
  r.logits = {std::vector<double>(logits.begin(), logits.end())};
  return r;
}

std::map<std::string, MetricReport> evaluate_records(const Labelled& l, std::span<const DecisionRecord> records,
                                                     std::size_t channel = 0) {
  const std::size_t classes = task_classes(l.task);
  std::map<std::string, MetricReport> out;
  for (Split split : {Split::Train, Split::Dev, Split::Test}) {
    std::vector<double> pred;
    std::vector<int> truth;
    for (const auto& r : records) {
      if (l.split(r.session_id) != split) continue;
      pred.push_back(r.predictions.at(channel));
      truth.push_back(l.label(r.session_id));
    }
    if (pred.empty()) continue;
    if (is_severity(l.task)) {
      out[std::string(to_string(split))] = evaluate_severity(pred, truth, classes);
    } else {
      std::vector<int> p(pred.begin(), pred.end());
      out[std::string(to_string(split))] = evaluate_classification(p, truth, classes);
    }
  }
  return out;
}

void print_metrics(const std::map<std::string, MetricReport>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = json::parse(to_json(v));
  std::cout << j.dump(2) << "\n";
}

nn::TrainConfig train_flags_default() {
  nn::TrainConfig c;
  c.epochs = 30;
  c.batch_size = 8;
  c.learning_rate = 1e-2;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal interview classification pipeline"};
  app.fallthrough();
  app.require_subcommand(0, 1);
  Globals g;
  app.add_option("--config", g.config, "Experiment config (JSON)");
  app.add_option("--seed", g.seed, "Seed overriding the config or command default");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();

  // ---- synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with planted signal");
  SyntheticSpec sspec;
  std::optional<double> signal;
  synth->add_option("--sessions", sspec.n_sessions)->capture_default_str();
  synth->add_option("--signal", signal, "Signal strength for every modality");
  synth->add_option("--text-signal", sspec.text_signal)->capture_default_str();
  synth->add_option("--audio-signal", sspec.audio_signal)->capture_default_str();
  synth->add_option("--video-signal", sspec.video_signal)->capture_default_str();
  synth->add_option("--noise", sspec.noise_sigma)->capture_default_str();

  // ---- chunk
  auto* chunk = app.add_subcommand("chunk", "Chunk transcripts into a named data format");
  std::string corpus_path, format_name = "utterances_10_overlap_4";
  chunk->add_option("--corpus", corpus_path)->required();
  chunk->add_option("--format", format_name)->capture_default_str();

  // ---- embed
  auto* embed_cmd = app.add_subcommand("embed", "Embed chunks of one modality");
  std::string modality = "text", provider_name = "deterministic", store_path, endpoint, auth_env;
  std::size_t dim = 256;
  int retries = 1;
  embed_cmd->add_option("--corpus", corpus_path)->required();
  embed_cmd->add_option("--modality", modality)->check(CLI::IsMember({"text", "audio", "video"}))->capture_default_str();
  embed_cmd->add_option("--format", format_name)->capture_default_str();
  embed_cmd->add_option("--provider", provider_name)
      ->check(CLI::IsMember({"planted", "deterministic", "store", "remote"}))
      ->capture_default_str();
  embed_cmd->add_option("--dim", dim)->capture_default_str();
  embed_cmd->add_option("--store", store_path, "Embedding store file (provider store)");
  embed_cmd->add_option("--endpoint", endpoint, "Embedding service URL (provider remote)");
  embed_cmd->add_option("--auth-env", auth_env, "Environment variable holding a bearer token");
  embed_cmd->add_option("--retries", retries)->capture_default_str();

  // ---- train
  auto* train_cmd = app.add_subcommand("train", "Train a network on one modality's embeddings");
  std::string embeddings_path, task_name = "dep_binary", arch = "cnn_bilstm", activation = "tanh";
  std::vector<std::size_t> hidden;
  std::size_t kernel_size = 3, n_filters = 8, lstm_hidden = 8;
  std::optional<std::size_t> patience;
  bool normalize = false;
  nn::TrainConfig tc = train_flags_default();
  train_cmd->add_option("--corpus", corpus_path)->required();
  train_cmd->add_option("--embeddings", embeddings_path)->required();
  train_cmd->add_option("--task", task_name)->capture_default_str();
  train_cmd->add_option("--modality", modality)->capture_default_str();
  train_cmd->add_option("--arch", arch)->check(CLI::IsMember({"mlp", "cnn", "bilstm", "cnn_bilstm"}))->capture_default_str();
  train_cmd->add_option("--activation", activation)->check(CLI::IsMember({"relu", "tanh"}))->capture_default_str();
  train_cmd->add_option("--hidden", hidden, "MLP hidden widths");
  train_cmd->add_option("--kernel-size", kernel_size)->capture_default_str();
  train_cmd->add_option("--filters", n_filters)->capture_default_str();
  train_cmd->add_option("--lstm-hidden", lstm_hidden)->capture_default_str();
  train_cmd->add_option("--epochs", tc.epochs)->capture_default_str();
  train_cmd->add_option("--batch-size", tc.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", tc.learning_rate)->capture_default_str();
  train_cmd->add_option("--patience", patience, "Early-stopping patience on Dev loss");
  train_cmd->add_flag("--normalize", normalize, "Standardize with Train-split statistics");

  // ---- train-svm
  auto* train_svm_cmd = app.add_subcommand("train-svm", "Train an SVM on mean-pooled embeddings");
  std::string kernel_name = "linear";
  double C = 1.0, tol = 1e-3;
  std::optional<double> gamma;
  train_svm_cmd->add_option("--corpus", corpus_path)->required();
  train_svm_cmd->add_option("--embeddings", embeddings_path)->required();
  train_svm_cmd->add_option("--task", task_name)->capture_default_str();
  train_svm_cmd->add_option("--modality", modality)->capture_default_str();
  train_svm_cmd->add_option("--kernel", kernel_name)->check(CLI::IsMember({"linear", "rbf"}))->capture_default_str();
  train_svm_cmd->add_option("--C", C)->capture_default_str();
  train_svm_cmd->add_option("--gamma", gamma, "RBF width; default 1 / (dim * feature variance)");
  train_svm_cmd->add_option("--tol", tol)->capture_default_str();
  train_svm_cmd->add_flag("--normalize", normalize);

  // ---- swap-svm
  auto* swap_cmd = app.add_subcommand("swap-svm", "Replace a trained network's head with an SVM");
  std::string model_stem;
  swap_cmd->add_option("--model", model_stem, "Checkpoint stem written by train")->required();
  swap_cmd->add_option("--corpus", corpus_path)->required();
  swap_cmd->add_option("--embeddings", embeddings_path)->required();
  swap_cmd->add_option("--task", task_name)->capture_default_str();
  swap_cmd->add_option("--modality", modality)->capture_default_str();
  swap_cmd->add_option("--kernel", kernel_name)->check(CLI::IsMember({"linear", "rbf"}))->capture_default_str();
  swap_cmd->add_option("--C", C)->capture_default_str();
  swap_cmd->add_option("--gamma", gamma);
  swap_cmd->add_option("--tol", tol)->capture_default_str();
  swap_cmd->add_flag("--normalize", normalize);

  // ---- fuse
  auto* fuse_cmd = app.add_subcommand("fuse", "Decision-level fusion of per-modality records");
  std::vector<std::string> record_paths;
  std::string fusion_kind = "decision_binary", llm_path;
  fuse_cmd->add_option("--corpus", corpus_path)->required();
  fuse_cmd->add_option("--records", record_paths, "Record files written by train / train-svm / swap-svm")->required();
  fuse_cmd->add_option("--task", task_name)->capture_default_str();
  fuse_cmd->add_option("--kind", fusion_kind)
      ->check(CLI::IsMember({"decision_binary", "decision_logits", "decision_multiclass", "decision_severity"}))
      ->capture_default_str();
  fuse_cmd->add_option("--llm", llm_path, "External LLM predictions (JSONL)");
  fuse_cmd->add_option("--kernel", kernel_name)->check(CLI::IsMember({"linear", "rbf"}))->capture_default_str();
  fuse_cmd->add_option("--C", C)->capture_default_str();

  // ---- eval
  auto* eval_cmd = app.add_subcommand("eval", "Score a record file per split");
  std::string records_path;
  eval_cmd->add_option("--corpus", corpus_path)->required();
  eval_cmd->add_option("--records", records_path)->required();
  eval_cmd->add_option("--task", task_name)->capture_default_str();

  // ---- report
  auto* report_cmd = app.add_subcommand("report", "Render result tables from run_result.json files");
  std::vector<std::string> result_paths;
  std::string layout = "formats";
  report_cmd->add_option("--results", result_paths)->required();
  report_cmd->add_option("--layout", layout)
      ->check(CLI::IsMember({"formats", "models", "fusion", "severity"}))
      ->capture_default_str();

  // ---- run
  auto* run_cmd = app.add_subcommand("run", "Run a full experiment from --config");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto seed_or = [&](std::uint64_t fallback) { return g.seed.value_or(fallback); };

    if (*synth) {
      if (signal) sspec.text_signal = sspec.audio_signal = sspec.video_signal = *signal;
      sspec.seed = seed_or(0);
      const auto corpus = generate_synthetic(sspec);
      const auto path = out_path(g, "corpus.jsonl");
      save_corpus(path, corpus);
      std::cout << "wrote " << corpus.size() << " sessions to " << path.string() << "\n";
    } else if (*chunk) {
      const auto sessions = load_corpus(corpus_path);
      const auto format = parse_format(format_name);
      const auto path = out_path(g, "chunks_" + format.name() + ".jsonl");
      std::ofstream out(path);
      std::size_t total = 0;
      for (const auto& s : sessions) {
        const auto c = format_session(s, format);
        total += c.chunks.size();
        out << chunked_to_line(c) << "\n";
      }
      std::cout << "wrote " << total << " chunks for " << sessions.size() << " sessions to " << path.string() << "\n";
    } else if (*embed_cmd) {
      const auto sessions = load_corpus(corpus_path);
      const auto format = parse_format(format_name);
      std::unique_ptr<EmbeddingProvider> provider;
      if (modality != "video") {
        if (provider_name == "planted") {
          provider = std::make_unique<StoreProvider>(
              std::make_shared<EmbeddingStore>(planted_store(sessions, modality, format)));
        } else {
          ProviderConfig pc;
          pc.kind = provider_name == "store" ? ProviderKind::Store
                    : provider_name == "remote" ? ProviderKind::Remote
                                                : ProviderKind::Deterministic;
          pc.dim = dim;
          pc.seed = seed_or(0);
          pc.store_path = store_path;
          pc.endpoint = endpoint;
          pc.auth_token_env = auth_env;
          pc.retries = retries;
          provider = make_provider(pc);
        }
      }
      const auto mats = embed_modality(sessions, modality, format, provider.get());
      const auto path = out_path(g, "embeddings_" + modality + ".jsonl");
      save_embeddings(path, mats);
      std::cout << "wrote " << mats.size() << " embedding matrices to " << path.string() << "\n";
    } else if (*train_cmd) {
      const auto l = load_labelled(corpus_path, task_name);
      auto mats = embeddings_for(l, embeddings_path);
      if (normalize) normalize_on_train(l, mats);
      nn::ModelSpec spec;
      spec.architecture = nn::parse_architecture(arch);
      spec.activation = nn::parse_activation(activation);
      spec.hidden = hidden;
      spec.kernel_size = kernel_size;
      spec.n_filters = n_filters;
      spec.lstm_hidden = lstm_hidden;
      spec.input_dim = mats.at(0).dim();
      spec.head = task_head(l.task);
      tc.seed = seed_or(0);
      tc.early_stop_patience = patience;
      const auto model = nn::train(spec, samples(l, mats, spec.architecture, Split::Train), tc,
                                   samples(l, mats, spec.architecture, Split::Dev));
      nn::save_checkpoint(model, out_path(g, modality + "_model"));
      std::vector<DecisionRecord> records;
      for (const auto& m : mats) {
        const auto f = nn::forward(model, model_input(m, spec.architecture));
        const double p = is_severity(l.task) ? f.output[0] : double(nn::predicted_class(f.output));
        records.push_back(single_record(m.session_id, modality, p, f.output));
      }
      save_decision_records(out_path(g, "records_" + modality + ".jsonl"), records);
      print_metrics(evaluate_records(l, records));
    } else if (*train_svm_cmd || *swap_cmd) {
      const auto l = load_labelled(corpus_path, task_name);
      if (is_severity(l.task)) throw ConfigError("--task: SVM heads are for classification tasks");
      auto mats = embeddings_for(l, embeddings_path);
      if (normalize) normalize_on_train(l, mats);
      const KernelSpec kernel{parse_kernel_kind(kernel_name), gamma};
      const std::size_t classes = task_classes(l.task);
      if (*swap_cmd) {
        const auto model = nn::load_checkpoint(model_stem);
        const auto arch_used = model.spec.architecture;
        const auto report = swap_head_to_svm(model, samples(l, mats, arch_used, Split::Train),
                                             samples(l, mats, arch_used, Split::Test), kernel, C, tol);
        save_svm(report.model, out_path(g, modality + "_swap_svm"));
        std::vector<Matrix> xs;
        for (const auto& m : mats) xs.push_back(model_input(m, arch_used));
        const auto pred = predict(report.model, nn::extract_features(model, xs));
        std::vector<DecisionRecord> records;
        for (std::size_t i = 0; i < mats.size(); ++i)
          records.push_back(single_record(mats[i].session_id, modality, pred.labels[i], pred.values.row(i)));
        save_decision_records(out_path(g, "records_" + modality + "_svm.jsonl"), records);
        json deltas = json::array();
        for (const auto& d : report.deltas)
          deltas.push_back({{"metric", d.metric}, {"mlp", d.before}, {"svm", d.after}, {"delta", d.delta},
                            {"improved", d.improved}});
        json j{{"mlp", json::parse(to_json(report.mlp))}, {"svm", json::parse(to_json(report.svm))}, {"deltas", deltas}};
        std::ofstream(out_path(g, "swap_" + modality + ".json")) << j.dump(2) << "\n";
        std::cout << j.dump(2) << "\n";
      } else {
        Matrix x_train(0, mats.at(0).dim()), x_all(0, mats.at(0).dim());
        std::vector<int> y_train;
        for (const auto& m : mats) {
          const Matrix row = model_input(m, nn::Architecture::MLP);
          x_all.append_row(row.row(0));
          if (l.split(m.session_id) != Split::Train) continue;
          x_train.append_row(row.row(0));
          y_train.push_back(l.label(m.session_id));
        }
        const auto svm = train_svm_multiclass(x_train, y_train, kernel, C, tol, classes);
        save_svm(svm, out_path(g, modality + "_svm"));
        const auto pred = predict(svm, x_all);
        std::vector<DecisionRecord> records;
        for (std::size_t i = 0; i < mats.size(); ++i)
          records.push_back(single_record(mats[i].session_id, modality, pred.labels[i], pred.values.row(i)));
        save_decision_records(out_path(g, "records_" + modality + "_svm.jsonl"), records);
        print_metrics(evaluate_records(l, records));
      }
    } else if (*fuse_cmd) {
      const auto l = load_labelled(corpus_path, task_name);
      std::map<std::int64_t, DecisionRecord> merged;
      for (const auto& path : record_paths) {
        for (const auto& r : load_decision_records(path)) {
          auto& m = merged[r.session_id];
          m.session_id = r.session_id;
          m.modalities.insert(m.modalities.end(), r.modalities.begin(), r.modalities.end());
          m.predictions.insert(m.predictions.end(), r.predictions.begin(), r.predictions.end());
          m.logits.insert(m.logits.end(), r.logits.begin(), r.logits.end());
        }
      }
      std::vector<DecisionRecord> records;
      for (auto& [id, r] : merged) {
        if (r.predictions.size() != record_paths.size())
          throw DataError("session " + std::to_string(id) + " is missing from some record files");
        records.push_back(std::move(r));
      }
      const bool with_llm = !llm_path.empty();
      if (with_llm) {
        const auto llm = load_llm_predictions(llm_path, to_string(l.task));
        for (auto& r : records)
          if (auto it = llm.find(r.session_id); it != llm.end()) r.llm_prediction = it->second;
      }
      std::vector<DecisionRecord> train_records;
      std::vector<int> y;
      std::vector<double> targets;
      for (const auto& r : records) {
        if (l.split(r.session_id) != Split::Train) continue;
        train_records.push_back(r);
        y.push_back(l.label(r.session_id));
        targets.push_back(l.label(r.session_id));
      }
      const KernelSpec kernel{parse_kernel_kind(kernel_name), std::nullopt};
      const std::size_t classes = task_classes(l.task);
      std::vector<double> fused;
      if (fusion_kind == "decision_severity") {
        fused = predict(fuse_severity_decision(train_records, targets, with_llm), records);
      } else {
        DecisionFusion f;
        if (fusion_kind == "decision_binary")
          f = fuse_decision_binary(train_records, y, with_llm, kernel, C);
        else if (fusion_kind == "decision_logits")
          f = fuse_decision_logits(train_records, y, classes, kernel, C);
        else
          f = fuse_decision_multiclass(train_records, y, classes, with_llm, kernel, C);
        for (int p : predict(f, records)) fused.push_back(p);
      }
      std::vector<DecisionRecord> out;
      for (std::size_t i = 0; i < records.size(); ++i)
        out.push_back(single_record(records[i].session_id, "fused", fused[i], {}));
      save_decision_records(out_path(g, "records_fused.jsonl"), out);
      print_metrics(evaluate_records(l, out));
    } else if (*eval_cmd) {
      const auto l = load_labelled(corpus_path, task_name);
      const auto metrics = evaluate_records(l, load_decision_records(records_path));
      json j = json::object();
      for (const auto& [k, v] : metrics) j[k] = json::parse(to_json(v));
      std::ofstream(out_path(g, "metrics.json")) << j.dump(2) << "\n";
      std::cout << j.dump(2) << "\n";
    } else if (*report_cmd) {
      std::vector<RunResult> results;
      for (const auto& p : result_paths) results.push_back(run_result_from_json(read_file(p)));
      const auto tables = report_tables(results, parse_table_layout(layout));
      std::ofstream(out_path(g, "table_" + layout + ".md")) << tables.markdown;
      std::ofstream(out_path(g, "table_" + layout + ".csv")) << tables.csv;
      std::cout << tables.markdown;
    } else if (*run_cmd || !g.config.empty()) {
      if (g.config.empty()) throw ConfigError("run needs --config <path>");
      auto config = load_config(g.config);
      if (g.seed) config.seeds = Seeds{*g.seed, *g.seed, *g.seed};
      if (app.get_option("--out")->count() > 0) config.output_dir = g.out;
      const auto result = run(config);
      std::cout << run_result_to_json(result) << "\n";
      return result.failed ? 2 : 0;
    } else {
      std::cout << app.help();
    }
  } catch (const mmf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
