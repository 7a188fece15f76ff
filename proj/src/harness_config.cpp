#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "harness_config.hpp"
#include "mmfusion/error.hpp"
#include "mmfusion/random.hpp"

namespace mmf {

std::string_view to_string(Task t) {
  switch (t) {
    case Task::DepBinary: return "dep_binary";
    case Task::PtsdBinary: return "ptsd_binary";
    case Task::DepSeverity: return "dep_severity";
    case Task::PtsdSeverity: return "ptsd_severity";
    case Task::Multiclass: return "multiclass";
  }
  return "dep_binary";
}

Task parse_task(std::string_view s) {
  for (auto t : {Task::DepBinary, Task::PtsdBinary, Task::DepSeverity, Task::PtsdSeverity, Task::Multiclass})
    if (s == to_string(t)) return t;
  throw ValidationError("unknown task '" + std::string(s) + "'");
}

bool is_severity(Task t) { return t == Task::DepSeverity || t == Task::PtsdSeverity; }

std::size_t task_classes(Task t) {
  switch (t) {
    case Task::DepBinary:
    case Task::PtsdBinary: return 2;
    case Task::DepSeverity: return kDepSeverityLevels;
    case Task::PtsdSeverity: return kPtsdSeverityLevels;
    case Task::Multiclass: return kMulticlassCount;
  }
  return 2;
}

nn::Head task_head(Task t) {
  if (is_severity(t)) return nn::Head{nn::HeadKind::Regression, 1};
  if (t == Task::Multiclass) return nn::Head{nn::HeadKind::MulticlassLogits, kMulticlassCount};
  return nn::Head{nn::HeadKind::BinaryLogits, 2};
}

int task_label(Task t, const Session& s) {
  const LabelSet l = derive_labels(s.phq8, s.pclc);
  switch (t) {
    case Task::DepBinary: return l.dep_binary ? 1 : 0;
    case Task::PtsdBinary: return l.ptsd_binary ? 1 : 0;
    case Task::DepSeverity: return l.dep_severity;
    case Task::PtsdSeverity: return l.ptsd_severity;
    case Task::Multiclass: return l.multiclass;
  }
  return 0;
}

std::string_view to_string(FusionKind k) {
  switch (k) {
    case FusionKind::None: return "none";
    case FusionKind::DataLevel: return "data";
    case FusionKind::FeatureLevel: return "feature";
    case FusionKind::DecisionBinary: return "decision_binary";
    case FusionKind::DecisionLogits: return "decision_logits";
    case FusionKind::DecisionMulticlass: return "decision_multiclass";
    case FusionKind::DecisionSeverity: return "decision_severity";
  }
  return "none";
}

FusionKind parse_fusion_kind(std::string_view s) {
  for (auto k : {FusionKind::None, FusionKind::DataLevel, FusionKind::FeatureLevel, FusionKind::DecisionBinary,
                 FusionKind::DecisionLogits, FusionKind::DecisionMulticlass, FusionKind::DecisionSeverity})
    if (s == to_string(k)) return k;
  throw ValidationError("unknown fusion kind '" + std::string(s) + "'");
}

std::string_view to_string(EmbeddingSource s) {
  switch (s) {
    case EmbeddingSource::Planted: return "planted";
    case EmbeddingSource::Deterministic: return "deterministic";
    case EmbeddingSource::Store: return "store";
    case EmbeddingSource::Remote: return "remote";
  }
  return "planted";
}

EmbeddingSource parse_embedding_source(std::string_view s) {
  for (auto e : {EmbeddingSource::Planted, EmbeddingSource::Deterministic, EmbeddingSource::Store,
                 EmbeddingSource::Remote})
    if (s == to_string(e)) return e;
  throw ValidationError("unknown embedding source '" + std::string(s) + "'");
}

namespace detail {
namespace {

// Reads one JSON object, tracking the field path for error messages and rejecting
// keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& at(const char* key) {
    if (!has(key)) throw ConfigError(field(key) + ": required field is missing");
    return j_.at(key);
  }

  std::string str(const char* key, std::string def) {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
    return v.get<std::string>();
  }

  bool boolean(const char* key, bool def) {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(field(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::uint64_t uint(const char* key, std::uint64_t def) {
    if (!has(key)) return def;
    return as_uint(j_.at(key), field(key));
  }

  double number(const char* key, double def) {
    if (!has(key)) return def;
    return as_number(j_.at(key), field(key));
  }

  std::vector<std::size_t> uint_list(const char* key, std::vector<std::size_t> def) {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(field(key) + ": expected an array of non-negative integers");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_uint(v[i], field(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  std::vector<double> number_list(const char* key, std::vector<double> def) {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(field(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], field(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  template <class F>
  auto parsed(const char* key, F parse, decltype(parse(std::string_view{})) def) {
    if (!has(key)) return def;
    const std::string s = str(key, "");
    try {
      return parse(s);
    } catch (const ValidationError& e) {
      throw ConfigError(field(key) + ": " + e.what());
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (seen_.count(it.key())) continue;
      std::string allowed;
      for (const auto& k : seen_) allowed += (allowed.empty() ? "" : ", ") + k;
      throw ConfigError(field(it.key().c_str()) + ": unknown field (allowed: " + allowed + ")");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  static std::uint64_t as_uint(const json& v, const std::string& f) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw ConfigError(f + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  static double as_number(const json& v, const std::string& f) {
    if (!v.is_number()) throw ConfigError(f + ": expected a number");
    return v.get<double>();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json model_json(const nn::ModelSpec& s) {
  return json{{"architecture", nn::to_string(s.architecture)},
              {"hidden", s.hidden},
              {"kernel_size", s.kernel_size},
              {"n_filters", s.n_filters},
              {"lstm_hidden", s.lstm_hidden},
              {"activation", nn::to_string(s.activation)}};
}

nn::ModelSpec model_from(const json& j, const std::string& path) {
  Reader r(j, path);
  nn::ModelSpec s;
  s.architecture = r.parsed("architecture", nn::parse_architecture, s.architecture);
  s.hidden = r.uint_list("hidden", s.hidden);
  s.kernel_size = r.uint("kernel_size", s.kernel_size);
  s.n_filters = r.uint("n_filters", s.n_filters);
  s.lstm_hidden = r.uint("lstm_hidden", s.lstm_hidden);
  s.activation = r.parsed("activation", nn::parse_activation, s.activation);
  r.finish();
  return s;
}

json kernel_json(const KernelSpec& k) {
  json j{{"kernel", to_string(k.kind)}};
  j["gamma"] = k.gamma ? json(*k.gamma) : json(nullptr);
  return j;
}

}  // namespace

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["task"] = to_string(c.task);
  j["output_dir"] = c.output_dir;

  json corpus;
  corpus["path"] = c.corpus.path.empty() ? json(nullptr) : json(c.corpus.path);
  if (c.corpus.synthetic) {
    const auto& s = *c.corpus.synthetic;
    corpus["synthetic"] = json{{"n_sessions", s.n_sessions},     {"min_utterances", s.min_utterances},
                               {"max_utterances", s.max_utterances}, {"text_dim", s.text_dim},
                               {"audio_dim", s.audio_dim},       {"video_dim", s.video_dim},
                               {"text_signal", s.text_signal},   {"audio_signal", s.audio_signal},
                               {"video_signal", s.video_signal}, {"noise_sigma", s.noise_sigma},
                               {"class_priors", s.class_priors}, {"frame_interval_s", s.frame_interval_s}};
  } else {
    corpus["synthetic"] = nullptr;
  }
  j["corpus"] = corpus;

  const auto& p = c.embedding.provider;
  j["embedding"] = json{{"source", to_string(c.embedding.source)},
                        {"dim", p.dim},
                        {"seed", p.seed},
                        {"store_path", p.store_path},
                        {"endpoint", p.endpoint},
                        {"auth_token_env", p.auth_token_env},
                        {"retries", p.retries},
                        {"backoff_ms", p.backoff.count()},
                        {"max_in_flight", p.max_in_flight},
                        {"cache", c.embedding.cache}};

  json mods = json::array();
  for (const auto& m : c.modalities) {
    json svm = kernel_json(m.svm.kernel);
    svm["C"] = m.svm.C;
    svm["tol"] = m.svm.tol;
    if (m.svm.search) {
      svm["search"] = json{{"C", m.svm.search->C}, {"gamma", m.svm.search->gamma}, {"trials", m.svm.search->trials}};
    } else {
      svm["search"] = nullptr;
    }
    mods.push_back(json{{"name", m.name},
                        {"format", m.format},
                        {"normalize", m.normalize},
                        {"model", model_json(m.model)},
                        {"head", m.head == HeadChoice::MLP ? "mlp" : "svm"},
                        {"svm", svm}});
  }
  j["modalities"] = mods;

  json fusion = kernel_json(c.fusion.kernel);
  fusion["kind"] = to_string(c.fusion.kind);
  fusion["mode"] = to_string(c.fusion.mode);
  fusion["include_llm"] = c.fusion.include_llm;
  fusion["llm_predictions"] = c.fusion.llm_predictions;
  fusion["head_hidden"] = c.fusion.head_hidden;
  fusion["model"] = model_json(c.fusion.model);
  fusion["C"] = c.fusion.C;
  j["fusion"] = fusion;

  const auto& t = c.train;
  j["train"] = json{{"epochs", t.epochs},
                    {"batch_size", t.batch_size},
                    {"learning_rate", t.learning_rate},
                    {"optimizer", t.optimizer == nn::Optimizer::Adam ? "adam" : "sgd"},
                    {"beta1", t.beta1},
                    {"beta2", t.beta2},
                    {"epsilon", t.epsilon}};
  j["train"]["early_stop_patience"] = t.early_stop_patience ? json(*t.early_stop_patience) : json(nullptr);
  j["seeds"] = json{{"data", c.seeds.data}, {"init", c.seeds.init}, {"search", c.seeds.search}};
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Reader r(j, "");
  c.name = r.str("name", c.name);
  c.task = r.parsed("task", parse_task, c.task);
  c.output_dir = r.str("output_dir", "");

  {
    Reader cr(r.at("corpus"), "corpus");
    c.corpus.path = cr.str("path", "");
    if (cr.has("synthetic")) {
      Reader sr(cr.at("synthetic"), "corpus.synthetic");
      SyntheticSpec s;
      s.n_sessions = sr.uint("n_sessions", s.n_sessions);
      s.min_utterances = sr.uint("min_utterances", s.min_utterances);
      s.max_utterances = sr.uint("max_utterances", s.max_utterances);
      s.text_dim = sr.uint("text_dim", s.text_dim);
      s.audio_dim = sr.uint("audio_dim", s.audio_dim);
      s.video_dim = sr.uint("video_dim", s.video_dim);
      s.text_signal = sr.number("text_signal", s.text_signal);
      s.audio_signal = sr.number("audio_signal", s.audio_signal);
      s.video_signal = sr.number("video_signal", s.video_signal);
      s.noise_sigma = sr.number("noise_sigma", s.noise_sigma);
      const auto priors = sr.number_list("class_priors", {s.class_priors.begin(), s.class_priors.end()});
      if (priors.size() != 4) throw ConfigError("corpus.synthetic.class_priors: expected 4 values");
      std::copy(priors.begin(), priors.end(), s.class_priors.begin());
      s.frame_interval_s = sr.number("frame_interval_s", s.frame_interval_s);
      sr.finish();
      c.corpus.synthetic = s;
    }
    cr.finish();
  }

  if (r.has("embedding")) {
    Reader er(r.at("embedding"), "embedding");
    auto& p = c.embedding.provider;
    c.embedding.source = er.parsed("source", parse_embedding_source, c.embedding.source);
    p.dim = er.uint("dim", p.dim);
    p.seed = er.uint("seed", p.seed);
    p.store_path = er.str("store_path", p.store_path);
    p.endpoint = er.str("endpoint", p.endpoint);
    p.auth_token_env = er.str("auth_token_env", p.auth_token_env);
    p.retries = static_cast<int>(er.uint("retries", static_cast<std::uint64_t>(p.retries)));
    p.backoff = std::chrono::milliseconds(er.uint("backoff_ms", static_cast<std::uint64_t>(p.backoff.count())));
    p.max_in_flight = er.uint("max_in_flight", p.max_in_flight);
    c.embedding.cache = er.boolean("cache", c.embedding.cache);
    switch (c.embedding.source) {
      case EmbeddingSource::Store: p.kind = ProviderKind::Store; break;
      case EmbeddingSource::Remote: p.kind = ProviderKind::Remote; break;
      default: p.kind = ProviderKind::Deterministic; break;
    }
    er.finish();
  }

  const auto& mods = r.at("modalities");
  if (!mods.is_array()) throw ConfigError("modalities: expected an array");
  for (std::size_t i = 0; i < mods.size(); ++i) {
    const std::string path = "modalities[" + std::to_string(i) + "]";
    Reader mr(mods[i], path);
    ModalityConfig m;
    m.name = mr.str("name", m.name);
    m.format = mr.str("format", m.format);
    m.normalize = mr.boolean("normalize", m.normalize);
    if (mr.has("model")) m.model = model_from(mr.at("model"), path + ".model");
    const std::string head = mr.str("head", "mlp");
    if (head == "mlp") m.head = HeadChoice::MLP;
    else if (head == "svm") m.head = HeadChoice::SVM;
    else throw ConfigError(path + ".head: expected \"mlp\" or \"svm\"");
    if (mr.has("svm")) {
      Reader sr(mr.at("svm"), path + ".svm");
      m.svm.kernel.kind = sr.parsed("kernel", parse_kernel_kind, m.svm.kernel.kind);
      if (sr.has("gamma")) m.svm.kernel.gamma = sr.number("gamma", 0.0);
      m.svm.C = sr.number("C", m.svm.C);
      m.svm.tol = sr.number("tol", m.svm.tol);
      if (sr.has("search")) {
        Reader qr(sr.at("search"), path + ".svm.search");
        SearchSpace s;
        s.C = qr.number_list("C", s.C);
        s.gamma = qr.number_list("gamma", s.gamma);
        s.trials = qr.uint("trials", s.trials);
        qr.finish();
        m.svm.search = s;
      }
      sr.finish();
    }
    mr.finish();
    c.modalities.push_back(std::move(m));
  }

  if (r.has("fusion")) {
    Reader fr(r.at("fusion"), "fusion");
    auto& f = c.fusion;
    f.kind = fr.parsed("kind", parse_fusion_kind, f.kind);
    f.mode = fr.parsed("mode", parse_feature_mode, f.mode);
    f.include_llm = fr.boolean("include_llm", f.include_llm);
    f.llm_predictions = fr.str("llm_predictions", f.llm_predictions);
    f.head_hidden = fr.uint_list("head_hidden", f.head_hidden);
    if (fr.has("model")) f.model = model_from(fr.at("model"), "fusion.model");
    f.kernel.kind = fr.parsed("kernel", parse_kernel_kind, f.kernel.kind);
    if (fr.has("gamma")) f.kernel.gamma = fr.number("gamma", 0.0);
    f.C = fr.number("C", f.C);
    fr.finish();
  }

  if (r.has("train")) {
    Reader tr(r.at("train"), "train");
    auto& t = c.train;
    t.epochs = tr.uint("epochs", t.epochs);
    t.batch_size = tr.uint("batch_size", t.batch_size);
    t.learning_rate = tr.number("learning_rate", t.learning_rate);
    const std::string opt = tr.str("optimizer", "adam");
    if (opt == "adam") t.optimizer = nn::Optimizer::Adam;
    else if (opt == "sgd") t.optimizer = nn::Optimizer::SGD;
    else throw ConfigError("train.optimizer: expected \"adam\" or \"sgd\"");
    t.beta1 = tr.number("beta1", t.beta1);
    t.beta2 = tr.number("beta2", t.beta2);
    t.epsilon = tr.number("epsilon", t.epsilon);
    if (tr.has("early_stop_patience")) t.early_stop_patience = tr.uint("early_stop_patience", 0);
    tr.finish();
  }

  if (r.has("seeds")) {
    Reader sr(r.at("seeds"), "seeds");
    c.seeds.data = sr.uint("data", c.seeds.data);
    c.seeds.init = sr.uint("init", c.seeds.init);
    c.seeds.search = sr.uint("search", c.seeds.search);
    sr.finish();
  }
  r.finish();
  return c;
}

}  // namespace detail

ExperimentConfig parse_config(std::string_view text) {
  detail::json j;
  try {
    j = detail::json::parse(text);
  } catch (const detail::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c = detail::config_from_json(j);
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& config) { return detail::config_json(config).dump(2); }

void validate_config(const ExperimentConfig& c) {
  if (c.corpus.path.empty() == !c.corpus.synthetic.has_value())
    throw ConfigError("corpus: give exactly one of path or synthetic");
  if (!c.corpus.path.empty() && !std::filesystem::exists(c.corpus.path))
    throw ConfigError("corpus.path: file not found: " + c.corpus.path);
  if (c.corpus.synthetic) {
    try {
      validate_synthetic_spec(*c.corpus.synthetic);
    } catch (const Error& e) {
      throw ConfigError(std::string("corpus.synthetic: ") + e.what());
    }
  }

  const auto& e = c.embedding;
  if (e.source == EmbeddingSource::Store && e.provider.store_path.empty())
    throw ConfigError("embedding.store_path: required for the store source");
  if (e.source == EmbeddingSource::Remote && e.provider.endpoint.empty())
    throw ConfigError("embedding.endpoint: required for the remote source");
  if (e.provider.dim == 0) throw ConfigError("embedding.dim: must be >= 1");

  if (c.modalities.empty()) throw ConfigError("modalities: at least one modality is required");
  std::set<std::string> names;
  for (std::size_t i = 0; i < c.modalities.size(); ++i) {
    const auto& m = c.modalities[i];
    const std::string path = "modalities[" + std::to_string(i) + "]";
    if (m.name != "text" && m.name != "audio" && m.name != "video")
      throw ConfigError(path + ".name: expected text, audio or video");
    if (!names.insert(m.name).second) throw ConfigError(path + ".name: modality '" + m.name + "' listed twice");
    try {
      (void)parse_format(m.format);
    } catch (const Error& err) {
      throw ConfigError(path + ".format: " + err.what());
    }
    nn::ModelSpec probe = m.model;
    probe.input_dim = 1;
    probe.head = task_head(c.task);
    try {
      nn::validate_spec(probe);
    } catch (const Error& err) {
      throw ConfigError(path + ".model: " + err.what());
    }
    if (m.head == HeadChoice::SVM && is_severity(c.task))
      throw ConfigError(path + ".head: the SVM head is for classification tasks only");
    if (m.svm.C <= 0) throw ConfigError(path + ".svm.C: must be > 0");
    if (m.svm.tol <= 0) throw ConfigError(path + ".svm.tol: must be > 0");
    if (m.svm.kernel.gamma && *m.svm.kernel.gamma <= 0) throw ConfigError(path + ".svm.gamma: must be > 0");
    if (m.svm.search && m.svm.search->C.empty()) throw ConfigError(path + ".svm.search.C: must not be empty");
  }

  const auto& f = c.fusion;
  const bool binary = c.task == Task::DepBinary || c.task == Task::PtsdBinary;
  switch (f.kind) {
    case FusionKind::None:
      if (c.modalities.size() != 1) throw ConfigError("fusion.kind: \"none\" needs exactly one modality");
      break;
    case FusionKind::DataLevel: {
      if (c.modalities.size() < 2) throw ConfigError("fusion.kind: data-level fusion needs two or more modalities");
      for (const auto& m : c.modalities)
        if (m.format != c.modalities.front().format)
          throw ConfigError("modalities: data-level fusion needs one shared format so chunks align");
      nn::ModelSpec probe = f.model;
      probe.input_dim = 1;
      probe.head = task_head(c.task);
      try {
        nn::validate_spec(probe);
      } catch (const Error& err) {
        throw ConfigError(std::string("fusion.model: ") + err.what());
      }
      break;
    }
    case FusionKind::FeatureLevel:
      if (c.modalities.size() < 2) throw ConfigError("fusion.kind: feature-level fusion needs two or more modalities");
      break;
    case FusionKind::DecisionBinary:
      if (!binary) throw ConfigError("fusion.kind: decision_binary needs a binary task");
      break;
    case FusionKind::DecisionLogits:
      if (is_severity(c.task)) throw ConfigError("fusion.kind: decision_logits needs a classification task");
      break;
    case FusionKind::DecisionMulticlass:
      if (c.task != Task::Multiclass) throw ConfigError("fusion.kind: decision_multiclass needs the multiclass task");
      break;
    case FusionKind::DecisionSeverity:
      if (!is_severity(c.task)) throw ConfigError("fusion.kind: decision_severity needs a severity task");
      break;
  }
  if (f.include_llm) {
    if (f.kind != FusionKind::DecisionBinary && f.kind != FusionKind::DecisionMulticlass &&
        f.kind != FusionKind::DecisionSeverity)
      throw ConfigError("fusion.include_llm: only decision_binary, decision_multiclass and decision_severity take an LLM channel");
    if (f.llm_predictions.empty())
      throw ConfigError("fusion.llm_predictions: required when include_llm is true");
    if (!std::filesystem::exists(f.llm_predictions))
      throw ConfigError("fusion.llm_predictions: file not found: " + f.llm_predictions);
  }
  if (f.C <= 0) throw ConfigError("fusion.C: must be > 0");
  if (f.kernel.gamma && *f.kernel.gamma <= 0) throw ConfigError("fusion.gamma: must be > 0");

  try {
    nn::validate_train_config(c.train);
  } catch (const Error& err) {
    throw ConfigError(std::string("train: ") + err.what());
  }
  if (c.train.epochs == 0) throw ConfigError("train.epochs: must be >= 1");
}

std::string config_digest(const ExperimentConfig& config) {
  auto j = detail::config_json(config);
  j.erase("name");
  j.erase("output_dir");
  j["embedding"].erase("cache");
  return detail::hex16(fnv1a64(j.dump()));
}

}  // namespace mmf
