#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mmfusion/chunking.hpp"
#include "mmfusion/error.hpp"
#include "mmfusion/harness.hpp"
#include "mmfusion/random.hpp"

using namespace mmf;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig = R"({
  "name": "small",
  "corpus": {"synthetic": {"n_sessions": 60, "text_signal": 3.0}},
  "task": "dep_binary",
  "modalities": [{"name": "text", "format": "utterances_10_overlap_4", "normalize": true,
                  "model": {"architecture": "bilstm", "lstm_hidden": 4, "activation": "tanh"}}],
  "train": {"epochs": 5, "batch_size": 8, "learning_rate": 0.01}
})";

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

RunResult fake_result(const std::string& format, bool normalize, double test_ba, double dev_ba) {
  RunResult r;
  ModalityConfig m;
  m.format = format;
  m.normalize = normalize;
  r.config.modalities = {m};
  r.metrics["test"].balanced_accuracy = test_ba;
  r.metrics["dev"].balanced_accuracy = dev_ba;
  return r;
}

}  // namespace

TEST_CASE("task helpers") {
  CHECK(task_classes(Task::DepSeverity) == 5);
  CHECK(task_classes(Task::Multiclass) == 4);
  CHECK(is_severity(Task::PtsdSeverity));
  CHECK(task_head(Task::DepSeverity).kind == nn::HeadKind::Regression);
  Session s;
  s.phq8 = 12;
  s.pclc = 50;
  CHECK(task_label(Task::Multiclass, s) == 3);
  CHECK(task_label(Task::DepSeverity, s) == 2);
  CHECK(parse_task(to_string(Task::PtsdBinary)) == Task::PtsdBinary);
}

TEST_CASE("config parsing is strict") {
  const auto c = parse_config(kSmallConfig);
  CHECK(c.modalities.size() == 1);
  CHECK(c.modalities[0].model.architecture == nn::Architecture::BiLSTM);
  CHECK(c.train.epochs == 5);
  CHECK(parse_config(config_to_json(c)).modalities[0].model == c.modalities[0].model);

  std::string bad = kSmallConfig;
  bad.replace(bad.find("\"epochs\""), 8, "\"epoch\"");
  try {
    parse_config(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("train.epoch") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"task": "anxiety"})"), ConfigError);
}

TEST_CASE("config validation") {
  auto c = parse_config(kSmallConfig);
  c.fusion.kind = FusionKind::DecisionBinary;
  c.fusion.include_llm = true;
  c.modalities.push_back(c.modalities[0]);
  c.modalities[1].name = "audio";
  CHECK_THROWS_AS(validate_config(c), ConfigError);  // LLM channel without a predictions file

  c = parse_config(kSmallConfig);
  c.task = Task::DepSeverity;
  c.modalities[0].head = HeadChoice::SVM;
  CHECK_THROWS_AS(validate_config(c), ConfigError);

  c = parse_config(kSmallConfig);
  c.modalities.push_back(c.modalities[0]);
  CHECK_THROWS_AS(validate_config(c), ConfigError);  // duplicate modality, no fusion

  c = parse_config(kSmallConfig);
  c.fusion.kind = FusionKind::DataLevel;
  CHECK_THROWS_AS(validate_config(c), ConfigError);
}

TEST_CASE("LLM fusion without predictions fails before training") {
  auto c = parse_config(kSmallConfig);
  c.modalities.push_back(c.modalities[0]);
  c.modalities[1].name = "audio";
  c.fusion.kind = FusionKind::DecisionBinary;
  c.fusion.include_llm = true;
  c.fusion.llm_predictions = "/nonexistent/llm.jsonl";
  c.output_dir = (fs::temp_directory_path() / "mmfusion_llm_missing").string();
  fs::remove_all(c.output_dir);
  CHECK_THROWS_AS(run(c), ConfigError);
  CHECK_FALSE(fs::exists(fs::path(c.output_dir) / "models"));
}

TEST_CASE("config digest ignores name and output location") {
  auto a = parse_config(kSmallConfig);
  auto b = a;
  b.name = "other";
  b.output_dir = "/tmp/elsewhere";
  CHECK(config_digest(a) == config_digest(b));
  CHECK(config_digest(a).size() == 16);
  b.train.epochs = 6;
  CHECK(config_digest(a) != config_digest(b));
}

TEST_CASE("model_input pools MLP inputs") {
  EmbeddingMatrix m;
  m.rows = Matrix::from_rows({{1, 2}, {3, 6}});
  CHECK(model_input(m, nn::Architecture::MLP) == Matrix::from_rows({{2, 4}}));
  CHECK(model_input(m, nn::Architecture::BiLSTM) == m.rows);
}

TEST_CASE("planted store and modality embedding") {
  SyntheticSpec spec;
  spec.n_sessions = 5;
  const auto corpus = generate_synthetic(spec);
  const auto format = parse_format("utterances_10_overlap_4");
  const auto store = std::make_shared<EmbeddingStore>(planted_store(corpus, "text", format));
  CHECK(store->dim() == spec.text_dim);
  StoreProvider provider(store);
  const auto text = embed_modality(corpus, "text", format, &provider);
  REQUIRE(text.size() == 5);
  CHECK(text[0].rows.rows() == format_session(corpus[0], format).chunks.size());
  const auto video = embed_modality(corpus, "video", format, nullptr);
  CHECK(video[0].rows.rows() == text[0].rows.rows());
  CHECK(video[0].rows.cols() == spec.video_dim);
}

TEST_CASE("report deltas") {
  MetricReport a, b;
  a.balanced_accuracy = 0.7;
  b.balanced_accuracy = 0.8;
  a.mae = 1.0;
  b.mae = 0.5;
  for (const auto& d : compare_reports(a, b)) {
    CHECK(d.improved);
    if (d.metric == "mae") CHECK(d.delta < 0);
    if (d.metric == "balanced_accuracy") CHECK(d.delta > 0);
  }
  for (const auto& d : compare_reports(a, a)) CHECK(d.delta == 0.0);
}

TEST_CASE("SVM head swap on separable features") {
  Rng rng(1);
  std::vector<nn::Sample> data;
  for (int i = 0; i < 30; ++i) {
    nn::Sample s;
    s.target = i % 2;
    s.x = Matrix(1, 3);
    for (auto& v : s.x.data()) v = rng.normal();
    s.x(0, 0) += s.target ? 6.0 : -6.0;
    data.push_back(s);
  }
  nn::ModelSpec spec;
  spec.input_dim = 3;  // no hidden layer: the penultimate features are the inputs
  nn::TrainConfig cfg;
  cfg.epochs = 20;
  const auto m = nn::train(spec, data, cfg);
  const auto swap = swap_head_to_svm(m, data, data, KernelSpec{}, 10.0);
  CHECK(*swap.svm.accuracy >= *swap.mlp.accuracy);
}

TEST_CASE("report tables") {
  std::vector<RunResult> two = {fake_result("utterances_10_overlap_4", false, 0.8, 0.75),
                                fake_result("utterances_10_overlap_4", true, 0.123456789012345678, 0.7)};
  auto t = report_tables(two, TableLayout::Formats);
  std::size_t body_rows = 0;
  for (const auto& line : split_lines(t.markdown))
    if (line.find("utterances_10_overlap_4") != std::string::npos) ++body_rows;
  CHECK(body_rows == 1);
  CHECK(t.markdown.find("BA (w/ norm)") != std::string::npos);

  const auto csv = split_lines(t.csv);
  bool found = false;
  for (const auto& line : csv)
    if (line.find("0.12345678901234") != std::string::npos) {
      const auto field_start = line.find("0.12345678901234");
      CHECK(std::stod(line.substr(field_start)) == 0.123456789012345678);
      found = true;
    }
  CHECK(found);

  std::vector<RunResult> one = {fake_result("qa", false, 0.6, 0.6)};
  t = report_tables(one, TableLayout::Models);
  body_rows = 0;
  for (const auto& line : split_lines(t.markdown))
    if (line.find("qa") != std::string::npos) ++body_rows;
  CHECK(body_rows == 1);
}

TEST_CASE("a small run writes its artifacts and is reproducible") {
  auto c = parse_config(kSmallConfig);
  c.output_dir = (fs::temp_directory_path() / "mmfusion_small_run").string();
  fs::remove_all(c.output_dir);
  const auto r = run(c);
  CHECK_FALSE(r.failed);
  CHECK(r.metrics.count("test") == 1);
  CHECK(r.audit_before_eval == AccessAudit{});
  CHECK(fs::exists(fs::path(c.output_dir) / "run_result.json"));
  CHECK(fs::exists(fs::path(c.output_dir) / "predictions.jsonl"));

  std::ifstream in(fs::path(c.output_dir) / "run_result.json");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto back = run_result_from_json(ss.str());
  CHECK(result_fingerprint(back) == result_fingerprint(r));
  CHECK(back.metrics == r.metrics);

  c.output_dir.clear();
  CHECK(result_fingerprint(run(c)) == result_fingerprint(r));
}
