#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mmfusion/corpus.hpp"
#include "mmfusion/error.hpp"

using namespace mmf;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  auto dir = fs::temp_directory_path() / "mmfusion_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("derive_labels at the published thresholds") {
  auto a = derive_labels(10, 17);
  CHECK(a.dep_binary);
  CHECK(a.dep_severity == 2);
  auto b = derive_labels(0, 44);
  CHECK_FALSE(b.ptsd_binary);
  CHECK(b.ptsd_severity == 1);
  auto c = derive_labels(0, 17);
  CHECK(c == LabelSet{false, false, 0, 0, 0});
  CHECK(derive_labels(24, 85).multiclass == 3);
  CHECK_THROWS_AS(derive_labels(25, 17), ValidationError);
  CHECK_THROWS_AS(derive_labels(0, 16), ValidationError);
}

TEST_CASE("severity bins") {
  const int dep_edges[] = {0, 5, 10, 15, 20};
  for (int level = 0; level < 5; ++level) {
    CHECK(dep_severity_bin(dep_edges[level]) == level);
    if (level > 0) CHECK(dep_severity_bin(dep_edges[level] - 1) == level - 1);
  }
  CHECK(ptsd_severity_bin(29) == 0);
  CHECK(ptsd_severity_bin(30) == 1);
  CHECK(ptsd_severity_bin(45) == 2);
}

TEST_CASE("derive_multiclass") {
  CHECK(derive_multiclass(false, false) == 0);
  CHECK(derive_multiclass(true, false) == 1);
  CHECK(derive_multiclass(false, true) == 2);
  CHECK(derive_multiclass(true, true) == 3);
}

TEST_CASE("session validation and normalization") {
  Session s;
  s.id = 7;
  s.utterances = {{Speaker::Participant, "b", 2.0, 3.0}, {Speaker::Interviewer, "a", 0.0, 1.0}};
  normalize_session(s);
  CHECK(s.utterances.front().text == "a");
  s.utterances[1].end_s = 1.5;
  try {
    validate_session(s);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("7") != std::string::npos);
  }
}

TEST_CASE("corpus load and save") {
  const auto path = temp_file("one.jsonl");
  Session s;
  s.id = 301;
  s.phq8 = 12;
  s.pclc = 50;
  s.utterances = {{Speaker::Participant, "fine", 3.0, 4.0}, {Speaker::Interviewer, "how are you", 0.0, 2.0}};
  {
    std::ofstream out(path);
    out << session_to_line(s) << "\n";
  }
  auto loaded = load_corpus(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].utterances[0].speaker == Speaker::Interviewer);

  s.utterances[0].end_s = 1.0;  // end before start
  {
    std::ofstream out(path);
    out << session_to_line(s) << "\n";
  }
  CHECK_THROWS_AS(load_corpus(path), ValidationError);

  {
    std::ofstream out(path);
    out << "{not json\n";
  }
  CHECK_THROWS_AS(load_corpus(path), ParseError);
}

TEST_CASE("synthetic corpus round trip") {
  SyntheticSpec spec;
  spec.n_sessions = 50;
  spec.seed = 3;
  const auto corpus = generate_synthetic(spec);
  const auto path = temp_file("synthetic.jsonl");
  save_corpus(path, corpus);
  CHECK(load_corpus(path) == corpus);
}

TEST_CASE("synthetic generation is deterministic and consistent") {
  SyntheticSpec spec;
  spec.n_sessions = 40;
  spec.seed = 9;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(a == b);
  spec.seed = 10;
  CHECK_FALSE(generate_synthetic(spec) == a);
  for (const auto& s : a) {
    CHECK_NOTHROW(validate_session(s));
    CHECK(s.utterances.size() >= spec.min_utterances);
    CHECK(s.utterances.size() <= spec.max_utterances);
    CHECK(s.split == split_for_id(s.id));
    REQUIRE(s.planted.has_value());
    CHECK(s.planted->text.rows() == s.utterances.size());
    CHECK(s.planted->text.cols() == spec.text_dim);
    REQUIRE(s.frames.has_value());
    CHECK(s.frames->features.cols() == spec.video_dim);
  }
}

TEST_CASE("split proportions are near 60/20/20") {
  std::size_t counts[3] = {0, 0, 0};
  for (std::int64_t id = 0; id < 10000; ++id) ++counts[static_cast<int>(split_for_id(id))];
  CHECK(counts[0] == doctest::Approx(6000).epsilon(0.05));
  CHECK(counts[1] == doctest::Approx(2000).epsilon(0.1));
  CHECK(counts[2] == doctest::Approx(2000).epsilon(0.1));
}

TEST_CASE("synthetic spec validation") {
  SyntheticSpec spec;
  spec.noise_sigma = 0.0;
  CHECK_THROWS_AS(validate_synthetic_spec(spec), ValidationError);
  spec = {};
  spec.class_priors = {0.5, 0.5, 0.5, 0.5};
  CHECK_THROWS_AS(validate_synthetic_spec(spec), ValidationError);
  spec = {};
  spec.text_signal = -1.0;
  CHECK_THROWS_AS(validate_synthetic_spec(spec), ValidationError);
}

TEST_CASE("label repair audit") {
  Session s;
  s.id = 320;
  s.phq8 = 15;
  s.external_dep_label = false;
  s.utterances = {{Speaker::Participant, "x", 0.0, 1.0}};
  std::vector<Session> corpus = {s};
  auto rep = apply_label_repairs(corpus, kMislabeledDepressionIds);
  CHECK(rep.repaired == 1);
  CHECK(rep.repaired_ids == std::vector<std::int64_t>{320});
  CHECK(rep.skipped == 19);

  CHECK(apply_label_repairs(corpus, {}).repaired == 0);

  corpus[0].id = 1;
  rep = apply_label_repairs(corpus, kMislabeledDepressionIds);
  CHECK(rep.repaired == 0);
  CHECK(rep.skipped == 20);
}
