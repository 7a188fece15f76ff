#include <doctest.h>

#include "mmfusion/chunking.hpp"
#include "mmfusion/error.hpp"

using namespace mmf;

namespace {

Session figure_dialogue() {
  const std::vector<std::pair<Speaker, std::string>> turns = {
      {Speaker::Interviewer, "How are you doing today?"},
      {Speaker::Participant, "Good."},
      {Speaker::Interviewer, "What's good?"},
      {Speaker::Interviewer, "Where are you from originally?"},
      {Speaker::Participant, "Atlanta, Georgia."},
      {Speaker::Interviewer, "Really? Why'd you move to LA?"},
      {Speaker::Participant, "My parents are from here."},
      {Speaker::Interviewer, "How do you like LA?"},
      {Speaker::Participant, "I love it."},
      {Speaker::Interviewer, "What are some things you really like about LA?"},
      {Speaker::Participant, "I like the weather."},
      {Speaker::Participant, "I like the opportunities."},
  };
  Session s;
  s.id = 1;
  double t = 0.0;
  for (const auto& [who, text] : turns) {
    s.utterances.push_back({who, text, t, t + 1.0});
    t += 1.5;
  }
  return s;
}

Session numbered_session(std::size_t n) {
  Session s;
  s.id = 2;
  for (std::size_t i = 0; i < n; ++i)
    s.utterances.push_back({Speaker::Participant, "u" + std::to_string(i), double(i), double(i) + 0.5});
  return s;
}

}  // namespace

TEST_CASE("window_indices hand examples") {
  CHECK(window_indices(23, 10, 4) == std::vector<Window>{{0, 10}, {6, 16}, {12, 22}, {18, 23}});
  CHECK(window_indices(10, 10, 4) == std::vector<Window>{{0, 10}});
  CHECK(window_indices(12, 10, 4) == std::vector<Window>{{0, 10}, {6, 12}});
  CHECK(window_indices(3, 10, 4) == std::vector<Window>{{0, 3}});
  CHECK_THROWS_AS(window_indices(0, 10, 4), ParameterError);
  CHECK_THROWS_AS(window_indices(10, 4, 4), ParameterError);
  CHECK_THROWS_AS(window_indices(10, 0, 0), ParameterError);
}

TEST_CASE("window_indices properties") {
  for (std::size_t n = 1; n <= 40; ++n)
    for (std::size_t w = 1; w <= 12; ++w)
      for (std::size_t o = 0; o < w; ++o) {
        const auto ws = window_indices(n, w, o);
        REQUIRE_FALSE(ws.empty());
        CHECK(ws.front().start_idx == 0);
        CHECK(ws.back().end_idx == n);
        for (std::size_t i = 0; i + 1 < ws.size(); ++i) {
          CHECK(ws[i + 1].start_idx == ws[i].start_idx + (w - o));
          CHECK(ws[i].size() == w);
        }
      }
}

TEST_CASE("extract_qa_pairs on the figure dialogue") {
  const auto pairs = extract_qa_pairs(figure_dialogue());
  REQUIRE(pairs.size() == 5);
  CHECK(pairs[0].question == "How are you doing today?");
  CHECK(pairs[0].answer == "Good.");
  CHECK(pairs[1].question == "What's good? Where are you from originally?");
  CHECK(pairs[1].answer == "Atlanta, Georgia.");
  CHECK(pairs[4].answer == "I like the weather. I like the opportunities.");
  CHECK(pairs[1].question_indices == std::vector<std::size_t>{2, 3});
}

TEST_CASE("extract_qa_pairs merge rules") {
  Session s;
  s.utterances = {{Speaker::Interviewer, "Q", 0, 1},
                  {Speaker::Participant, "A1", 1, 2},
                  {Speaker::Participant, "A2", 2, 3},
                  {Speaker::Interviewer, "Q2", 3, 4},
                  {Speaker::Participant, "A3", 4, 5}};
  const auto pairs = extract_qa_pairs(s);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].answer == "A1 A2");
  CHECK(pairs[1].question == "Q2");
  CHECK(pairs[1].answer == "A3");
  CHECK(extract_qa_pairs(numbered_session(4)).empty());
}

TEST_CASE("format_whole_interview") {
  const auto qa = format_whole_interview(figure_dialogue(), true);
  CHECK(qa.rfind("Question 1: How are you doing today?\nAnswer 1: Good.", 0) == 0);
  CHECK(qa.find("Question 5:") != std::string::npos);
  CHECK(qa.find("Question 6:") == std::string::npos);

  Session one;
  one.utterances = {{Speaker::Participant, "Hello there.", 0, 1}};
  CHECK(format_whole_interview(one, false) == "Participant: Hello there.");

  // An unanswered question is not numbered.
  Session gap;
  gap.utterances = {{Speaker::Interviewer, "Q1", 0, 1},
                    {Speaker::Participant, "", 1, 2},
                    {Speaker::Interviewer, "Q2", 2, 3},
                    {Speaker::Participant, "A2", 3, 4}};
  CHECK(format_whole_interview(gap, true) == "Question 1: Q2\nAnswer 1: A2");
}

TEST_CASE("chunk_text composes with window_indices") {
  const auto chunked = chunk_text(numbered_session(23), ChunkUnit::Utterance, 10, 4);
  REQUIRE(chunked.chunks.size() == 4);
  CHECK(chunked.chunks[3].utterance_indices.size() == 5);
  CHECK(chunked.chunks[1].utterance_indices.front() == 6);
  CHECK(chunked.chunks[0].time_span == TimeSpan{0.0, 9.5});

  const auto qa5 = chunk_text(figure_dialogue(), ChunkUnit::QAPair, 5, 2);
  CHECK(qa5.chunks.size() == 1);

  Session seven;
  for (int i = 0; i < 7; ++i) {
    seven.utterances.push_back({Speaker::Interviewer, "q" + std::to_string(i), 2.0 * i, 2.0 * i + 0.5});
    seven.utterances.push_back({Speaker::Participant, "a" + std::to_string(i), 2.0 * i + 1, 2.0 * i + 1.5});
  }
  const auto qa7 = chunk_text(seven, ChunkUnit::QAPair, 5, 2);
  REQUIRE(qa7.chunks.size() == 2);
  CHECK(qa7.chunks[1].item_indices == std::vector<std::size_t>{3, 4, 5, 6});
}

TEST_CASE("audio spans") {
  Session s;
  s.utterances = {{Speaker::Participant, "x", 0.0, 12.5}};
  auto spans = audio_spans_for_chunks(chunk_text(s, ChunkUnit::Utterance, 10, 4));
  CHECK(spans == std::vector<TimeSpan>{{0.0, 12.5}});

  s.utterances = {{Speaker::Participant, "x", 3.2, 4.1}};
  spans = audio_spans_for_chunks(chunk_text(s, ChunkUnit::Utterance, 1, 0));
  CHECK(spans == std::vector<TimeSpan>{{3.2, 4.1}});

  spans = audio_spans_for_chunks(chunk_text(numbered_session(23), ChunkUnit::Utterance, 10, 4));
  REQUIRE(spans.size() == 4);
  for (std::size_t i = 0; i + 1 < spans.size(); ++i) CHECK(spans[i + 1].start_s < spans[i].end_s);
}

TEST_CASE("video pooling per utterance") {
  FrameFeatures f;
  f.timestamps = {0.2, 0.6};
  f.features = Matrix::from_rows({{1, 5}, {3, 2}});
  std::vector<Utterance> us = {{Speaker::Participant, "a", 0.0, 1.0}, {Speaker::Participant, "b", 2.0, 3.0}};
  auto pooled = pool_video_per_utterance(f, us);
  CHECK(pooled.rows == Matrix::from_rows({{3, 5}, {0, 0}}));
  CHECK(pooled.present == std::vector<bool>{true, false});

  f.timestamps = {0.5};
  f.features = Matrix::from_rows({{-1, 4}});
  pooled = pool_video_per_utterance(f, std::span(us.data(), 1));
  CHECK(pooled.rows == Matrix::from_rows({{-1, 4}}));
}

TEST_CASE("align_video_chunks slices rows") {
  Matrix rows(23, 2);
  for (std::size_t r = 0; r < 23; ++r) rows(r, 0) = double(r);
  const auto parts = align_video_chunks(rows, window_indices(23, 10, 4));
  REQUIRE(parts.size() == 4);
  CHECK(parts[0].rows() == 10);
  CHECK(parts[3].rows() == 5);
  CHECK(parts[1](0, 0) == 6.0);
  CHECK(align_video_chunks(rows, std::vector<Window>{{0, 23}})[0] == rows);
}

TEST_CASE("sum_answer_vectors") {
  std::vector<std::vector<double>> v = {{1, 2}, {3, 4}};
  CHECK(sum_answer_vectors(v) == std::vector<double>{4, 6});
  v = {{1.5, -2}};
  CHECK(sum_answer_vectors(v) == std::vector<double>{1.5, -2});
  v = {{1.5, -2}, {-1.5, 2}};
  CHECK(sum_answer_vectors(v) == std::vector<double>{0, 0});
  v = {{1}, {1, 2}};
  CHECK_THROWS_AS(sum_answer_vectors(v), ParameterError);
  CHECK_THROWS_AS(sum_answer_vectors({}), ParameterError);
}

TEST_CASE("format names round trip") {
  for (const char* name : {"full_interview", "qa", "qa_pairs_5", "qa_pairs_5_overlap_2", "utterances_10_overlap_4",
                           "utterances_10", "answers_chunks", "answers_concatenated", "answers_summed"}) {
    CHECK(parse_format(name).name() == name);
  }
  CHECK_THROWS(parse_format("utterances_x"));
  CHECK_THROWS(parse_format("utterances_4_overlap_4"));
}

TEST_CASE("chunked session serialization") {
  const auto chunked = format_session(figure_dialogue(), parse_format("qa_pairs_2_overlap_1"));
  CHECK(chunked.format_name == "qa_pairs_2_overlap_1");
  const auto back = parse_chunked_line(chunked_to_line(chunked));
  REQUIRE(back.chunks.size() == chunked.chunks.size());
  CHECK(back.chunks[0].text == chunked.chunks[0].text);
  CHECK(back.chunks[0].audio_segments == chunked.chunks[0].audio_segments);
}
