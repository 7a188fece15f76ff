#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mmfusion/corpus.hpp"
#include "mmfusion/matrix.hpp"

namespace mmf {

// Half-open index range [start_idx, end_idx) over a sequence of items.
struct Window {
  std::size_t start_idx = 0;
  std::size_t end_idx = 0;

  std::size_t size() const noexcept { return end_idx - start_idx; }
  bool operator==(const Window&) const = default;
};

// Windows start at 0, step, 2*step, ... with step = window - overlap, ends clamped to
// n_items. Emission stops once a window reaches the end, so a trailing partial window
// exists only when it covers indices no earlier window did.
std::vector<Window> window_indices(std::size_t n_items, std::size_t window, std::size_t overlap);

struct TimeSpan {
  double start_s = 0.0;
  double end_s = 0.0;

  bool operator==(const TimeSpan&) const = default;
};

struct QAPair {
  std::string question;
  std::string answer;
  TimeSpan span;
  std::vector<std::size_t> question_indices;  // utterance indices
  std::vector<std::size_t> answer_indices;
};

// Consecutive interviewer turns merge into one question; the participant turns up to the
// next interviewer turn merge into its answer. Blank participant turns are ignored;
// unanswered questions and participant turns before the first question are dropped.
std::vector<QAPair> extract_qa_pairs(const Session& session);

// Plain mode: "Interviewer: ..." / "Participant: ..." lines in time order.
// QA mode: "Question k: ...\nAnswer k: ..." blocks separated by a blank line.
std::string format_whole_interview(const Session& session, bool qa_mode);

enum class ChunkUnit { Utterance, QAPair };

struct Chunk {
  std::string text;
  TimeSpan time_span;
  std::vector<std::size_t> item_indices;       // indices into the unit sequence
  std::vector<std::size_t> utterance_indices;  // underlying utterances, ascending
  std::vector<TimeSpan> audio_segments;        // audio pieces making up this chunk
};

struct ChunkedSession {
  std::int64_t session_id = 0;
  std::string format_name;
  std::vector<Chunk> chunks;
};

ChunkedSession chunk_text(const Session& session, ChunkUnit unit, std::size_t window,
                          std::size_t overlap);

std::vector<TimeSpan> audio_spans_for_chunks(const ChunkedSession& chunked);

// Stable content key for a chunk's audio, used by embedding providers and stores.
std::string audio_content_key(std::int64_t session_id, std::span<const TimeSpan> segments);

struct PooledVideo {
  Matrix rows;                // n_utterances x n_features
  std::vector<bool> present;  // false where no frame fell inside the utterance
};

// Row u is the elementwise max over frames with timestamp in [start_s, end_s].
PooledVideo pool_video_per_utterance(const FrameFeatures& frames, std::span<const Utterance> utterances);

std::vector<Matrix> align_video_chunks(const Matrix& per_utterance, std::span<const Window> windows);

std::vector<double> sum_answer_vectors(std::span<const std::vector<double>> vectors);

// Named data formats. Names round-trip through parse_format/name:
//   full_interview, qa, qa_pairs_<w>[_overlap_<o>], utterances_<w>[_overlap_<o>],
//   answers_chunks, answers_concatenated, answers_summed
enum class FormatKind {
  FullInterview,
  QAWhole,
  QAPairs,
  Utterances,
  AnswersChunks,
  AnswersConcatenated,
  AnswersSummed,
};

struct FormatSpec {
  FormatKind kind = FormatKind::Utterances;
  std::size_t window = 10;
  std::size_t overlap = 4;

  std::string name() const;
  // Answers Summed collapses its per-answer vectors into one row after embedding.
  bool sums_chunks() const noexcept { return kind == FormatKind::AnswersSummed; }

  bool operator==(const FormatSpec&) const = default;
};

FormatSpec parse_format(std::string_view name);

ChunkedSession format_session(const Session& session, const FormatSpec& format);

// One vector per chunk: elementwise max over the chunk's present pooled rows
// (zero row when none are present).
Matrix video_chunk_vectors(const PooledVideo& pooled, const ChunkedSession& chunked);

std::string chunked_to_line(const ChunkedSession& chunked);
ChunkedSession parse_chunked_line(std::string_view line, std::size_t line_number = 1);

}  // namespace mmf
