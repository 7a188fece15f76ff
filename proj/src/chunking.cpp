#include "mmfusion/chunking.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <limits>

#include "json_util.hpp"

namespace mmf {

using detail::json;

std::vector<Window> window_indices(std::size_t n_items, std::size_t window, std::size_t overlap) {
  if (n_items == 0) throw ParameterError("window_indices: n_items must be >= 1");
  if (window == 0) throw ParameterError("window_indices: window must be >= 1");
  if (overlap >= window) throw ParameterError("window_indices: overlap must be < window");
  const std::size_t step = window - overlap;
  std::vector<Window> out;
  for (std::size_t start = 0; start < n_items; start += step) {
    const std::size_t end = std::min(start + window, n_items);
    out.push_back({start, end});
    if (end == n_items) break;
  }
  return out;
}

namespace {

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string speaker_tag(Speaker s) {
  return s == Speaker::Interviewer ? "Interviewer" : "Participant";
}

std::string render_qa(const QAPair& p, std::size_t number) {
  return "Question " + std::to_string(number) + ": " + p.question + "\nAnswer " +
         std::to_string(number) + ": " + p.answer;
}

std::vector<TimeSpan> utterance_segments(const Session& s, const std::vector<std::size_t>& idx) {
  std::vector<TimeSpan> out;
  for (std::size_t i : idx) out.push_back({s.utterances[i].start_s, s.utterances[i].end_s});
  return out;
}

}  // namespace

std::vector<QAPair> extract_qa_pairs(const Session& session) {
  std::vector<QAPair> pairs;
  const auto& utts = session.utterances;
  std::size_t i = 0;
  while (i < utts.size() && utts[i].speaker != Speaker::Interviewer) ++i;
  while (i < utts.size()) {
    QAPair p;
    std::vector<std::string> q, a;
    while (i < utts.size() && utts[i].speaker == Speaker::Interviewer) {
      q.push_back(utts[i].text);
      p.question_indices.push_back(i++);
    }
    while (i < utts.size() && utts[i].speaker == Speaker::Participant) {
      if (utts[i].text.find_first_not_of(" \t\r\n") != std::string::npos) {
        a.push_back(utts[i].text);
        p.answer_indices.push_back(i);
      }
      ++i;
    }
    if (a.empty()) continue;
    p.question = join(q, " ");
    p.answer = join(a, " ");
    p.span = {utts[p.question_indices.front()].start_s, utts[p.answer_indices.back()].end_s};
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::string format_whole_interview(const Session& session, bool qa_mode) {
  std::vector<std::string> parts;
  if (qa_mode) {
    const auto pairs = extract_qa_pairs(session);
    for (std::size_t k = 0; k < pairs.size(); ++k) parts.push_back(render_qa(pairs[k], k + 1));
    return join(parts, "\n\n");
  }
  for (const auto& u : session.utterances) parts.push_back(speaker_tag(u.speaker) + ": " + u.text);
  return join(parts, "\n");
}

ChunkedSession chunk_text(const Session& session, ChunkUnit unit, std::size_t window,
                          std::size_t overlap) {
  ChunkedSession out;
  out.session_id = session.id;
  if (unit == ChunkUnit::Utterance) {
    out.format_name = FormatSpec{FormatKind::Utterances, window, overlap}.name();
    const auto& utts = session.utterances;
    if (utts.empty()) return out;
    for (const Window& w : window_indices(utts.size(), window, overlap)) {
      Chunk c;
      std::vector<std::string> lines;
      for (std::size_t i = w.start_idx; i < w.end_idx; ++i) {
        lines.push_back(speaker_tag(utts[i].speaker) + ": " + utts[i].text);
        c.item_indices.push_back(i);
        c.utterance_indices.push_back(i);
      }
      c.text = join(lines, "\n");
      c.time_span = {utts[w.start_idx].start_s, utts[w.end_idx - 1].end_s};
      c.audio_segments = {c.time_span};
      out.chunks.push_back(std::move(c));
    }
    return out;
  }

  out.format_name = FormatSpec{FormatKind::QAPairs, window, overlap}.name();
  const auto pairs = extract_qa_pairs(session);
  if (pairs.empty()) return out;
  for (const Window& w : window_indices(pairs.size(), window, overlap)) {
    Chunk c;
    std::vector<std::string> blocks;
    for (std::size_t i = w.start_idx; i < w.end_idx; ++i) {
      blocks.push_back(render_qa(pairs[i], i + 1));
      c.item_indices.push_back(i);
      c.utterance_indices.insert(c.utterance_indices.end(), pairs[i].question_indices.begin(),
                                 pairs[i].question_indices.end());
      c.utterance_indices.insert(c.utterance_indices.end(), pairs[i].answer_indices.begin(),
                                 pairs[i].answer_indices.end());
    }
    std::sort(c.utterance_indices.begin(), c.utterance_indices.end());
    c.text = join(blocks, "\n\n");
    c.time_span = {pairs[w.start_idx].span.start_s, pairs[w.end_idx - 1].span.end_s};
    c.audio_segments = {c.time_span};
    out.chunks.push_back(std::move(c));
  }
  return out;
}

std::vector<TimeSpan> audio_spans_for_chunks(const ChunkedSession& chunked) {
  std::vector<TimeSpan> spans;
  spans.reserve(chunked.chunks.size());
  for (const auto& c : chunked.chunks) spans.push_back(c.time_span);
  return spans;
}

std::string audio_content_key(std::int64_t session_id, std::span<const TimeSpan> segments) {
  std::string key = "audio:" + std::to_string(session_id) + ":";
  char buf[64];
  for (std::size_t i = 0; i < segments.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.3f-%.3f", i ? "+" : "", segments[i].start_s, segments[i].end_s);
    key += buf;
  }
  return key;
}

PooledVideo pool_video_per_utterance(const FrameFeatures& frames, std::span<const Utterance> utterances) {
  const auto& ts = frames.timestamps;
  if (ts.size() != frames.features.rows())
    throw ValidationError("pool_video_per_utterance: frame timestamp count differs from feature rows");
  if (!std::is_sorted(ts.begin(), ts.end()))
    throw ValidationError("pool_video_per_utterance: frame timestamps not sorted");
  const std::size_t width = frames.features.cols();
  PooledVideo out{Matrix(utterances.size(), width), std::vector<bool>(utterances.size(), false)};
  for (std::size_t u = 0; u < utterances.size(); ++u) {
    auto first = std::lower_bound(ts.begin(), ts.end(), utterances[u].start_s);
    auto last = std::upper_bound(ts.begin(), ts.end(), utterances[u].end_s);
    if (first >= last) continue;
    auto row = out.rows.row(u);
    std::fill(row.begin(), row.end(), -std::numeric_limits<double>::infinity());
    for (auto it = first; it != last; ++it) {
      auto frame = frames.features.row(static_cast<std::size_t>(it - ts.begin()));
      for (std::size_t d = 0; d < width; ++d) row[d] = std::max(row[d], frame[d]);
    }
    out.present[u] = true;
  }
  return out;
}

std::vector<Matrix> align_video_chunks(const Matrix& per_utterance, std::span<const Window> windows) {
  std::vector<Matrix> out;
  out.reserve(windows.size());
  for (const Window& w : windows) {
    if (w.start_idx >= w.end_idx || w.end_idx > per_utterance.rows())
      throw ParameterError("align_video_chunks: window [" + std::to_string(w.start_idx) + ", " +
                           std::to_string(w.end_idx) + ") outside " +
                           std::to_string(per_utterance.rows()) + " rows");
    Matrix m(0, per_utterance.cols());
    for (std::size_t r = w.start_idx; r < w.end_idx; ++r) m.append_row(per_utterance.row(r));
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<double> sum_answer_vectors(std::span<const std::vector<double>> vectors) {
  if (vectors.empty()) throw ParameterError("sum_answer_vectors: empty list");
  std::vector<double> sum(vectors.front().size(), 0.0);
  for (const auto& v : vectors) {
    if (v.size() != sum.size()) throw ParameterError("sum_answer_vectors: dimension mismatch");
    for (std::size_t d = 0; d < v.size(); ++d) sum[d] += v[d];
  }
  return sum;
}

std::string FormatSpec::name() const {
  auto windowed = [this](std::string base) {
    base += "_" + std::to_string(window);
    if (overlap) base += "_overlap_" + std::to_string(overlap);
    return base;
  };
  switch (kind) {
    case FormatKind::FullInterview: return "full_interview";
    case FormatKind::QAWhole: return "qa";
    case FormatKind::QAPairs: return windowed("qa_pairs");
    case FormatKind::Utterances: return windowed("utterances");
    case FormatKind::AnswersChunks: return "answers_chunks";
    case FormatKind::AnswersConcatenated: return "answers_concatenated";
    case FormatKind::AnswersSummed: return "answers_summed";
  }
  return "unknown";
}

namespace {

std::size_t parse_count(std::string_view s, std::string_view whole) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ParameterError("malformed format name '" + std::string(whole) + "'");
  return v;
}

}  // namespace

FormatSpec parse_format(std::string_view name) {
  if (name == "full_interview") return {FormatKind::FullInterview, 0, 0};
  if (name == "qa") return {FormatKind::QAWhole, 0, 0};
  if (name == "answers_chunks") return {FormatKind::AnswersChunks, 0, 0};
  if (name == "answers_concatenated") return {FormatKind::AnswersConcatenated, 0, 0};
  if (name == "answers_summed") return {FormatKind::AnswersSummed, 0, 0};
  for (auto [prefix, kind] : {std::pair{std::string_view("qa_pairs_"), FormatKind::QAPairs},
                              std::pair{std::string_view("utterances_"), FormatKind::Utterances}}) {
    if (!name.starts_with(prefix)) continue;
    std::string_view rest = name.substr(prefix.size());
    FormatSpec f{kind, 0, 0};
    const auto pos = rest.find("_overlap_");
    if (pos == std::string_view::npos) {
      f.window = parse_count(rest, name);
    } else {
      f.window = parse_count(rest.substr(0, pos), name);
      f.overlap = parse_count(rest.substr(pos + 9), name);
    }
    if (f.window == 0 || f.overlap >= f.window)
      throw ParameterError("format '" + std::string(name) + "' needs window >= 1 and overlap < window");
    return f;
  }
  throw ParameterError("unknown format '" + std::string(name) + "'");
}

ChunkedSession format_session(const Session& session, const FormatSpec& format) {
  switch (format.kind) {
    case FormatKind::Utterances:
      return chunk_text(session, ChunkUnit::Utterance, format.window, format.overlap);
    case FormatKind::QAPairs:
      return chunk_text(session, ChunkUnit::QAPair, format.window, format.overlap);
    default:
      break;
  }

  ChunkedSession out;
  out.session_id = session.id;
  out.format_name = format.name();
  const auto& utts = session.utterances;

  if (format.kind == FormatKind::FullInterview || format.kind == FormatKind::QAWhole) {
    Chunk c;
    c.text = format_whole_interview(session, format.kind == FormatKind::QAWhole);
    if (format.kind == FormatKind::QAWhole) {
      for (const auto& p : extract_qa_pairs(session)) {
        c.utterance_indices.insert(c.utterance_indices.end(), p.question_indices.begin(), p.question_indices.end());
        c.utterance_indices.insert(c.utterance_indices.end(), p.answer_indices.begin(), p.answer_indices.end());
      }
      std::sort(c.utterance_indices.begin(), c.utterance_indices.end());
    } else {
      for (std::size_t i = 0; i < utts.size(); ++i) c.utterance_indices.push_back(i);
    }
    if (c.text.empty() || c.utterance_indices.empty()) return out;
    c.item_indices = {0};
    c.time_span = {utts[c.utterance_indices.front()].start_s, utts[c.utterance_indices.back()].end_s};
    c.audio_segments = {c.time_span};
    out.chunks.push_back(std::move(c));
    return out;
  }

  // Participant-only formats built from the answer blocks.
  const auto pairs = extract_qa_pairs(session);
  if (pairs.empty()) return out;
  if (format.kind == FormatKind::AnswersConcatenated) {
    Chunk c;
    std::vector<std::string> answers;
    for (const auto& p : pairs) {
      answers.push_back(p.answer);
      c.utterance_indices.insert(c.utterance_indices.end(), p.answer_indices.begin(), p.answer_indices.end());
    }
    c.text = join(answers, " ");
    c.item_indices = {0};
    c.time_span = {utts[c.utterance_indices.front()].start_s, utts[c.utterance_indices.back()].end_s};
    c.audio_segments = utterance_segments(session, c.utterance_indices);
    out.chunks.push_back(std::move(c));
    return out;
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    Chunk c;
    c.text = pairs[k].answer;
    c.item_indices = {k};
    c.utterance_indices = pairs[k].answer_indices;
    c.time_span = {utts[c.utterance_indices.front()].start_s, utts[c.utterance_indices.back()].end_s};
    c.audio_segments = utterance_segments(session, c.utterance_indices);
    out.chunks.push_back(std::move(c));
  }
  return out;
}

Matrix video_chunk_vectors(const PooledVideo& pooled, const ChunkedSession& chunked) {
  const std::size_t width = pooled.rows.cols();
  Matrix out(chunked.chunks.size(), width);
  for (std::size_t k = 0; k < chunked.chunks.size(); ++k) {
    auto row = out.row(k);
    bool any = false;
    for (std::size_t u : chunked.chunks[k].utterance_indices) {
      if (u >= pooled.rows.rows()) throw ParameterError("video_chunk_vectors: utterance index out of range");
      if (!pooled.present[u]) continue;
      auto src = pooled.rows.row(u);
      for (std::size_t d = 0; d < width; ++d) row[d] = any ? std::max(row[d], src[d]) : src[d];
      any = true;
    }
  }
  return out;
}

std::string chunked_to_line(const ChunkedSession& chunked) {
  json chunks = json::array();
  for (const auto& c : chunked.chunks) {
    json segs = json::array();
    for (const auto& s : c.audio_segments) segs.push_back({s.start_s, s.end_s});
    chunks.push_back({{"text", c.text},
                      {"time_span", {c.time_span.start_s, c.time_span.end_s}},
                      {"item_indices", c.item_indices},
                      {"utterance_indices", c.utterance_indices},
                      {"audio_segments", segs}});
  }
  json j{{"session_id", chunked.session_id}, {"format_name", chunked.format_name}, {"chunks", chunks}};
  return j.dump();
}

ChunkedSession parse_chunked_line(std::string_view line, std::size_t line_number) {
  try {
    const json j = json::parse(line);
    ChunkedSession out;
    out.session_id = j.at("session_id").get<std::int64_t>();
    out.format_name = j.at("format_name").get<std::string>();
    for (const auto& cj : j.at("chunks")) {
      Chunk c;
      c.text = cj.at("text").get<std::string>();
      const auto span = cj.at("time_span").get<std::vector<double>>();
      if (span.size() != 2) throw ParseError("time_span needs two values", line_number);
      c.time_span = {span[0], span[1]};
      c.item_indices = cj.at("item_indices").get<std::vector<std::size_t>>();
      c.utterance_indices = cj.at("utterance_indices").get<std::vector<std::size_t>>();
      for (const auto& s : cj.value("audio_segments", json::array())) {
        const auto v = s.get<std::vector<double>>();
        if (v.size() != 2) throw ParseError("audio segment needs two values", line_number);
        c.audio_segments.push_back({v[0], v[1]});
      }
      out.chunks.push_back(std::move(c));
    }
    return out;
  } catch (const json::exception& e) {
    throw ParseError(e.what(), line_number);
  }
}

}  // namespace mmf
