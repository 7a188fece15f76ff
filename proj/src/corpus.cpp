#include "mmfusion/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "mmfusion/random.hpp"

namespace mmf {

using detail::json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

[[noreturn]] void invalid(const Session& s, const std::string& what) {
  throw ValidationError("session " + std::to_string(s.id) + ": " + what);
}

}  // namespace

std::string_view to_string(Speaker s) {
  return s == Speaker::Interviewer ? "interviewer" : "participant";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "train";
}

Speaker parse_speaker(std::string_view s) {
  const std::string l = lower(s);
  if (l == "interviewer") return Speaker::Interviewer;
  if (l == "participant") return Speaker::Participant;
  throw ValidationError("unknown speaker '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
  const std::string l = lower(s);
  if (l == "train") return Split::Train;
  if (l == "dev") return Split::Dev;
  if (l == "test") return Split::Test;
  throw ValidationError("unknown split '" + std::string(s) + "'");
}

int dep_severity_bin(int phq8) {
  if (phq8 < kPhq8Min || phq8 > kPhq8Max)
    throw ValidationError("PHQ-8 score " + std::to_string(phq8) + " outside [0, 24]");
  return phq8 / 5;  // 0-4, 5-9, 10-14, 15-19, 20-24
}

int ptsd_severity_bin(int pclc) {
  if (pclc < kPclcMin || pclc > kPclcMax)
    throw ValidationError("PCL-C score " + std::to_string(pclc) + " outside [17, 85]");
  if (pclc <= 29) return 0;
  if (pclc <= 44) return 1;
  return 2;
}

int derive_multiclass(bool dep, bool ptsd) {
  return (dep ? 1 : 0) + (ptsd ? 2 : 0);
}

LabelSet derive_labels(int phq8, int pclc) {
  LabelSet l;
  l.dep_severity = dep_severity_bin(phq8);
  l.ptsd_severity = ptsd_severity_bin(pclc);
  l.dep_binary = phq8 >= 10;
  l.ptsd_binary = pclc > 44;
  l.multiclass = derive_multiclass(l.dep_binary, l.ptsd_binary);
  return l;
}

void validate_session(const Session& s) {
  if (s.phq8 < kPhq8Min || s.phq8 > kPhq8Max) invalid(s, "phq8 outside [0, 24]");
  if (s.pclc < kPclcMin || s.pclc > kPclcMax) invalid(s, "pclc outside [17, 85]");
  for (std::size_t i = 0; i < s.utterances.size(); ++i) {
    const auto& u = s.utterances[i];
    const std::string where = "utterance " + std::to_string(i);
    if (!std::isfinite(u.start_s) || !std::isfinite(u.end_s)) invalid(s, where + ": non-finite timestamp");
    if (u.start_s < 0.0) invalid(s, where + ": start_s < 0");
    if (!(u.end_s > u.start_s)) invalid(s, where + ": end_s must exceed start_s");
    if (blank(u.text)) invalid(s, where + ": empty text");
    if (i > 0 && u.start_s < s.utterances[i - 1].start_s) invalid(s, where + ": utterances out of order");
  }
  if (s.frames) {
    const auto& f = *s.frames;
    if (f.timestamps.size() != f.features.rows())
      invalid(s, "frame timestamp count differs from feature rows");
    if (!std::is_sorted(f.timestamps.begin(), f.timestamps.end()))
      invalid(s, "frame timestamps not sorted");
  }
  if (s.planted) {
    const auto n = s.utterances.size();
    if (s.planted->text.rows() != n || s.planted->audio.rows() != n)
      invalid(s, "planted latents do not match utterance count");
  }
}

void normalize_session(Session& s) {
  if (!std::is_sorted(s.utterances.begin(), s.utterances.end(),
                      [](const Utterance& a, const Utterance& b) { return a.start_s < b.start_s; })) {
    if (s.planted) invalid(s, "planted latents require utterances in time order");
    std::stable_sort(s.utterances.begin(), s.utterances.end(),
                     [](const Utterance& a, const Utterance& b) { return a.start_s < b.start_s; });
  }
  validate_session(s);
}

Session parse_session_line(std::string_view line, std::size_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), line_number);
  }
  if (!j.is_object()) throw ParseError("record is not a JSON object", line_number);

  Session s;
  try {
    s.id = detail::require<std::int64_t>(j, "id");
    s.split = parse_split(detail::require<std::string>(j, "split"));
    s.phq8 = detail::require<int>(j, "phq8");
    s.pclc = detail::require<int>(j, "pclc");
    const auto& utts = j.at("utterances");
    if (!utts.is_array()) throw ValidationError("'utterances' must be an array");
    for (const auto& u : utts) {
      Utterance utt;
      utt.speaker = parse_speaker(detail::require<std::string>(u, "speaker"));
      utt.text = detail::require<std::string>(u, "text");
      utt.start_s = detail::require<double>(u, "start_s");
      utt.end_s = detail::require<double>(u, "end_s");
      s.utterances.push_back(std::move(utt));
    }
    if (auto it = j.find("frames"); it != j.end() && !it->is_null()) {
      FrameFeatures f;
      f.timestamps = detail::require<std::vector<double>>(*it, "timestamps");
      f.features = detail::matrix_from_json(it->at("features"), "frames.features");
      s.frames = std::move(f);
    }
    if (auto it = j.find("dep_label"); it != j.end() && !it->is_null()) {
      s.external_dep_label = it->get<bool>();
    }
    if (auto it = j.find("planted"); it != j.end() && !it->is_null()) {
      PlantedLatents p;
      p.text = detail::matrix_from_json(it->at("text"), "planted.text");
      p.audio = detail::matrix_from_json(it->at("audio"), "planted.audio");
      s.planted = std::move(p);
    }
  } catch (const ValidationError& e) {
    throw ParseError(e.what(), line_number);
  } catch (const json::exception& e) {
    throw ParseError(e.what(), line_number);
  }
  normalize_session(s);
  return s;
}

std::string session_to_line(const Session& s) {
  json j;
  j["id"] = s.id;
  j["split"] = to_string(s.split);
  j["phq8"] = s.phq8;
  j["pclc"] = s.pclc;
  json utts = json::array();
  for (const auto& u : s.utterances) {
    utts.push_back({{"speaker", to_string(u.speaker)},
                    {"text", u.text},
                    {"start_s", u.start_s},
                    {"end_s", u.end_s}});
  }
  j["utterances"] = std::move(utts);
  if (s.frames) {
    j["frames"] = {{"timestamps", s.frames->timestamps},
                   {"features", detail::matrix_to_json(s.frames->features)}};
  }
  if (s.external_dep_label) j["dep_label"] = *s.external_dep_label;
  if (s.planted) {
    j["planted"] = {{"text", detail::matrix_to_json(s.planted->text)},
                    {"audio", detail::matrix_to_json(s.planted->audio)}};
  }
  return j.dump();
}

std::vector<Session> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  std::vector<Session> sessions;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (blank(line)) continue;
    sessions.push_back(parse_session_line(line, line_number));
  }
  return sessions;
}

void save_corpus(const std::filesystem::path& path, std::span<const Session> sessions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file " + path.string());
  for (const auto& s : sessions) out << session_to_line(s) << '\n';
}

RepairReport apply_label_repairs(std::span<const Session> sessions,
                                 std::span<const std::int64_t> repair_ids) {
  RepairReport report;
  for (std::int64_t id : repair_ids) {
    auto it = std::find_if(sessions.begin(), sessions.end(),
                           [id](const Session& s) { return s.id == id; });
    if (it == sessions.end()) {
      ++report.skipped;
      continue;
    }
    const bool derived = derive_labels(it->phq8, it->pclc).dep_binary;
    if (it->external_dep_label && *it->external_dep_label != derived) {
      ++report.repaired;
      report.repaired_ids.push_back(id);
    } else {
      ++report.verified;
    }
  }
  return report;
}

void validate_synthetic_spec(const SyntheticSpec& spec) {
  if (spec.n_sessions == 0) throw ValidationError("synthetic: n_sessions must be >= 1");
  if (spec.min_utterances == 0 || spec.min_utterances > spec.max_utterances)
    throw ValidationError("synthetic: need 1 <= min_utterances <= max_utterances");
  if (spec.text_dim == 0 || spec.audio_dim == 0 || spec.video_dim == 0)
    throw ValidationError("synthetic: all embedding dims must be >= 1");
  for (double s : {spec.text_signal, spec.audio_signal, spec.video_signal})
    if (!(s >= 0.0) || !std::isfinite(s)) throw ValidationError("synthetic: signal strength must be >= 0");
  if (!(spec.noise_sigma > 0.0) || !std::isfinite(spec.noise_sigma))
    throw ValidationError("synthetic: noise_sigma must be > 0");
  if (!(spec.frame_interval_s > 0.0)) throw ValidationError("synthetic: frame_interval_s must be > 0");
  double total = 0.0;
  for (double p : spec.class_priors) {
    if (!(p >= 0.0)) throw ValidationError("synthetic: class priors must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ValidationError("synthetic: class priors must sum to 1");
}

Split split_for_id(std::int64_t id) {
  const std::uint64_t h = splitmix64(static_cast<std::uint64_t>(id) ^ 0x5eed5a11ce5ULL);
  const std::uint64_t bucket = h % 10;
  if (bucket < 6) return Split::Train;
  if (bucket < 8) return Split::Dev;
  return Split::Test;
}

namespace {

constexpr std::array<std::string_view, 24> kWords = {
    "well", "i", "think", "really", "work", "family", "sleep", "sometimes", "feel", "okay",
    "friends", "tired", "home", "yeah", "maybe", "time", "good", "hard", "about", "day",
    "things", "people", "know", "lately"};

// Orthonormal pair via Gram-Schmidt; in one dimension both directions coincide.
std::pair<std::vector<double>, std::vector<double>> planted_directions(std::size_t dim, Rng& rng) {
  auto unit = [&](std::vector<double> v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (double& x : v) x /= n;
    return v;
  };
  std::vector<double> a(dim), b(dim);
  for (auto& x : a) x = rng.normal();
  for (auto& x : b) x = rng.normal();
  a = unit(a);
  if (dim == 1) return {a, a};
  double d = 0.0;
  for (std::size_t i = 0; i < dim; ++i) d += a[i] * b[i];
  for (std::size_t i = 0; i < dim; ++i) b[i] -= d * a[i];
  return {a, unit(b)};
}

struct ModalityPlan {
  std::vector<double> u_dep, u_ptsd;
  double signal;
};

std::vector<double> planted_mean(const ModalityPlan& plan, int dep_sev, int ptsd_sev) {
  const double g_dep = dep_sev - 1.5;
  const double g_ptsd = ptsd_sev - 1.5;
  std::vector<double> mu(plan.u_dep.size());
  for (std::size_t i = 0; i < mu.size(); ++i)
    mu[i] = plan.signal * (g_dep * plan.u_dep[i] + g_ptsd * plan.u_ptsd[i]);
  return mu;
}

int pick(Rng& rng, std::initializer_list<int> options) {
  std::vector<int> v(options);
  return v[rng.below(v.size())];
}

}  // namespace

std::vector<Session> generate_synthetic(const SyntheticSpec& spec) {
  validate_synthetic_spec(spec);
  Rng rng(spec.seed);

  auto make_plan = [&](std::size_t dim, double signal) {
    auto [a, b] = planted_directions(dim, rng);
    return ModalityPlan{std::move(a), std::move(b), signal};
  };
  const ModalityPlan text_plan = make_plan(spec.text_dim, spec.text_signal);
  const ModalityPlan audio_plan = make_plan(spec.audio_dim, spec.audio_signal);
  const ModalityPlan video_plan = make_plan(spec.video_dim, spec.video_signal);

  constexpr std::array<int, 5> kPhqMid = {2, 7, 12, 17, 22};
  constexpr std::array<int, 3> kPclMid = {23, 37, 65};

  std::vector<Session> sessions;
  sessions.reserve(spec.n_sessions);
  for (std::size_t i = 0; i < spec.n_sessions; ++i) {
    Session s;
    s.id = static_cast<std::int64_t>(1000 + i);
    s.split = split_for_id(s.id);

    const double u = rng.uniform();
    int latent = 3;
    double acc = 0.0;
    for (int c = 0; c < 4; ++c) {
      acc += spec.class_priors[c];
      if (u < acc) {
        latent = c;
        break;
      }
    }
    const bool dep = latent == 1 || latent == 3;
    const bool ptsd = latent == 2 || latent == 3;
    const int dep_sev = dep ? pick(rng, {2, 3, 4}) : pick(rng, {0, 1});
    const int ptsd_sev = ptsd ? 2 : pick(rng, {0, 1});
    s.phq8 = kPhqMid[dep_sev];
    s.pclc = kPclMid[ptsd_sev];

    const auto mu_text = planted_mean(text_plan, dep_sev, ptsd_sev);
    const auto mu_audio = planted_mean(audio_plan, dep_sev, ptsd_sev);
    const auto mu_video = planted_mean(video_plan, dep_sev, ptsd_sev);

    const std::size_t n_utt =
        spec.min_utterances + rng.below(spec.max_utterances - spec.min_utterances + 1);
    PlantedLatents planted{Matrix(n_utt, spec.text_dim), Matrix(n_utt, spec.audio_dim)};
    double t = rng.uniform(0.0, 2.0);
    Speaker speaker = Speaker::Interviewer;
    for (std::size_t k = 0; k < n_utt; ++k) {
      Utterance utt;
      // Mostly alternating turns with occasional same-speaker runs.
      if (k > 0 && rng.uniform() < 0.8)
        speaker = speaker == Speaker::Interviewer ? Speaker::Participant : Speaker::Interviewer;
      utt.speaker = speaker;
      std::ostringstream text;
      text << '[' << s.id << ':' << k << ']';
      const std::size_t n_words = 3 + rng.below(8);
      for (std::size_t w = 0; w < n_words; ++w) text << ' ' << kWords[rng.below(kWords.size())];
      utt.text = text.str();
      utt.start_s = t;
      utt.end_s = t + rng.uniform(1.0, 6.0);
      t = utt.end_s + rng.uniform(0.2, 1.5);
      s.utterances.push_back(std::move(utt));

      for (std::size_t d = 0; d < spec.text_dim; ++d)
        planted.text(k, d) = mu_text[d] + spec.noise_sigma * rng.normal();
      for (std::size_t d = 0; d < spec.audio_dim; ++d)
        planted.audio(k, d) = mu_audio[d] + spec.noise_sigma * rng.normal();
    }
    s.planted = std::move(planted);

    FrameFeatures frames;
    frames.features = Matrix(0, spec.video_dim);
    std::vector<double> row(spec.video_dim);
    for (std::size_t f = 0; static_cast<double>(f) * spec.frame_interval_s <= t; ++f) {
      frames.timestamps.push_back(static_cast<double>(f) * spec.frame_interval_s);
      for (std::size_t d = 0; d < spec.video_dim; ++d) row[d] = mu_video[d] + spec.noise_sigma * rng.normal();
      frames.features.append_row(row);
    }
    s.frames = std::move(frames);

    sessions.push_back(std::move(s));
  }
  return sessions;
}

}  // namespace mmf
