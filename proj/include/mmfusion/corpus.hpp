#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmfusion/matrix.hpp"

namespace mmf {

enum class Speaker { Interviewer, Participant };
enum class Split { Train, Dev, Test };

std::string_view to_string(Speaker s);
std::string_view to_string(Split s);
Speaker parse_speaker(std::string_view s);
Split parse_split(std::string_view s);

struct Utterance {
  Speaker speaker = Speaker::Participant;
  std::string text;
  double start_s = 0.0;
  double end_s = 0.0;

  bool operator==(const Utterance&) const = default;
};

// Per-frame video features with their timestamps (seconds), one row per frame.
struct FrameFeatures {
  std::vector<double> timestamps;
  Matrix features;

  bool operator==(const FrameFeatures&) const = default;
};

// Per-utterance latent vectors planted by the synthetic generator (n_utterances x dim).
// Real corpora never carry these; they stand in for a pretrained encoder's output.
struct PlantedLatents {
  Matrix text;
  Matrix audio;

  bool operator==(const PlantedLatents&) const = default;
};

struct Session {
  std::int64_t id = 0;
  std::vector<Utterance> utterances;
  std::optional<FrameFeatures> frames;
  int phq8 = 0;
  int pclc = 17;
  Split split = Split::Train;
  // Binary depression label as shipped by an external source, kept only for auditing.
  std::optional<bool> external_dep_label;
  std::optional<PlantedLatents> planted;

  bool operator==(const Session&) const = default;
};

inline constexpr int kPhq8Min = 0;
inline constexpr int kPhq8Max = 24;
inline constexpr int kPclcMin = 17;
inline constexpr int kPclcMax = 85;
inline constexpr int kDepSeverityLevels = 5;
inline constexpr int kPtsdSeverityLevels = 3;
inline constexpr int kMulticlassCount = 4;

struct LabelSet {
  bool dep_binary = false;
  bool ptsd_binary = false;
  int dep_severity = 0;   // 0 minimal .. 4 severe
  int ptsd_severity = 0;  // 0 little/none, 1 moderate, 2 high
  int multiclass = 0;     // 0 neither, 1 depression only, 2 PTSD only, 3 both

  bool operator==(const LabelSet&) const = default;
};

// PHQ-8 >= 10 is depression-positive; PCL-C > 44 is PTSD-positive.
LabelSet derive_labels(int phq8, int pclc);
int derive_multiclass(bool dep, bool ptsd);
int dep_severity_bin(int phq8);
int ptsd_severity_bin(int pclc);

// Throws ValidationError naming the session id.
void validate_session(const Session& s);

// Sorts utterances by start time (stable), then validates.
void normalize_session(Session& s);

Session parse_session_line(std::string_view line, std::size_t line_number = 1);
std::string session_to_line(const Session& s);

std::vector<Session> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, std::span<const Session> sessions);

// Session ids whose shipped depression label disagreed with PHQ-8 >= 10.
inline constexpr std::array<std::int64_t, 20> kMislabeledDepressionIds = {
    320, 325, 335, 344, 352, 356, 380, 386, 409, 413,
    418, 422, 433, 459, 483, 633, 682, 691, 696, 709};

struct RepairReport {
  std::size_t repaired = 0;  // listed, present, external label disagrees with the score
  std::size_t verified = 0;  // listed, present, no disagreement (or no external label)
  std::size_t skipped = 0;   // listed but absent from the corpus
  std::vector<std::int64_t> repaired_ids;
};

// Audit only: labels are always derived from scores, so nothing is mutated.
RepairReport apply_label_repairs(std::span<const Session> sessions,
                                 std::span<const std::int64_t> repair_ids);

struct SyntheticSpec {
  std::size_t n_sessions = 200;
  std::size_t min_utterances = 24;
  std::size_t max_utterances = 40;
  std::size_t text_dim = 16;
  std::size_t audio_dim = 16;
  std::size_t video_dim = 8;
  double text_signal = 1.0;
  double audio_signal = 1.0;
  double video_signal = 1.0;
  double noise_sigma = 1.0;
  std::array<double, 4> class_priors = {0.25, 0.25, 0.25, 0.25};
  double frame_interval_s = 0.5;
  std::uint64_t seed = 0;
};

void validate_synthetic_spec(const SyntheticSpec& spec);

// Deterministic 60/20/20 Train/Dev/Test assignment from a hash of the id.
Split split_for_id(std::int64_t id);

// Each session draws a latent multiclass label, then a severity bin consistent with it;
// PHQ-8/PCL-C are back-filled with the bin midpoints. Every utterance's latent vector is
// signal * (g_dep * u_dep + g_ptsd * u_ptsd) + noise, with g = severity - 1.5 and u_*
// fixed orthonormal directions per modality. Video frames carry the same construction.
std::vector<Session> generate_synthetic(const SyntheticSpec& spec);

}  // namespace mmf
