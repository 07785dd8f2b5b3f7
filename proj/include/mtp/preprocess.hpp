#pragma once
// Raw-input stages: ASR alignment ingest, speaker attribution via embedding
// search plus chat confirmation, scene clip manifests, and per-utterance
// frame-time sampling.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtp/gateway.hpp"
#include "mtp/types.hpp"

namespace mtp {

struct AsrSegment {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string text;
};

struct ScriptLine {
  std::string speaker;
  std::string line;
};

struct SceneBoundary {
  int season = 0;
  int episode = 0;
  std::string scene_tag;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct FramePolicy {
  enum class Mode { RandomInUtterance, Midpoint };
  Mode mode = Mode::RandomInUtterance;
  std::uint64_t seed = 0;  // only RandomInUtterance uses it
};

struct ClipJob {
  std::string input_path;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string output_path;
};

// Parses a WhisperX-shaped document: {"segments": [{"start","end","text"}]}.
// Segments are sorted by start before ordinals 1..m are assigned; speakers
// start as "UNKNOWN".
std::vector<Utterance> ingest_asr_alignment(const std::string& document_text);

struct AttributionRow {
  int ordinal = 0;
  std::string candidate_speaker;  // top-1 script line's speaker
  double similarity = 0.0;
  std::string decision;  // assigned | below_threshold | unconfirmed
};

struct AttributionReport {
  std::vector<AttributionRow> rows;
};

// Sets each utterance's speaker to a script speaker (verbatim casing) or
// "UNKNOWN". Top-1 script line by cosine similarity; at or above the
// threshold the chat model confirms or reassigns, answers matched
// case-insensitively against the script's speaker set.
AttributionReport attribute_speakers(std::vector<Utterance>& utterances,
                                     std::span<const ScriptLine> script,
                                     const ModelHandle& embedder, const ModelHandle& chat,
                                     double sim_threshold);

// One job per boundary; output file names derived from
// (season, episode, scene_tag). Boundaries within one episode must not
// overlap. Execution is external; these are descriptions only.
std::vector<ClipJob> clip_manifest(const std::string& media_path,
                                   std::span<const SceneBoundary> boundaries,
                                   const std::string& output_dir);

// Midpoint, or uniform in [start_s, end_s] seeded by
// (policy.seed, conversation_id, ordinal) so results are order-independent.
double sample_frame_time(const Utterance& utterance, const FramePolicy& policy,
                         const std::string& conversation_id);

}  // namespace mtp
