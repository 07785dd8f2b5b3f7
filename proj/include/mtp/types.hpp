#pragma once
// Canonical data model for conversations and turning-point annotations.
// All timestamps are seconds from conversation start.

#include <optional>
#include <string>
#include <vector>

#include "mtp/emotion.hpp"

namespace mtp {

struct Utterance {
  int ordinal = 0;              // 1-based position in the conversation
  std::string transcript;
  std::string speaker = "UNKNOWN";
  double start_s = 0.0;
  double end_s = 0.0;
  std::optional<std::string> visual_description;
  std::optional<std::string> frame_ref;  // path to the sampled frame, if any
};

struct Conversation {
  std::string id;
  std::string scene_tag;
  int season = 0;
  int episode = 0;
  double duration_s = 0.0;
  std::vector<Utterance> utterances;
};

// A feeling observation with the timestamp of its supporting evidence.
struct FeelingObservation {
  EmotionLabel label = EmotionLabel::Neutral;
  double ts = 0.0;
};

// A decision/behavior/perspective description with its evidence timestamp.
struct EvidencedState {
  std::string description;
  double evidence_ts = 0.0;
};

enum class TpType {
  EmotionalOutburst,
  DecisionChange,
  ExternalInfluence,
  PerspectiveShift,
  UncomfortableSituation,
};

std::string_view tp_type_name(TpType type);
std::optional<TpType> parse_tp_type(std::string_view text);

struct TurningPoint {
  double location_s = 0.0;
  std::string cause;
  std::vector<FeelingObservation> pre_feelings;
  std::vector<FeelingObservation> post_feelings;
  std::vector<EvidencedState> pre_dbp;
  std::vector<EvidencedState> post_dbp;
  std::optional<std::string> explanation;
  std::optional<TpType> type_tag;
};

struct AnnotationRecord {
  std::string annotator_id;
  std::string conversation_id;
  std::vector<TurningPoint> turning_points;
  std::optional<std::string> no_tp_explanation;  // required when turning_points is empty
};

struct ConsensusAnnotation {
  std::vector<TurningPoint> turning_points;
};

// One dataset line: a conversation plus its recorded annotations and, once
// merged, the consensus.
struct ConversationRecord {
  Conversation conversation;
  std::vector<AnnotationRecord> annotations;
  std::optional<ConsensusAnnotation> consensus;
};

// A pipeline or submission output for one conversation.
struct PredictionRecord {
  std::string conversation_id;
  bool has_tp = false;
  std::vector<double> timestamps;
  std::optional<double> score;  // classifier confidence in [0,1]

  double effective_score() const { return score ? *score : (has_tp ? 1.0 : 0.0); }
};

}  // namespace mtp
