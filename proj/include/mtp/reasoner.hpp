#pragma once
// Turning-point reasoning stage: prompt stack assembly (system + describing +
// optional tracking + commanding, with optional few-shot exemplars), model
// query, conclusion extraction, and ordinal-to-timestamp mapping.

#include <optional>
#include <string>
#include <vector>

#include "mtp/gateway.hpp"
#include "mtp/types.hpp"

namespace mtp {

struct FewShotExample {
  std::string rendered_conversation;
  std::string ideal_answer;
};

struct PromptBundle {
  std::string system_content;
  std::string describing_instruction;
  std::string tracking_instruction;
  std::string commanding_instruction;
  std::string conclusion_instruction;
  std::vector<FewShotExample> few_shot;

  static PromptBundle defaults();
  // JSON file overriding any subset of the default texts; may inline
  // "few_shot": [{"conversation", "answer"}].
  static PromptBundle from_file(const std::string& path);
};

// JSON file holding one {"conversation", "answer"} exemplar.
FewShotExample load_few_shot_example(const std::string& path);

struct DetectOptions {
  bool tracking = true;
  bool few_shot = false;
  bool strict = false;  // malformed conclusions become errors instead of warnings
  enum class OverflowPolicy { Strict, TruncateVisuals };
  OverflowPolicy overflow = OverflowPolicy::TruncateVisuals;
  std::size_t max_prompt_chars = 48000;
  std::optional<int> max_predictions;  // cap on returned ordinals
  bool classification_vote = false;    // extra yes/no prompt, metadata only
};

struct DetectionOutput {
  std::string raw_reasoning;
  std::string conclusion_raw;
  std::vector<int> ordinals;
  std::vector<double> timestamps;  // start_s of each ordinal's utterance
  bool has_tp = false;             // equals ordinals non-empty, always
  std::vector<std::string> causes;  // one per ordinal, best-effort, may be ""
  std::vector<std::string> warnings;
  std::string prompt_hash;
  std::optional<bool> classification_vote;
};

// One block per utterance: "utterance_{ordinal}:" then speaker, transcript,
// and a visual line (omitted when empty). Byte-stable.
std::string render_conversation(const Conversation& conv);

// Message order: system; few-shot exemplar pairs; then one user message
// joining describing_instruction, the rendered conversation, the tracking
// instruction when enabled, and the commanding instruction.
std::vector<ChatMessage> build_prompt(const Conversation& conv, const PromptBundle& bundle,
                                      const DetectOptions& options);

// Runs the prompt stack. Prompts over the character budget either error
// (Strict) or drop the longest visual descriptions first (TruncateVisuals).
std::string detect(const Conversation& conv, const ModelHandle& llm,
                   const PromptBundle& bundle, const DetectOptions& options,
                   std::vector<std::string>& warnings, std::string* prompt_hash = nullptr);

// Conclusion pass over the reasoning text plus the rendered conversation.
std::string conclude(const Conversation& conv, const std::string& raw_reasoning,
                     const ModelHandle& llm, const PromptBundle& bundle);

struct ParsedConclusion {
  std::vector<int> ordinals;  // deduplicated, order preserved, all in [1, m]
  std::vector<std::string> warnings;
};

// Extracts utterance_<k> tokens from the first qualifying bracketed list;
// bare "None" means no turning point. Neither present: parse error.
ParsedConclusion parse_conclusion(const std::string& text, int m);

std::vector<double> ordinals_to_timestamps(const Conversation& conv,
                                           const std::vector<int>& ordinals);

DetectionOutput run_pipeline(const Conversation& conv, const ModelHandle& llm,
                             const PromptBundle& bundle, const DetectOptions& options);

}  // namespace mtp
