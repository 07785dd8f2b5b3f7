#pragma once
// Visual narrative stage: one vision-model description per sampled frame,
// compressed by a summarizer model to a bounded word count.

#include <string>
#include <vector>

#include "mtp/gateway.hpp"
#include "mtp/types.hpp"

namespace mtp {

// The frame prompt sent to the vision model, byte for byte.
extern const char* const kFramePrompt;

struct SummaryResult {
  std::string text;
  bool truncated = false;  // model exceeded the word limit; output was cut
};

struct DescribeOptions {
  int word_limit = 60;
  double failure_ceiling = 0.5;  // abort when more than this fraction fails
};

struct DescribeWarnings {
  std::vector<std::string> messages;
  void add(std::string msg) { messages.push_back(std::move(msg)); }
};

// Reads the frame image, attaches it as a data URL, and asks the vision
// model for the scripted frame prompt. Cached via the gateway.
std::string describe_frame(const std::string& frame_ref, const ModelHandle& vlm);

// Bounded summary of a raw description; truncates at the word boundary and
// flags when the model overruns the limit.
SummaryResult summarize_description(const std::string& raw, const ModelHandle& llm,
                                    int word_limit);

// Fills visual_description for every utterance. Per-utterance failures
// degrade to "" with a warning; more than failure_ceiling failing aborts.
void describe_conversation(Conversation& conv, const DescribeOptions& options,
                           const ModelHandle& vlm, const ModelHandle& llm,
                           DescribeWarnings& warnings);

}  // namespace mtp
