#pragma once
// Invariant checks over conversations and annotation records. Violations are
// data, not errors: callers decide whether a non-empty report is fatal.

#include <string>
#include <vector>

#include "mtp/types.hpp"

namespace mtp {

struct Violation {
  std::string path;  // e.g. "utterances[2].start_s"
  std::string rule;  // stable rule id, e.g. "start_after_end"
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  void add(std::string path, std::string rule, std::string detail = "");
  void merge(const ValidationReport& other);
};

// Utterance/Conversation invariants: ordinal contiguity, start <= end,
// non-empty transcripts, ordered starts, ends within duration (+1 s slack).
ValidationReport validate_conversation(const Conversation& conv);

// Conversation invariants plus annotation/consensus invariants: non-empty
// causes, locations and evidence within duration, no-TP explanations present.
ValidationReport validate_record(const ConversationRecord& record);

}  // namespace mtp
