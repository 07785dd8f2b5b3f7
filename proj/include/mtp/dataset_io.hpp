#pragma once
// Line-delimited dataset and submission files. One JSON document per line,
// field names exactly as the data model. Unknown fields are rejected in
// strict mode and collected as warnings otherwise. Timestamp fields accept
// numeric seconds or clock strings; output is always numeric seconds.

#include <span>
#include <string>
#include <vector>

#include "mtp/types.hpp"

namespace mtp {

struct IoOptions {
  bool strict = false;
};

struct IoWarnings {
  std::vector<std::string> messages;

  void add(std::string msg) { messages.push_back(std::move(msg)); }
};

ConversationRecord record_from_json(const std::string& text, const IoOptions& options,
                                    IoWarnings& warnings);
std::string record_to_json(const ConversationRecord& record);

std::vector<ConversationRecord> read_dataset(const std::string& path,
                                             const IoOptions& options,
                                             IoWarnings& warnings);
void write_dataset(const std::string& path, std::span<const ConversationRecord> records);

std::vector<PredictionRecord> read_submission(const std::string& path,
                                              const IoOptions& options,
                                              IoWarnings& warnings);
void write_submission(const std::string& path, std::span<const PredictionRecord> preds);

}  // namespace mtp
