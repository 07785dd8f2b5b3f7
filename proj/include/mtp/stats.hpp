#pragma once
// Dataset statistics and emotion histograms over consensus annotations.

#include <cstdint>
#include <map>
#include <span>

#include "mtp/types.hpp"

namespace mtp {

struct DatasetStats {
  std::int64_t n_conversations = 0;
  std::int64_t n_tp_conversations = 0;  // consensus has at least one TP
  std::int64_t n_utterances = 0;
  std::int64_t n_words = 0;  // whitespace tokens over all transcripts
  double total_duration_h = 0.0;
  double avg_transcript_len = 0.0;  // words per conversation
  double max_transcript_len = 0.0;
  double avg_conversation_len_s = 0.0;
  double max_conversation_len_s = 0.0;
};

DatasetStats dataset_stats(std::span<const ConversationRecord> dataset);

// Field-wise combination: counts add, maxima take the max, averages are
// recomputed from the combined counts.
DatasetStats merge_stats(const DatasetStats& a, const DatasetStats& b);

std::int64_t count_words(const std::string& text);

struct EmotionHistogram {
  std::map<EmotionLabel, std::int64_t> pre;
  std::map<EmotionLabel, std::int64_t> post;
};

// Counts label occurrences over all consensus TPs' pre/post feelings.
EmotionHistogram emotion_histogram(std::span<const ConversationRecord> dataset);

}  // namespace mtp
