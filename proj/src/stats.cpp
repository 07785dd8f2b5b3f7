#include "mtp/stats.hpp"

#include <algorithm>
#include <cctype>

namespace mtp {

std::int64_t count_words(const std::string& text) {
  std::int64_t n = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++n;
    }
  }
  return n;
}

DatasetStats dataset_stats(std::span<const ConversationRecord> dataset) {
  DatasetStats s;
  for (const ConversationRecord& record : dataset) {
    const Conversation& conv = record.conversation;
    ++s.n_conversations;
    if (record.consensus && !record.consensus->turning_points.empty())
      ++s.n_tp_conversations;
    std::int64_t words = 0;
    for (const Utterance& u : conv.utterances) {
      ++s.n_utterances;
      words += count_words(u.transcript);
    }
    s.n_words += words;
    s.total_duration_h += conv.duration_s / 3600.0;
    s.max_transcript_len = std::max(s.max_transcript_len, static_cast<double>(words));
    s.max_conversation_len_s = std::max(s.max_conversation_len_s, conv.duration_s);
  }
  if (s.n_conversations > 0) {
    s.avg_transcript_len = static_cast<double>(s.n_words) / s.n_conversations;
    s.avg_conversation_len_s = s.total_duration_h * 3600.0 / s.n_conversations;
  }
  return s;
}

DatasetStats merge_stats(const DatasetStats& a, const DatasetStats& b) {
  DatasetStats s;
  s.n_conversations = a.n_conversations + b.n_conversations;
  s.n_tp_conversations = a.n_tp_conversations + b.n_tp_conversations;
  s.n_utterances = a.n_utterances + b.n_utterances;
  s.n_words = a.n_words + b.n_words;
  s.total_duration_h = a.total_duration_h + b.total_duration_h;
  s.max_transcript_len = std::max(a.max_transcript_len, b.max_transcript_len);
  s.max_conversation_len_s = std::max(a.max_conversation_len_s, b.max_conversation_len_s);
  if (s.n_conversations > 0) {
    s.avg_transcript_len = static_cast<double>(s.n_words) / s.n_conversations;
    s.avg_conversation_len_s = s.total_duration_h * 3600.0 / s.n_conversations;
  }
  return s;
}

EmotionHistogram emotion_histogram(std::span<const ConversationRecord> dataset) {
  EmotionHistogram hist;
  for (const ConversationRecord& record : dataset) {
    if (!record.consensus) continue;
    for (const TurningPoint& tp : record.consensus->turning_points) {
      for (const FeelingObservation& f : tp.pre_feelings) ++hist.pre[f.label];
      for (const FeelingObservation& f : tp.post_feelings) ++hist.post[f.label];
    }
  }
  return hist;
}

}  // namespace mtp
