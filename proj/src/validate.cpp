#include "mtp/validate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace mtp {
namespace {

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string utt_path(std::size_t i, const char* field) {
  return "utterances[" + std::to_string(i) + "]." + field;
}

void check_turning_point(const TurningPoint& tp, const std::string& path,
                         double duration_s, ValidationReport& report) {
  if (blank(tp.cause)) report.add(path + ".cause", "empty_cause");
  if (tp.location_s < 0.0)
    report.add(path + ".location_s", "negative_timestamp");
  if (tp.location_s > duration_s)
    report.add(path + ".location_s", "location_exceeds_duration",
               std::to_string(tp.location_s) + " > " + std::to_string(duration_s));
  auto check_feelings = [&](const std::vector<FeelingObservation>& fs, const char* name) {
    for (std::size_t i = 0; i < fs.size(); ++i)
      if (fs[i].ts < 0.0)
        report.add(path + "." + name + "[" + std::to_string(i) + "].ts",
                   "negative_timestamp");
  };
  check_feelings(tp.pre_feelings, "pre_feelings");
  check_feelings(tp.post_feelings, "post_feelings");
  auto check_dbp = [&](const std::vector<EvidencedState>& es, const char* name) {
    for (std::size_t i = 0; i < es.size(); ++i) {
      std::string p = path + "." + name + "[" + std::to_string(i) + "]";
      if (es[i].evidence_ts < 0.0) report.add(p + ".evidence_ts", "negative_timestamp");
      if (es[i].evidence_ts > duration_s)
        report.add(p + ".evidence_ts", "evidence_exceeds_duration");
    }
  };
  check_dbp(tp.pre_dbp, "pre_dbp");
  check_dbp(tp.post_dbp, "post_dbp");
}

}  // namespace

void ValidationReport::add(std::string path, std::string rule, std::string detail) {
  violations.push_back({std::move(path), std::move(rule), std::move(detail)});
}

void ValidationReport::merge(const ValidationReport& other) {
  violations.insert(violations.end(), other.violations.begin(), other.violations.end());
}

ValidationReport validate_conversation(const Conversation& conv) {
  ValidationReport report;
  if (conv.id.empty()) report.add("id", "empty_id");
  if (conv.duration_s < 0.0) report.add("duration_s", "negative_timestamp");

  const auto& utts = conv.utterances;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const Utterance& u = utts[i];
    if (u.start_s < 0.0) report.add(utt_path(i, "start_s"), "negative_timestamp");
    if (u.end_s < 0.0) report.add(utt_path(i, "end_s"), "negative_timestamp");
    if (u.start_s > u.end_s)
      report.add(utt_path(i, "start_s"), "start_after_end",
                 std::to_string(u.start_s) + " > " + std::to_string(u.end_s));
    if (blank(u.transcript)) report.add(utt_path(i, "transcript"), "empty_transcript");
    // allow 1 s slack against the recorded duration
    if (u.end_s > conv.duration_s + 1.0)
      report.add(utt_path(i, "end_s"), "end_exceeds_duration",
                 std::to_string(u.end_s) + " > " + std::to_string(conv.duration_s) + " + 1");
    if (i > 0 && utts[i - 1].start_s > u.start_s)
      report.add(utt_path(i, "start_s"), "unordered_starts");
  }

  // ordinals must be exactly 1..m in order
  bool contiguous = true;
  for (std::size_t i = 0; i < utts.size(); ++i)
    if (utts[i].ordinal != static_cast<int>(i) + 1) contiguous = false;
  if (!contiguous) report.add("utterances", "non_contiguous_ordinals");

  return report;
}

ValidationReport validate_record(const ConversationRecord& record) {
  ValidationReport report = validate_conversation(record.conversation);
  const double duration = record.conversation.duration_s;

  for (std::size_t a = 0; a < record.annotations.size(); ++a) {
    const AnnotationRecord& ann = record.annotations[a];
    std::string base = "annotations[" + std::to_string(a) + "]";
    if (ann.annotator_id.empty()) report.add(base + ".annotator_id", "empty_annotator_id");
    if (!ann.conversation_id.empty() && ann.conversation_id != record.conversation.id)
      report.add(base + ".conversation_id", "conversation_id_mismatch",
                 ann.conversation_id + " != " + record.conversation.id);
    if (ann.turning_points.empty() &&
        (!ann.no_tp_explanation || blank(*ann.no_tp_explanation)))
      report.add(base, "missing_no_tp_explanation");
    for (std::size_t t = 0; t < ann.turning_points.size(); ++t)
      check_turning_point(ann.turning_points[t],
                          base + ".turning_points[" + std::to_string(t) + "]", duration,
                          report);
  }

  if (record.consensus) {
    const auto& tps = record.consensus->turning_points;
    for (std::size_t t = 0; t < tps.size(); ++t)
      check_turning_point(tps[t], "consensus.turning_points[" + std::to_string(t) + "]",
                          duration, report);
  }

  return report;
}

}  // namespace mtp
