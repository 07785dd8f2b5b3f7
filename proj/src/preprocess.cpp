#include "mtp/preprocess.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>

#include "mtp/error.hpp"
#include "mtp/hash.hpp"

namespace mtp {
namespace {

using nlohmann::json;

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool contains_ci(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return false;
  return lower(haystack).find(lower(needle)) != std::string::npos;
}

std::string sanitize_tag(const std::string& tag) {
  std::string out;
  for (char c : tag)
    out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

}  // namespace

std::vector<Utterance> ingest_asr_alignment(const std::string& document_text) {
  json v;
  try {
    v = json::parse(document_text);
  } catch (const json::parse_error& e) {
    throw parse_error(std::string("alignment document: ") + e.what());
  }
  if (!v.is_object() || !v.contains("segments") || !v["segments"].is_array())
    throw input_error("alignment document needs a top-level 'segments' array");

  std::vector<AsrSegment> segments;
  const json& arr = v["segments"];
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& s = arr[i];
    const std::string where = "segment " + std::to_string(i);
    for (const char* key : {"start", "end", "text"})
      if (!s.contains(key))
        throw input_error(where + ": missing field '" + key + "'");
    AsrSegment seg;
    if (!s["start"].is_number() || !s["end"].is_number())
      throw input_error(where + ": start/end must be numbers");
    seg.start_s = s["start"].get<double>();
    seg.end_s = s["end"].get<double>();
    if (!s["text"].is_string()) throw input_error(where + ": text must be a string");
    seg.text = s["text"].get<std::string>();
    if (seg.start_s > seg.end_s)
      throw input_error(where + ": start exceeds end");
    if (seg.text.empty()) throw input_error(where + ": empty text");
    segments.push_back(std::move(seg));
  }

  std::stable_sort(segments.begin(), segments.end(),
                   [](const AsrSegment& a, const AsrSegment& b) {
                     return a.start_s < b.start_s;
                   });
  std::vector<Utterance> utterances;
  utterances.reserve(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    Utterance u;
    u.ordinal = static_cast<int>(i) + 1;
    u.transcript = std::move(segments[i].text);
    u.start_s = segments[i].start_s;
    u.end_s = segments[i].end_s;
    utterances.push_back(std::move(u));
  }
  return utterances;
}

AttributionReport attribute_speakers(std::vector<Utterance>& utterances,
                                     std::span<const ScriptLine> script,
                                     const ModelHandle& embedder, const ModelHandle& chat,
                                     double sim_threshold) {
  if (script.empty()) throw input_error("attribute_speakers: empty script");
  if (!(sim_threshold > 0.0 && sim_threshold <= 1.0))
    throw input_error("attribute_speakers: sim_threshold must be in (0, 1]");
  for (const ScriptLine& line : script)
    if (line.speaker.empty() || line.line.empty())
      throw input_error("attribute_speakers: script lines need speaker and line text");

  AttributionReport report;
  if (utterances.empty()) return report;

  std::vector<std::string> line_texts;
  line_texts.reserve(script.size());
  for (const ScriptLine& line : script) line_texts.push_back(line.line);
  const auto line_vectors = embedder.embed(line_texts);

  std::vector<std::string> transcripts;
  transcripts.reserve(utterances.size());
  for (const Utterance& u : utterances) transcripts.push_back(u.transcript);
  const auto transcript_vectors = embedder.embed(transcripts);

  for (std::size_t i = 0; i < utterances.size(); ++i) {
    std::size_t best = 0;
    double best_sim = -2.0;
    for (std::size_t j = 0; j < line_vectors.size(); ++j) {
      double sim = cosine_similarity(transcript_vectors[i], line_vectors[j]);
      if (sim > best_sim) {
        best_sim = sim;
        best = j;
      }
    }
    const ScriptLine& candidate = script[best];
    AttributionRow row;
    row.ordinal = utterances[i].ordinal;
    row.candidate_speaker = candidate.speaker;
    row.similarity = best_sim;

    if (best_sim < sim_threshold) {
      row.decision = "below_threshold";
      utterances[i].speaker = "UNKNOWN";
      report.rows.push_back(std::move(row));
      continue;
    }

    std::string prompt =
        "You match utterance transcripts to script speakers. Answer with the "
        "speaker name only.\n"
        "Transcript: " + utterances[i].transcript + "\n"
        "Most similar script line: " + candidate.line + "\n"
        "Script speaker for that line: " + candidate.speaker + "\n"
        "Name the speaker of the transcript.";
    std::string answer = chat.chat({{"user", prompt, std::nullopt}});

    // Answers may only name speakers the script already contains.
    std::string assigned;
    if (contains_ci(answer, candidate.speaker)) {
      assigned = candidate.speaker;
    } else {
      std::vector<std::string> hits;
      for (const ScriptLine& line : script) {
        if (std::find(hits.begin(), hits.end(), line.speaker) != hits.end()) continue;
        if (contains_ci(answer, line.speaker)) hits.push_back(line.speaker);
      }
      if (hits.size() == 1) assigned = hits.front();
    }
    if (assigned.empty()) {
      row.decision = "unconfirmed";
      utterances[i].speaker = "UNKNOWN";
    } else {
      row.decision = "assigned";
      utterances[i].speaker = assigned;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::vector<ClipJob> clip_manifest(const std::string& media_path,
                                   std::span<const SceneBoundary> boundaries,
                                   const std::string& output_dir) {
  for (const SceneBoundary& b : boundaries)
    if (!(b.start_s < b.end_s))
      throw input_error("boundary '" + b.scene_tag + "': start must precede end");

  // overlap check within each episode
  std::vector<const SceneBoundary*> sorted;
  for (const SceneBoundary& b : boundaries) sorted.push_back(&b);
  std::sort(sorted.begin(), sorted.end(),
            [](const SceneBoundary* a, const SceneBoundary* b) {
              return std::tie(a->season, a->episode, a->start_s) <
                     std::tie(b->season, b->episode, b->start_s);
            });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const SceneBoundary* prev = sorted[i - 1];
    const SceneBoundary* cur = sorted[i];
    if (prev->season == cur->season && prev->episode == cur->episode &&
        cur->start_s < prev->end_s)
      throw input_error("overlapping boundaries '" + prev->scene_tag + "' and '" +
                        cur->scene_tag + "'");
  }

  std::vector<ClipJob> jobs;
  jobs.reserve(boundaries.size());
  for (const SceneBoundary& b : boundaries) {
    char name[64];
    std::snprintf(name, sizeof(name), "s%02de%02d_", b.season, b.episode);
    ClipJob job;
    job.input_path = media_path;
    job.start_s = b.start_s;
    job.end_s = b.end_s;
    job.output_path =
        (std::filesystem::path(output_dir) / (name + sanitize_tag(b.scene_tag) + ".mp4"))
            .string();
    jobs.push_back(std::move(job));
  }
  return jobs;
}

double sample_frame_time(const Utterance& utterance, const FramePolicy& policy,
                         const std::string& conversation_id) {
  if (utterance.start_s > utterance.end_s)
    throw input_error("utterance " + std::to_string(utterance.ordinal) +
                      ": start exceeds end");
  if (policy.mode == FramePolicy::Mode::Midpoint)
    return (utterance.start_s + utterance.end_s) / 2.0;
  std::uint64_t state = hash_combine(policy.seed, fnv1a64(conversation_id));
  state = hash_combine(state, static_cast<std::uint64_t>(utterance.ordinal));
  double u = unit_double(splitmix64(state));
  return utterance.start_s + u * (utterance.end_s - utterance.start_s);
}

}  // namespace mtp
