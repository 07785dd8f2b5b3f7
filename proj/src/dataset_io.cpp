#include "mtp/dataset_io.hpp"

#include <json.hpp>

#include <fstream>
#include <initializer_list>

#include "mtp/error.hpp"
#include "mtp/time.hpp"

namespace mtp {
namespace {

using nlohmann::json;

// Context threaded through the readers: strictness plus a warning sink.
struct Ctx {
  const IoOptions& options;
  IoWarnings& warnings;
};

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> known, Ctx& ctx) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) ok = true;
    if (!ok) {
      std::string msg = "unknown field '" + it.key() + "' at " + path;
      if (ctx.options.strict) throw input_error(msg);
      ctx.warnings.add(msg);
    }
  }
}

const json& require(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw input_error("missing field '" + std::string(key) + "' at " + path);
  return *it;
}

std::string read_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw input_error("expected string at " + path);
  return v.get<std::string>();
}

int read_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw input_error("expected integer at " + path);
  return v.get<int>();
}

// timestamps: numeric seconds or a clock string like "1:25"
double read_ts(const json& v, const std::string& path) {
  if (v.is_number()) {
    double s = v.get<double>();
    if (s < 0.0) throw input_error("negative timestamp at " + path);
    return s;
  }
  if (v.is_string()) {
    try {
      return parse_timestamp(v.get<std::string>());
    } catch (const Error& e) {
      throw input_error(std::string(e.what()) + " at " + path);
    }
  }
  throw input_error("expected number or timestamp string at " + path);
}

FeelingObservation read_feeling(const json& v, const std::string& path, Ctx& ctx) {
  if (!v.is_object()) throw input_error("expected object at " + path);
  check_keys(v, path, {"label", "ts"}, ctx);
  FeelingObservation f;
  std::string name = read_string(require(v, "label", path), path + ".label");
  auto label = parse_emotion(name);
  if (!label) throw input_error("unknown emotion label '" + name + "' at " + path);
  f.label = *label;
  f.ts = read_ts(require(v, "ts", path), path + ".ts");
  return f;
}

EvidencedState read_dbp(const json& v, const std::string& path, Ctx& ctx) {
  if (!v.is_object()) throw input_error("expected object at " + path);
  check_keys(v, path, {"description", "evidence_ts"}, ctx);
  EvidencedState e;
  e.description = read_string(require(v, "description", path), path + ".description");
  e.evidence_ts = read_ts(require(v, "evidence_ts", path), path + ".evidence_ts");
  return e;
}

TurningPoint read_turning_point(const json& v, const std::string& path, Ctx& ctx) {
  if (!v.is_object()) throw input_error("expected object at " + path);
  check_keys(v, path,
             {"location_s", "cause", "pre_feelings", "post_feelings", "pre_dbp",
              "post_dbp", "explanation", "type_tag"},
             ctx);
  TurningPoint tp;
  tp.location_s = read_ts(require(v, "location_s", path), path + ".location_s");
  tp.cause = read_string(require(v, "cause", path), path + ".cause");
  auto read_feelings = [&](const char* key, std::vector<FeelingObservation>& out) {
    auto it = v.find(key);
    if (it == v.end()) return;
    if (!it->is_array()) throw input_error("expected array at " + path + "." + key);
    for (std::size_t i = 0; i < it->size(); ++i)
      out.push_back(
          read_feeling((*it)[i], path + "." + key + "[" + std::to_string(i) + "]", ctx));
  };
  read_feelings("pre_feelings", tp.pre_feelings);
  read_feelings("post_feelings", tp.post_feelings);
  auto read_dbps = [&](const char* key, std::vector<EvidencedState>& out) {
    auto it = v.find(key);
    if (it == v.end()) return;
    if (!it->is_array()) throw input_error("expected array at " + path + "." + key);
    for (std::size_t i = 0; i < it->size(); ++i)
      out.push_back(
          read_dbp((*it)[i], path + "." + key + "[" + std::to_string(i) + "]", ctx));
  };
  read_dbps("pre_dbp", tp.pre_dbp);
  read_dbps("post_dbp", tp.post_dbp);
  if (auto it = v.find("explanation"); it != v.end())
    tp.explanation = read_string(*it, path + ".explanation");
  if (auto it = v.find("type_tag"); it != v.end()) {
    std::string name = read_string(*it, path + ".type_tag");
    auto tag = parse_tp_type(name);
    if (!tag)
      throw input_error("unknown type_tag '" + name + "' at " + path + ".type_tag");
    tp.type_tag = *tag;
  }
  return tp;
}

AnnotationRecord read_annotation(const json& v, const std::string& path,
                                 const std::string& conversation_id, Ctx& ctx) {
  if (!v.is_object()) throw input_error("expected object at " + path);
  check_keys(v, path,
             {"annotator_id", "conversation_id", "turning_points", "no_tp_explanation"},
             ctx);
  AnnotationRecord ann;
  ann.annotator_id = read_string(require(v, "annotator_id", path), path + ".annotator_id");
  ann.conversation_id = conversation_id;
  if (auto it = v.find("conversation_id"); it != v.end())
    ann.conversation_id = read_string(*it, path + ".conversation_id");
  if (auto it = v.find("turning_points"); it != v.end()) {
    if (!it->is_array())
      throw input_error("expected array at " + path + ".turning_points");
    for (std::size_t i = 0; i < it->size(); ++i)
      ann.turning_points.push_back(read_turning_point(
          (*it)[i], path + ".turning_points[" + std::to_string(i) + "]", ctx));
  }
  if (auto it = v.find("no_tp_explanation"); it != v.end())
    ann.no_tp_explanation = read_string(*it, path + ".no_tp_explanation");
  return ann;
}

Utterance read_utterance(const json& v, const std::string& path, Ctx& ctx) {
  if (!v.is_object()) throw input_error("expected object at " + path);
  check_keys(v, path,
             {"ordinal", "transcript", "speaker", "start_s", "end_s",
              "visual_description", "frame_ref"},
             ctx);
  Utterance u;
  u.ordinal = read_int(require(v, "ordinal", path), path + ".ordinal");
  u.transcript = read_string(require(v, "transcript", path), path + ".transcript");
  u.speaker = read_string(require(v, "speaker", path), path + ".speaker");
  u.start_s = read_ts(require(v, "start_s", path), path + ".start_s");
  u.end_s = read_ts(require(v, "end_s", path), path + ".end_s");
  if (auto it = v.find("visual_description"); it != v.end())
    u.visual_description = read_string(*it, path + ".visual_description");
  if (auto it = v.find("frame_ref"); it != v.end())
    u.frame_ref = read_string(*it, path + ".frame_ref");
  return u;
}

json feeling_to_json(const FeelingObservation& f) {
  return json{{"label", std::string(emotion_name(f.label))}, {"ts", f.ts}};
}

json dbp_to_json(const EvidencedState& e) {
  return json{{"description", e.description}, {"evidence_ts", e.evidence_ts}};
}

json turning_point_to_json(const TurningPoint& tp) {
  json j;
  j["location_s"] = tp.location_s;
  j["cause"] = tp.cause;
  j["pre_feelings"] = json::array();
  for (const auto& f : tp.pre_feelings) j["pre_feelings"].push_back(feeling_to_json(f));
  j["post_feelings"] = json::array();
  for (const auto& f : tp.post_feelings) j["post_feelings"].push_back(feeling_to_json(f));
  j["pre_dbp"] = json::array();
  for (const auto& e : tp.pre_dbp) j["pre_dbp"].push_back(dbp_to_json(e));
  j["post_dbp"] = json::array();
  for (const auto& e : tp.post_dbp) j["post_dbp"].push_back(dbp_to_json(e));
  if (tp.explanation) j["explanation"] = *tp.explanation;
  if (tp.type_tag) j["type_tag"] = std::string(tp_type_name(*tp.type_tag));
  return j;
}

}  // namespace

ConversationRecord record_from_json(const std::string& text, const IoOptions& options,
                                    IoWarnings& warnings) {
  Ctx ctx{options, warnings};
  json v;
  try {
    v = json::parse(text);
  } catch (const json::parse_error& e) {
    throw mtp::parse_error(std::string("invalid JSON: ") + e.what());
  }
  if (!v.is_object()) throw input_error("expected a JSON object per dataset line");
  check_keys(v, "record",
             {"id", "scene_tag", "season", "episode", "duration_s", "utterances",
              "annotations", "consensus"},
             ctx);

  ConversationRecord record;
  Conversation& conv = record.conversation;
  conv.id = read_string(require(v, "id", "record"), "id");
  conv.scene_tag = read_string(require(v, "scene_tag", "record"), "scene_tag");
  conv.season = read_int(require(v, "season", "record"), "season");
  conv.episode = read_int(require(v, "episode", "record"), "episode");
  conv.duration_s = read_ts(require(v, "duration_s", "record"), "duration_s");
  const json& utts = require(v, "utterances", "record");
  if (!utts.is_array()) throw input_error("expected array at utterances");
  for (std::size_t i = 0; i < utts.size(); ++i)
    conv.utterances.push_back(
        read_utterance(utts[i], "utterances[" + std::to_string(i) + "]", ctx));

  if (auto it = v.find("annotations"); it != v.end()) {
    if (!it->is_array()) throw input_error("expected array at annotations");
    for (std::size_t i = 0; i < it->size(); ++i)
      record.annotations.push_back(read_annotation(
          (*it)[i], "annotations[" + std::to_string(i) + "]", conv.id, ctx));
  }
  if (auto it = v.find("consensus"); it != v.end()) {
    if (!it->is_object()) throw input_error("expected object at consensus");
    check_keys(*it, "consensus", {"turning_points"}, ctx);
    ConsensusAnnotation consensus;
    if (auto tps = it->find("turning_points"); tps != it->end()) {
      if (!tps->is_array())
        throw input_error("expected array at consensus.turning_points");
      for (std::size_t i = 0; i < tps->size(); ++i)
        consensus.turning_points.push_back(read_turning_point(
            (*tps)[i], "consensus.turning_points[" + std::to_string(i) + "]", ctx));
    }
    record.consensus = std::move(consensus);
  }
  return record;
}

std::string record_to_json(const ConversationRecord& record) {
  const Conversation& conv = record.conversation;
  json j;
  j["id"] = conv.id;
  j["scene_tag"] = conv.scene_tag;
  j["season"] = conv.season;
  j["episode"] = conv.episode;
  j["duration_s"] = conv.duration_s;
  j["utterances"] = json::array();
  for (const Utterance& u : conv.utterances) {
    json ju;
    ju["ordinal"] = u.ordinal;
    ju["transcript"] = u.transcript;
    ju["speaker"] = u.speaker;
    ju["start_s"] = u.start_s;
    ju["end_s"] = u.end_s;
    if (u.visual_description) ju["visual_description"] = *u.visual_description;
    if (u.frame_ref) ju["frame_ref"] = *u.frame_ref;
    j["utterances"].push_back(std::move(ju));
  }
  if (!record.annotations.empty()) {
    j["annotations"] = json::array();
    for (const AnnotationRecord& ann : record.annotations) {
      json ja;
      ja["annotator_id"] = ann.annotator_id;
      ja["turning_points"] = json::array();
      for (const TurningPoint& tp : ann.turning_points)
        ja["turning_points"].push_back(turning_point_to_json(tp));
      if (ann.no_tp_explanation) ja["no_tp_explanation"] = *ann.no_tp_explanation;
      j["annotations"].push_back(std::move(ja));
    }
  }
  if (record.consensus) {
    json jc;
    jc["turning_points"] = json::array();
    for (const TurningPoint& tp : record.consensus->turning_points)
      jc["turning_points"].push_back(turning_point_to_json(tp));
    j["consensus"] = std::move(jc);
  }
  return j.dump();
}

std::vector<ConversationRecord> read_dataset(const std::string& path,
                                             const IoOptions& options,
                                             IoWarnings& warnings) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open dataset file '" + path + "'");
  std::vector<ConversationRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      records.push_back(record_from_json(line, options, warnings));
    } catch (const Error& e) {
      throw Error(e.kind(), path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void write_dataset(const std::string& path, std::span<const ConversationRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot write dataset file '" + path + "'");
  for (const ConversationRecord& r : records) out << record_to_json(r) << '\n';
  if (!out) throw io_error("write failed for '" + path + "'");
}

std::vector<PredictionRecord> read_submission(const std::string& path,
                                              const IoOptions& options,
                                              IoWarnings& warnings) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open submission file '" + path + "'");
  Ctx ctx{options, warnings};
  std::vector<PredictionRecord> preds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    json v;
    try {
      v = json::parse(line);
    } catch (const json::parse_error& e) {
      throw mtp::parse_error(where + ": invalid JSON: " + e.what());
    }
    if (!v.is_object()) throw input_error(where + ": expected a JSON object");
    try {
      check_keys(v, "submission", {"conversation_id", "has_tp", "timestamps", "score"},
                 ctx);
      PredictionRecord p;
      p.conversation_id =
          read_string(require(v, "conversation_id", "submission"), "conversation_id");
      const json& flag = require(v, "has_tp", "submission");
      if (!flag.is_boolean()) throw input_error("expected boolean at has_tp");
      p.has_tp = flag.get<bool>();
      if (auto it = v.find("timestamps"); it != v.end()) {
        if (!it->is_array()) throw input_error("expected array at timestamps");
        for (std::size_t i = 0; i < it->size(); ++i)
          p.timestamps.push_back(
              read_ts((*it)[i], "timestamps[" + std::to_string(i) + "]"));
      }
      if (auto it = v.find("score"); it != v.end()) {
        if (!it->is_number()) throw input_error("expected number at score");
        double s = it->get<double>();
        if (s < 0.0 || s > 1.0) throw input_error("score must be within [0,1]");
        p.score = s;
      }
      if (!p.has_tp && !p.timestamps.empty())
        warnings.add(where + ": has_tp is false but timestamps are present for '" +
                     p.conversation_id + "'");
      preds.push_back(std::move(p));
    } catch (const Error& e) {
      throw Error(e.kind(), where + ": " + e.what());
    }
  }
  return preds;
}

void write_submission(const std::string& path, std::span<const PredictionRecord> preds) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot write submission file '" + path + "'");
  for (const PredictionRecord& p : preds) {
    json j;
    j["conversation_id"] = p.conversation_id;
    j["has_tp"] = p.has_tp;
    j["timestamps"] = p.timestamps;
    if (p.score) j["score"] = *p.score;
    out << j.dump() << '\n';
  }
  if (!out) throw io_error("write failed for '" + path + "'");
}

}  // namespace mtp
