#include "mtp/commands.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "mtp/consensus.hpp"
#include "mtp/dataset_io.hpp"
#include "mtp/describer.hpp"
#include "mtp/error.hpp"
#include "mtp/evaluator.hpp"
#include "mtp/gateway.hpp"
#include "mtp/preprocess.hpp"
#include "mtp/reasoner.hpp"
#include "mtp/stats.hpp"
#include "mtp/validate.hpp"

namespace mtp {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_file_atomic(const fs::path& path, const std::string& content) {
  static std::atomic<std::uint64_t> counter{0};
  fs::path tmp = path.string() + ".tmp." + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw io_error("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw io_error("rename failed for '" + path.string() + "': " + ec.message());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw parse_error("'" + path + "': " + e.what());
  }
}

int effective_parallelism(const RunConfig& config) {
  if (config.parallelism > 0) return config.parallelism;
  unsigned n = std::thread::hardware_concurrency();
  return n > 0 ? static_cast<int>(n) : 1;
}

struct GatewaySet {
  std::vector<std::shared_ptr<ModelBackend>> backends;
  std::vector<std::unique_ptr<ModelGateway>> gateways;
  ModelHandle chat;
  ModelHandle vision;
  ModelHandle embedding;
};

GatewaySet build_gateways(const RunConfig& config) {
  GatewaySet set;
  std::map<std::string, ModelGateway*> pool;
  auto handle_for = [&](const BackendConfig& bc) -> ModelHandle {
    if (bc.kind.empty()) return {};
    std::string key =
        bc.kind + '|' + bc.mock_fixture + '|' + bc.base_url + '|' + bc.credential_env;
    ModelGateway* gateway;
    if (auto it = pool.find(key); it != pool.end()) {
      gateway = it->second;
    } else {
      std::shared_ptr<ModelBackend> backend;
      if (bc.kind == "mock") {
        backend = MockBackend::from_file(bc.mock_fixture);
      } else if (bc.kind == "http") {
        HttpBackendConfig http;
        http.base_url = bc.base_url;
        http.credential_env = bc.credential_env;
        backend = std::make_shared<HttpBackend>(std::move(http));
      } else {
        throw config_error("unknown backend kind '" + bc.kind + "'");
      }
      GatewayOptions options;
      options.reproducible = config.reproducible;
      options.max_in_flight = effective_parallelism(config);
      set.backends.push_back(backend);
      set.gateways.push_back(
          std::make_unique<ModelGateway>(backend, config.cache_dir, options));
      gateway = set.gateways.back().get();
      pool[key] = gateway;
    }
    ModelHandle handle;
    handle.gateway = gateway;
    handle.model_id = bc.model_id;
    return handle;
  };
  set.chat = handle_for(config.chat);
  set.vision = handle_for(config.vision);
  set.embedding = handle_for(config.embedding);
  return set;
}

std::string sanitize_id(const std::string& id) {
  std::string out = id;
  for (char& c : out)
    if (c == '/' || c == '\\') c = '_';
  return out;
}

json detection_to_json(const DetectionMetrics& m) {
  json j;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["counts"] = {{"matched_gt", m.counts.matched_gt},
                 {"total_gt", m.counts.total_gt},
                 {"matched_pred", m.counts.matched_pred},
                 {"total_pred", m.counts.total_pred}};
  return j;
}

DetectionMetrics detection_from_json(const json& j) {
  DetectionMetrics m;
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  if (auto it = j.find("counts"); it != j.end()) {
    m.counts.matched_gt = it->value("matched_gt", 0);
    m.counts.total_gt = it->value("total_gt", 0);
    m.counts.matched_pred = it->value("matched_pred", 0);
    m.counts.total_pred = it->value("total_pred", 0);
  }
  return m;
}

json classification_to_json(const ClassificationMetrics& m) {
  json j;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["auc"] = m.auc;
  j["confusion"] = {{"tp", m.confusion.tp},
                    {"fp", m.confusion.fp},
                    {"fn", m.confusion.fn},
                    {"tn", m.confusion.tn}};
  return j;
}

ClassificationMetrics classification_from_json(const json& j) {
  ClassificationMetrics m;
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.auc = j.at("auc").get<double>();
  if (auto it = j.find("confusion"); it != j.end()) {
    m.confusion.tp = it->value("tp", 0);
    m.confusion.fp = it->value("fp", 0);
    m.confusion.fn = it->value("fn", 0);
    m.confusion.tn = it->value("tn", 0);
  }
  return m;
}

void print_violations(const std::string& id, const ValidationReport& report,
                      std::ostream& out) {
  for (const Violation& v : report.violations) {
    out << id << ": " << v.path << ": " << v.rule;
    if (!v.detail.empty()) out << " (" << v.detail << ")";
    out << '\n';
  }
}

DetectOptions detect_options(const RunConfig& config) {
  DetectOptions options;
  options.tracking = config.tracking;
  options.few_shot = config.few_shot;
  options.strict = config.strict;
  options.overflow = config.overflow == "strict"
                         ? DetectOptions::OverflowPolicy::Strict
                         : DetectOptions::OverflowPolicy::TruncateVisuals;
  options.max_predictions = config.max_predictions;
  options.classification_vote = config.classification_vote;
  return options;
}

PromptBundle load_bundle(const RunConfig& config) {
  PromptBundle bundle = config.prompt_bundle.empty()
                            ? PromptBundle::defaults()
                            : PromptBundle::from_file(config.prompt_bundle);
  for (const std::string& path : config.few_shot_files)
    bundle.few_shot.push_back(load_few_shot_example(path));
  return bundle;
}

MatchMode match_mode_of(const RunConfig& config) {
  return config.match_mode == "greedy" ? MatchMode::GreedyOneToOne : MatchMode::Exists;
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
  json v = parse_json_file(path);
  if (!v.is_object()) throw config_error("config '" + path + "' must be a JSON object");

  RunConfig config;
  for (auto it = v.begin(); it != v.end(); ++it) {
    const std::string& key = it.key();
    if (key != "dataset" && key != "output_dir" && key != "cache_dir" &&
        key != "judge_id" && key != "backends" && key != "options")
      throw config_error("config: unknown key '" + key + "'");
  }
  config.dataset = v.value("dataset", "");
  config.output_dir = v.value("output_dir", std::string("out"));
  config.cache_dir = v.value("cache_dir", "");
  config.judge_id = v.value("judge_id", "");

  auto read_backend = [&](const json& jb, const char* name) {
    BackendConfig bc;
    if (!jb.is_object())
      throw config_error(std::string("config: backends.") + name + " must be an object");
    for (auto it = jb.begin(); it != jb.end(); ++it) {
      const std::string& key = it.key();
      if (key != "kind" && key != "base_url" && key != "model_id" &&
          key != "credential_env" && key != "mock_fixture")
        throw config_error(std::string("config: backends.") + name + ": unknown key '" +
                           key + "'");
    }
    bc.kind = jb.value("kind", "");
    bc.base_url = jb.value("base_url", "");
    bc.model_id = jb.value("model_id", "");
    bc.credential_env = jb.value("credential_env", "");
    bc.mock_fixture = jb.value("mock_fixture", "");
    return bc;
  };
  if (auto it = v.find("backends"); it != v.end()) {
    if (!it->is_object()) throw config_error("config: 'backends' must be an object");
    for (auto b = it->begin(); b != it->end(); ++b) {
      if (b.key() == "chat")
        config.chat = read_backend(*b, "chat");
      else if (b.key() == "vision")
        config.vision = read_backend(*b, "vision");
      else if (b.key() == "embedding")
        config.embedding = read_backend(*b, "embedding");
      else
        throw config_error("config: backends: unknown key '" + b.key() + "'");
    }
  }

  if (auto it = v.find("options"); it != v.end()) {
    const json& o = *it;
    if (!o.is_object()) throw config_error("config: 'options' must be an object");
    for (auto oi = o.begin(); oi != o.end(); ++oi) {
      const std::string& key = oi.key();
      static const char* known[] = {
          "tracking", "few_shot", "delta_t", "delta_merge", "sim_threshold",
          "frame_mode", "frame_seed", "strict", "reproducible", "parallelism",
          "match_mode", "word_limit", "failure_ceiling", "overflow",
          "max_predictions", "classification_vote", "prompt_bundle", "few_shot_files"};
      bool ok = false;
      for (const char* k : known)
        if (key == k) ok = true;
      if (!ok) throw config_error("config: options: unknown key '" + key + "'");
    }
    config.tracking = o.value("tracking", config.tracking);
    config.few_shot = o.value("few_shot", config.few_shot);
    config.delta_t = o.value("delta_t", config.delta_t);
    config.delta_merge = o.value("delta_merge", config.delta_merge);
    config.sim_threshold = o.value("sim_threshold", config.sim_threshold);
    config.frame_mode = o.value("frame_mode", config.frame_mode);
    config.frame_seed = o.value("frame_seed", config.frame_seed);
    config.strict = o.value("strict", config.strict);
    config.reproducible = o.value("reproducible", config.reproducible);
    config.parallelism = o.value("parallelism", config.parallelism);
    config.match_mode = o.value("match_mode", config.match_mode);
    config.word_limit = o.value("word_limit", config.word_limit);
    config.failure_ceiling = o.value("failure_ceiling", config.failure_ceiling);
    config.overflow = o.value("overflow", config.overflow);
    if (auto mp = o.find("max_predictions"); mp != o.end() && !mp->is_null())
      config.max_predictions = mp->get<int>();
    config.classification_vote = o.value("classification_vote", config.classification_vote);
    config.prompt_bundle = o.value("prompt_bundle", config.prompt_bundle);
    if (auto fsf = o.find("few_shot_files"); fsf != o.end())
      config.few_shot_files = fsf->get<std::vector<std::string>>();
  }
  return config;
}

void RunConfig::check(bool need_dataset) const {
  if (need_dataset) {
    if (dataset.empty()) throw config_error("no dataset configured");
    if (!fs::exists(dataset)) throw config_error("dataset '" + dataset + "' does not exist");
  }
  if (!(delta_t > 0.0)) throw config_error("delta_t must be positive");
  if (delta_merge < 0.0) throw config_error("delta_merge must be non-negative");
  if (!(sim_threshold > 0.0 && sim_threshold <= 1.0))
    throw config_error("sim_threshold must be in (0, 1]");
  if (word_limit < 10) throw config_error("word_limit must be >= 10");
  if (failure_ceiling < 0.0 || failure_ceiling > 1.0)
    throw config_error("failure_ceiling must be in [0, 1]");
  if (parallelism < 0) throw config_error("parallelism must be >= 0");
  if (frame_mode != "random" && frame_mode != "midpoint")
    throw config_error("frame_mode must be 'random' or 'midpoint'");
  if (match_mode != "exists" && match_mode != "greedy")
    throw config_error("match_mode must be 'exists' or 'greedy'");
  if (overflow != "truncate" && overflow != "strict")
    throw config_error("overflow must be 'truncate' or 'strict'");
  if (max_predictions && *max_predictions < 1)
    throw config_error("max_predictions must be >= 1");
  for (const BackendConfig* bc : {&chat, &vision, &embedding}) {
    if (bc->kind == "mock" && !fs::exists(bc->mock_fixture))
      throw config_error("mock fixture '" + bc->mock_fixture + "' does not exist");
    if (bc->kind == "http" && bc->base_url.empty())
      throw config_error("http backend needs a base_url");
  }
  if (!prompt_bundle.empty() && !fs::exists(prompt_bundle))
    throw config_error("prompt bundle '" + prompt_bundle + "' does not exist");
  for (const std::string& path : few_shot_files)
    if (!fs::exists(path))
      throw config_error("few-shot file '" + path + "' does not exist");
}

int cmd_validate(const RunConfig& config, std::ostream& out) {
  config.check();
  IoWarnings warnings;
  auto records = read_dataset(config.dataset, IoOptions{config.strict}, warnings);
  for (const std::string& w : warnings.messages) out << "warning: " << w << '\n';
  if (records.empty()) {
    out << "empty dataset\n";
    return 1;
  }
  std::size_t total = 0;
  for (const ConversationRecord& record : records) {
    ValidationReport report = validate_record(record);
    print_violations(record.conversation.id, report, out);
    total += report.violations.size();
  }
  if (total == 0) {
    out << "ok: " << records.size() << " records valid\n";
    return 0;
  }
  out << total << " violation" << (total == 1 ? "" : "s") << " in " << records.size()
      << " records\n";
  return 1;
}

int cmd_stats(const RunConfig& config, std::ostream& out) {
  config.check();
  IoWarnings warnings;
  auto records = read_dataset(config.dataset, IoOptions{config.strict}, warnings);
  if (records.empty()) {
    out << "empty dataset\n";
    return 1;
  }
  std::size_t violations = 0;
  for (const ConversationRecord& record : records) {
    ValidationReport report = validate_record(record);
    print_violations(record.conversation.id, report, out);
    violations += report.violations.size();
  }
  if (violations > 0) {
    out << violations << " validation violations; fix the dataset first\n";
    return 1;
  }

  DatasetStats stats = dataset_stats(records);
  EmotionHistogram hist = emotion_histogram(records);

  out << "conversations:       " << stats.n_conversations << '\n'
      << "with turning points: " << stats.n_tp_conversations << '\n'
      << "utterances:          " << stats.n_utterances << '\n'
      << "words:               " << stats.n_words << '\n'
      << "total duration (h):  " << stats.total_duration_h << '\n'
      << "avg words/conv:      " << stats.avg_transcript_len << '\n'
      << "max words/conv:      " << stats.max_transcript_len << '\n'
      << "avg length (s):      " << stats.avg_conversation_len_s << '\n'
      << "max length (s):      " << stats.max_conversation_len_s << '\n';
  auto print_hist = [&](const char* name, const std::map<EmotionLabel, std::int64_t>& h) {
    out << name << " feelings:\n";
    for (const auto& [label, count] : h)
      out << "  " << emotion_name(label) << ": " << count << '\n';
  };
  print_hist("pre", hist.pre);
  print_hist("post", hist.post);

  json j;
  j["n_conversations"] = stats.n_conversations;
  j["n_tp_conversations"] = stats.n_tp_conversations;
  j["n_utterances"] = stats.n_utterances;
  j["n_words"] = stats.n_words;
  j["total_duration_h"] = stats.total_duration_h;
  j["avg_transcript_len"] = stats.avg_transcript_len;
  j["max_transcript_len"] = stats.max_transcript_len;
  j["avg_conversation_len_s"] = stats.avg_conversation_len_s;
  j["max_conversation_len_s"] = stats.max_conversation_len_s;
  json pre = json::object(), post = json::object();
  for (const auto& [label, count] : hist.pre) pre[std::string(emotion_name(label))] = count;
  for (const auto& [label, count] : hist.post)
    post[std::string(emotion_name(label))] = count;
  j["emotion_histogram"] = {{"pre", pre}, {"post", post}};

  fs::create_directories(config.output_dir);
  write_file_atomic(fs::path(config.output_dir) / "stats.json", j.dump() + "\n");
  return 0;
}

int cmd_consensus(const RunConfig& config, std::ostream& out) {
  config.check();
  if (config.judge_id.empty())
    throw config_error("consensus needs judge_id (config key 'judge_id' or --judge)");
  IoWarnings warnings;
  auto records = read_dataset(config.dataset, IoOptions{config.strict}, warnings);
  if (records.empty()) {
    out << "empty dataset\n";
    return 1;
  }

  ConsensusOptions options;
  options.delta_merge_s = config.delta_merge;

  json log;
  log["delta_merge"] = config.delta_merge;
  log["judge_id"] = config.judge_id;
  log["conversations"] = json::array();
  std::vector<std::string> errors;
  std::size_t flagged = 0;

  for (ConversationRecord& record : records) {
    try {
      ConsensusResult result =
          consensus_merge(record.annotations, config.judge_id, options);
      record.consensus = ConsensusAnnotation{result.kept};
      json entry;
      entry["conversation_id"] = record.conversation.id;
      entry["flag_delete"] = result.flag_delete;
      entry["kept"] = result.kept.size();
      entry["decisions"] = json::array();
      for (const ClusterDecision& d : result.decisions) {
        json jd;
        jd["location_s"] = d.location_s;
        jd["endorsers"] = d.endorsers;
        jd["kept"] = d.kept;
        if (!d.note.empty()) jd["note"] = d.note;
        entry["decisions"].push_back(std::move(jd));
      }
      log["conversations"].push_back(std::move(entry));
      if (result.flag_delete) {
        ++flagged;
        out << record.conversation.id << ": flagged for deletion (all annotators "
            << "proposed turning points, none agreed)\n";
      }
    } catch (const Error& e) {
      errors.push_back(record.conversation.id + ": " + e.what());
    }
  }

  if (!errors.empty()) {
    for (const std::string& e : errors) out << e << '\n';
    out << errors.size() << " conversations failed consensus\n";
    return 1;
  }

  fs::create_directories(config.output_dir);
  write_dataset((fs::path(config.output_dir) / "consensus.jsonl").string(), records);
  write_file_atomic(fs::path(config.output_dir) / "consensus_log.json", log.dump() + "\n");
  out << "merged " << records.size() << " conversations, " << flagged
      << " flagged for deletion\n";
  return 0;
}

int cmd_preprocess(const RunConfig& config, const PreprocessArgs& args, std::ostream& out) {
  config.check(false);
  if (args.asr_path.empty()) throw config_error("preprocess needs --asr");

  std::vector<Utterance> utterances = ingest_asr_alignment(read_file(args.asr_path));
  fs::create_directories(config.output_dir);

  if (!args.script_path.empty()) {
    json jscript = parse_json_file(args.script_path);
    if (!jscript.is_array())
      throw input_error("script '" + args.script_path + "' must be a JSON array");
    std::vector<ScriptLine> script;
    for (const json& je : jscript) {
      ScriptLine line;
      line.speaker = je.at("speaker").get<std::string>();
      line.line = je.at("line").get<std::string>();
      script.push_back(std::move(line));
    }
    GatewaySet gateways = build_gateways(config);
    if (!gateways.embedding.gateway || !gateways.chat.gateway)
      throw config_error("speaker attribution needs embedding and chat backends");
    AttributionReport report = attribute_speakers(
        utterances, script, gateways.embedding, gateways.chat, config.sim_threshold);
    json jreport;
    jreport["conversation_id"] = args.conversation_id;
    jreport["sim_threshold"] = config.sim_threshold;
    jreport["rows"] = json::array();
    for (const AttributionRow& row : report.rows)
      jreport["rows"].push_back({{"ordinal", row.ordinal},
                                 {"candidate_speaker", row.candidate_speaker},
                                 {"similarity", row.similarity},
                                 {"decision", row.decision}});
    write_file_atomic(fs::path(config.output_dir) / "attribution_report.json",
                      jreport.dump() + "\n");
    std::size_t unknown = 0;
    for (const Utterance& u : utterances)
      if (u.speaker == "UNKNOWN") ++unknown;
    out << "attributed speakers for " << utterances.size() << " utterances, " << unknown
        << " left UNKNOWN\n";
  }

  ConversationRecord record;
  record.conversation.id = args.conversation_id;
  record.conversation.scene_tag = args.scene_tag;
  record.conversation.season = args.season;
  record.conversation.episode = args.episode;
  double duration = args.duration_s;
  if (duration < 0.0) {
    duration = 0.0;
    for (const Utterance& u : utterances) duration = std::max(duration, u.end_s);
  }
  record.conversation.duration_s = duration;
  record.conversation.utterances = std::move(utterances);

  // frame times for the external extraction step
  FramePolicy policy;
  policy.mode = config.frame_mode == "midpoint" ? FramePolicy::Mode::Midpoint
                                                : FramePolicy::Mode::RandomInUtterance;
  policy.seed = config.frame_seed;
  json jframes;
  jframes["conversation_id"] = record.conversation.id;
  jframes["mode"] = config.frame_mode;
  jframes["seed"] = config.frame_seed;
  jframes["times"] = json::array();
  for (const Utterance& u : record.conversation.utterances)
    jframes["times"].push_back(
        {{"ordinal", u.ordinal},
         {"time_s", sample_frame_time(u, policy, record.conversation.id)}});
  write_file_atomic(fs::path(config.output_dir) / "frame_times.json",
                    jframes.dump() + "\n");

  if (!args.boundaries_path.empty()) {
    if (args.media_path.empty())
      throw config_error("clip manifest needs --media along with --boundaries");
    json jb = parse_json_file(args.boundaries_path);
    if (!jb.is_array())
      throw input_error("boundaries '" + args.boundaries_path + "' must be a JSON array");
    std::vector<SceneBoundary> boundaries;
    for (const json& je : jb) {
      SceneBoundary b;
      b.season = je.at("season").get<int>();
      b.episode = je.at("episode").get<int>();
      b.scene_tag = je.at("scene_tag").get<std::string>();
      b.start_s = je.at("start_s").get<double>();
      b.end_s = je.at("end_s").get<double>();
      boundaries.push_back(std::move(b));
    }
    auto jobs = clip_manifest(args.media_path, boundaries,
                              (fs::path(config.output_dir) / "clips").string());
    json jjobs = json::array();
    for (const ClipJob& job : jobs)
      jjobs.push_back({{"input_path", job.input_path},
                       {"start_s", job.start_s},
                       {"end_s", job.end_s},
                       {"output_path", job.output_path}});
    write_file_atomic(fs::path(config.output_dir) / "clip_manifest.json",
                      jjobs.dump() + "\n");
    out << "clip manifest: " << jobs.size() << " jobs\n";
  }

  std::vector<ConversationRecord> records{std::move(record)};
  write_dataset((fs::path(config.output_dir) / "preprocessed.jsonl").string(), records);
  out << "wrote " << records.front().conversation.utterances.size()
      << " utterances for '" << args.conversation_id << "'\n";
  return 0;
}

int cmd_describe(const RunConfig& config, std::ostream& out) {
  config.check();
  IoWarnings io_warnings;
  auto records = read_dataset(config.dataset, IoOptions{config.strict}, io_warnings);
  if (records.empty()) {
    out << "empty dataset\n";
    return 1;
  }
  GatewaySet gateways = build_gateways(config);
  if (!gateways.vision.gateway || !gateways.chat.gateway)
    throw config_error("describe needs vision and chat backends");

  DescribeOptions options;
  options.word_limit = config.word_limit;
  options.failure_ceiling = config.failure_ceiling;

  DescribeWarnings warnings;
  std::vector<std::string> failures;
  for (ConversationRecord& record : records) {
    Conversation working = record.conversation;
    try {
      describe_conversation(working, options, gateways.vision, gateways.chat, warnings);
      record.conversation = std::move(working);
    } catch (const Error& e) {
      failures.push_back(record.conversation.id + ": " + e.what());
    }
  }
  for (const std::string& w : warnings.messages) out << "warning: " << w << '\n';

  fs::create_directories(config.output_dir);
  write_dataset((fs::path(config.output_dir) / "described.jsonl").string(), records);
  out << "described " << (records.size() - failures.size()) << " of " << records.size()
      << " conversations\n";
  if (!failures.empty()) {
    std::sort(failures.begin(), failures.end());
    for (const std::string& f : failures) out << "failed: " << f << '\n';
    if (config.strict) return 1;
  }
  return 0;
}

namespace {

json artifact_to_json(const std::string& conversation_id, const DetectionOutput& output,
                      const RunConfig& config) {
  json j;
  j["conversation_id"] = conversation_id;
  json options;
  options["tracking"] = config.tracking;
  options["few_shot"] = config.few_shot;
  options["overflow"] = config.overflow;
  options["model_id"] = config.chat.model_id;
  if (config.max_predictions)
    options["max_predictions"] = *config.max_predictions;
  j["options"] = std::move(options);
  j["prompt_hash"] = output.prompt_hash;
  j["raw_reasoning"] = output.raw_reasoning;
  j["conclusion_raw"] = output.conclusion_raw;
  j["ordinals"] = output.ordinals;
  j["timestamps"] = output.timestamps;
  j["warnings"] = output.warnings;
  j["causes"] = output.causes;
  if (output.classification_vote)
    j["classification_vote"] = *output.classification_vote;
  return j;
}

PredictionRecord prediction_from_artifact(const fs::path& path) {
  json j = parse_json_file(path.string());
  PredictionRecord pred;
  pred.conversation_id = j.at("conversation_id").get<std::string>();
  pred.timestamps = j.at("timestamps").get<std::vector<double>>();
  pred.has_tp = !j.at("ordinals").get<std::vector<int>>().empty();
  return pred;
}

}  // namespace

int cmd_detect(const RunConfig& config, std::ostream& out) {
  config.check();
  IoWarnings io_warnings;
  const auto records = read_dataset(config.dataset, IoOptions{config.strict}, io_warnings);
  if (records.empty()) {
    out << "empty dataset\n";
    return 1;
  }
  GatewaySet gateways = build_gateways(config);
  if (!gateways.chat.gateway) throw config_error("detect needs a chat backend");

  const PromptBundle bundle = load_bundle(config);
  const DetectOptions options = detect_options(config);

  const fs::path artifacts_dir = fs::path(config.output_dir) / "artifacts";
  fs::create_directories(artifacts_dir);

  struct Failure {
    std::string id;
    std::string message;
  };
  std::mutex failures_mu;
  std::vector<Failure> failures;
  std::vector<std::optional<PredictionRecord>> preds(records.size());
  std::atomic<std::size_t> next{0};
  std::atomic<int> resumed{0};
  std::atomic<int> fresh{0};

  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= records.size()) return;
      const ConversationRecord& record = records[i];
      const std::string& id = record.conversation.id;
      const fs::path artifact_path = artifacts_dir / (sanitize_id(id) + ".json");
      try {
        if (fs::exists(artifact_path)) {
          preds[i] = prediction_from_artifact(artifact_path);
          resumed.fetch_add(1);
          continue;
        }
        ValidationReport report = validate_conversation(record.conversation);
        if (!report.ok())
          throw input_error("invalid conversation: " + report.violations.front().path +
                            ": " + report.violations.front().rule);
        DetectionOutput output =
            run_pipeline(record.conversation, gateways.chat, bundle, options);
        write_file_atomic(artifact_path,
                          artifact_to_json(id, output, config).dump() + "\n");
        PredictionRecord pred;
        pred.conversation_id = id;
        pred.has_tp = output.has_tp;
        pred.timestamps = output.timestamps;
        preds[i] = std::move(pred);
        fresh.fetch_add(1);
      } catch (const Error& e) {
        std::lock_guard lock(failures_mu);
        failures.push_back({id, e.what()});
      } catch (const std::exception& e) {
        std::lock_guard lock(failures_mu);
        failures.push_back({id, std::string("unexpected: ") + e.what()});
      }
    }
  };

  const int n_threads = std::min<int>(effective_parallelism(config),
                                      static_cast<int>(records.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }

  std::vector<PredictionRecord> submission;
  for (std::optional<PredictionRecord>& p : preds)
    if (p) submission.push_back(std::move(*p));
  write_submission((fs::path(config.output_dir) / "predictions.jsonl").string(),
                   submission);

  json meta;
  meta["dataset"] = config.dataset;
  meta["model_id"] = config.chat.model_id;
  meta["backend_kind"] = config.chat.kind;
  meta["tracking"] = config.tracking;
  meta["few_shot"] = config.few_shot;
  meta["match_mode"] = config.match_mode;
  if (config.reproducible) {
    meta["created_at"] = "1970-01-01T00:00:00Z";
  } else {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    meta["created_at"] = buf;
  }
  write_file_atomic(fs::path(config.output_dir) / "run_meta.json", meta.dump() + "\n");

  out << "detect: " << fresh.load() << " fresh, " << resumed.load() << " resumed, "
      << failures.size() << " failed (model calls: "
      << (gateways.chat.gateway ? gateways.chat.gateway->backend_calls() : 0) << ")\n";
  if (!failures.empty()) {
    std::sort(failures.begin(), failures.end(),
              [](const Failure& a, const Failure& b) { return a.id < b.id; });
    for (const Failure& f : failures) out << "failed: " << f.id << ": " << f.message << '\n';
    if (config.strict) return 1;
  }
  return 0;
}

int cmd_evaluate(const RunConfig& config, const EvaluateArgs& args, std::ostream& out) {
  config.check();
  IoWarnings io_warnings;
  auto records = read_dataset(config.dataset, IoOptions{config.strict}, io_warnings);
  if (records.empty()) {
    out << "empty dataset\n";
    return 1;
  }
  std::string predictions_path = args.predictions_path.empty()
                                     ? (fs::path(config.output_dir) / "predictions.jsonl").string()
                                     : args.predictions_path;
  IoWarnings sub_warnings;
  auto preds = read_submission(predictions_path, IoOptions{config.strict}, sub_warnings);
  for (const std::string& w : sub_warnings.messages) out << "warning: " << w << '\n';

  EvaluationResult result = evaluate_run(preds, records, config.delta_t,
                                         match_mode_of(config));

  json j;
  j["method"] = args.method_name;
  j["delta_t"] = config.delta_t;
  j["match_mode"] = config.match_mode;
  j["classification"] = classification_to_json(result.classification);
  j["detection"] = detection_to_json(result.detection);
  j["detection_macro"] = detection_to_json(result.detection_macro);
  j["diagnostics"] = json::array();
  for (const ConversationDiagnostic& d : result.diagnostics) {
    json jd;
    jd["conversation_id"] = d.conversation_id;
    jd["gt_has_tp"] = d.gt_has_tp;
    jd["pred_has_tp"] = d.pred_has_tp;
    jd["matched_gt"] = d.matched_gt;
    jd["unmatched_gt"] = d.unmatched_gt;
    jd["matched_pred"] = d.matched_pred;
    jd["unmatched_pred"] = d.unmatched_pred;
    j["diagnostics"].push_back(std::move(jd));
  }

  fs::create_directories(config.output_dir);
  write_file_atomic(fs::path(config.output_dir) / "metrics.json", j.dump() + "\n");

  MethodMetrics row;
  row.name = args.method_name;
  row.classification = result.classification;
  row.detection = result.detection;
  ReportDocument report = render_report(std::span(&row, 1));
  write_file_atomic(fs::path(config.output_dir) / "report.txt", report.text);
  write_file_atomic(fs::path(config.output_dir) / "report.csv", report.csv);
  out << report.text;
  return 0;
}

int cmd_report(const RunConfig& config, const std::vector<std::string>& metrics_files,
               std::ostream& out) {
  config.check(false);
  if (metrics_files.empty()) throw config_error("report needs at least one metrics file");
  std::vector<MethodMetrics> rows;
  for (const std::string& path : metrics_files) {
    json j = parse_json_file(path);
    MethodMetrics row;
    row.name = j.value("method", path);
    row.classification = classification_from_json(j.at("classification"));
    row.detection = detection_from_json(j.at("detection"));
    rows.push_back(std::move(row));
  }
  ReportDocument report = render_report(rows);
  fs::create_directories(config.output_dir);
  write_file_atomic(fs::path(config.output_dir) / "report.txt", report.text);
  write_file_atomic(fs::path(config.output_dir) / "report.csv", report.csv);
  out << report.text;
  return 0;
}

}  // namespace mtp
