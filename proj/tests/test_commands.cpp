#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "mtp/commands.hpp"
#include "mtp/dataset_io.hpp"
#include "mtp/error.hpp"
#include "support/helpers.hpp"

using namespace mtp;
using nlohmann::json;
using testsupport::catch_error;
using testsupport::contains;
using testsupport::fixture_path;
using testsupport::read_text;
using testsupport::run_cli;
using testsupport::TempDir;
using testsupport::write_text;

namespace fs = std::filesystem;

namespace {

RunConfig scripted_config(const TempDir& dir, const std::string& rules_fixture) {
  RunConfig config;
  config.dataset = fixture_path("dataset_small.jsonl");
  config.output_dir = dir.file("out");
  config.chat.kind = "mock";
  config.chat.mock_fixture = fixture_path(rules_fixture);
  config.chat.model_id = "scripted";
  config.reproducible = true;
  config.parallelism = 2;
  return config;
}

json scripted_config_json(const std::string& dataset, const std::string& out_dir) {
  json j;
  j["dataset"] = dataset;
  j["output_dir"] = out_dir;
  j["backends"] = {{"chat",
                    {{"kind", "mock"},
                     {"mock_fixture", fixture_path("mock_rules.json")},
                     {"model_id", "scripted"}}}};
  j["options"] = {{"reproducible", true}, {"parallelism", 2}};
  return j;
}

std::size_t line_count(const std::string& path) {
  std::string text = read_text(path);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

std::size_t dir_file_count(const std::string& path) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(path)) {
    (void)e;
    ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("run configuration files load every section") {
  TempDir dir;
  std::string path = dir.file("run.json");
  json j;
  j["dataset"] = "data.jsonl";
  j["output_dir"] = "results";
  j["cache_dir"] = "cache";
  j["judge_id"] = "judge";
  j["backends"] = {
      {"chat", {{"kind", "mock"}, {"mock_fixture", "rules.json"}, {"model_id", "m"}}},
      {"embedding",
       {{"kind", "http"}, {"base_url", "http://x"}, {"credential_env", "TOK"}}}};
  j["options"] = {{"tracking", false},       {"few_shot", true},
                  {"delta_t", 30.0},         {"delta_merge", 2.5},
                  {"sim_threshold", 0.9},    {"frame_mode", "midpoint"},
                  {"frame_seed", 7},         {"strict", true},
                  {"reproducible", true},    {"parallelism", 3},
                  {"match_mode", "greedy"},  {"word_limit", 40},
                  {"failure_ceiling", 0.25}, {"overflow", "strict"},
                  {"max_predictions", 5},    {"classification_vote", true}};
  write_text(path, j.dump());

  RunConfig config = RunConfig::from_file(path);
  CHECK(config.dataset == "data.jsonl");
  CHECK(config.output_dir == "results");
  CHECK(config.cache_dir == "cache");
  CHECK(config.judge_id == "judge");
  CHECK(config.chat.kind == "mock");
  CHECK(config.chat.mock_fixture == "rules.json");
  CHECK(config.embedding.kind == "http");
  CHECK(config.embedding.base_url == "http://x");
  CHECK(config.embedding.credential_env == "TOK");
  CHECK(config.vision.kind == "");
  CHECK_FALSE(config.tracking);
  CHECK(config.few_shot);
  CHECK(config.delta_t == 30.0);
  CHECK(config.delta_merge == 2.5);
  CHECK(config.sim_threshold == 0.9);
  CHECK(config.frame_mode == "midpoint");
  CHECK(config.frame_seed == 7);
  CHECK(config.strict);
  CHECK(config.reproducible);
  CHECK(config.parallelism == 3);
  CHECK(config.match_mode == "greedy");
  CHECK(config.word_limit == 40);
  CHECK(config.failure_ceiling == 0.25);
  CHECK(config.overflow == "strict");
  CHECK(config.max_predictions == 5);
  CHECK(config.classification_vote);
}

TEST_CASE("unknown configuration keys are rejected at every level") {
  TempDir dir;
  std::string path = dir.file("run.json");

  SUBCASE("top level") {
    write_text(path, R"({"dataset": "d", "bogus": 1})");
    auto err = catch_error([&] { RunConfig::from_file(path); });
    REQUIRE(err.has_value());
    CHECK(err->kind() == ErrorKind::Config);
    CHECK(contains(err->what(), "unknown key 'bogus'"));
  }
  SUBCASE("backends") {
    write_text(path, R"({"backends": {"voice": {}}})");
    auto err = catch_error([&] { RunConfig::from_file(path); });
    REQUIRE(err.has_value());
    CHECK(contains(err->what(), "backends: unknown key 'voice'"));
  }
  SUBCASE("backend fields") {
    write_text(path, R"({"backends": {"chat": {"kind": "mock", "port": 1}}})");
    auto err = catch_error([&] { RunConfig::from_file(path); });
    REQUIRE(err.has_value());
    CHECK(contains(err->what(), "backends.chat: unknown key 'port'"));
  }
  SUBCASE("options") {
    write_text(path, R"({"options": {"delta_q": 1}})");
    auto err = catch_error([&] { RunConfig::from_file(path); });
    REQUIRE(err.has_value());
    CHECK(contains(err->what(), "options: unknown key 'delta_q'"));
  }
  SUBCASE("not an object") {
    write_text(path, "[1, 2]");
    CHECK(catch_error([&] { RunConfig::from_file(path); }).has_value());
  }
}

TEST_CASE("configuration checks cover ranges and referenced files") {
  RunConfig config;
  config.dataset = fixture_path("dataset_small.jsonl");
  CHECK_FALSE(catch_error([&] { config.check(); }).has_value());

  auto expect_config_error = [](RunConfig broken, const std::string& needle) {
    auto err = catch_error([&] { broken.check(); });
    REQUIRE(err.has_value());
    CHECK(err->kind() == ErrorKind::Config);
    CHECK(contains(err->what(), needle));
  };

  SUBCASE("dataset") {
    RunConfig c;
    expect_config_error(c, "no dataset configured");
    c.dataset = "/no/such/file.jsonl";
    expect_config_error(c, "does not exist");
    c.check(false);  // commands without a dataset skip the check
  }
  SUBCASE("numeric ranges") {
    RunConfig c = config;
    c.delta_t = 0.0;
    expect_config_error(c, "delta_t must be positive");
    c = config;
    c.delta_merge = -1.0;
    expect_config_error(c, "delta_merge");
    c = config;
    c.sim_threshold = 1.5;
    expect_config_error(c, "sim_threshold must be in (0, 1]");
    c = config;
    c.word_limit = 5;
    expect_config_error(c, "word_limit");
    c = config;
    c.failure_ceiling = 1.5;
    expect_config_error(c, "failure_ceiling");
    c = config;
    c.parallelism = -1;
    expect_config_error(c, "parallelism");
    c = config;
    c.max_predictions = 0;
    expect_config_error(c, "max_predictions");
  }
  SUBCASE("enumerations") {
    RunConfig c = config;
    c.frame_mode = "sideways";
    expect_config_error(c, "frame_mode");
    c = config;
    c.match_mode = "fuzzy";
    expect_config_error(c, "match_mode");
    c = config;
    c.overflow = "explode";
    expect_config_error(c, "overflow");
  }
  SUBCASE("backend references") {
    RunConfig c = config;
    c.chat.kind = "mock";
    c.chat.mock_fixture = "/no/such/rules.json";
    expect_config_error(c, "mock fixture");
    c = config;
    c.vision.kind = "http";
    expect_config_error(c, "needs a base_url");
  }
  SUBCASE("prompt files") {
    RunConfig c = config;
    c.prompt_bundle = "/no/such/bundle.json";
    expect_config_error(c, "prompt bundle");
    c = config;
    c.few_shot_files = {"/no/such/example.json"};
    expect_config_error(c, "few-shot file");
  }
}

TEST_CASE("validate prints a verdict per dataset") {
  SUBCASE("clean dataset") {
    RunConfig config;
    config.dataset = fixture_path("dataset_small.jsonl");
    std::ostringstream out;
    CHECK(cmd_validate(config, out) == 0);
    CHECK(contains(out.str(), "ok: 12 records valid"));
  }
  SUBCASE("violations are listed and fail the run") {
    TempDir dir;
    std::string path = dir.file("broken.jsonl");
    write_text(path,
               R"({"id":"b01","scene_tag":"t","season":1,"episode":1,"duration_s":40.0,)"
               R"("utterances":[{"ordinal":1,"transcript":"hi","speaker":"A",)"
               R"("start_s":0.0,"end_s":50.0}],"annotations":[]})"
               "\n");
    RunConfig config;
    config.dataset = path;
    std::ostringstream out;
    CHECK(cmd_validate(config, out) == 1);
    CHECK(contains(out.str(), "b01"));
    CHECK(contains(out.str(), "end_exceeds_duration"));
    CHECK(contains(out.str(), "1 violation in 1 records"));
  }
}

TEST_CASE("stats reports the corpus numbers on stdout and disk") {
  TempDir dir;
  RunConfig config;
  config.dataset = fixture_path("stats_pair.jsonl");
  config.output_dir = dir.file("out");
  std::ostringstream out;
  REQUIRE(cmd_stats(config, out) == 0);
  CHECK(contains(out.str(), "conversations:"));
  CHECK(contains(out.str(), "Happy: 1"));

  json j = json::parse(read_text(config.output_dir + "/stats.json"));
  CHECK(j["n_conversations"] == 2);
  CHECK(j["n_tp_conversations"] == 1);
  CHECK(j["n_utterances"] == 3);
  CHECK(j["n_words"] == 6);
  CHECK(j["total_duration_h"].get<double>() == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(j["avg_transcript_len"].get<double>() == doctest::Approx(3.0));
  CHECK(j["max_transcript_len"].get<double>() == 4.0);
  CHECK(j["avg_conversation_len_s"].get<double>() == doctest::Approx(90.0));
  CHECK(j["max_conversation_len_s"].get<double>() == 120.0);
  CHECK(j["emotion_histogram"]["pre"]["Happy"] == 1);
  CHECK(j["emotion_histogram"]["post"]["Sad"] == 1);
  CHECK(j["emotion_histogram"]["post"]["Angry"] == 1);
}

TEST_CASE("consensus merges a compliant dataset") {
  TempDir dir;
  std::string dataset = dir.file("annotated.jsonl");
  write_text(
      dataset,
      R"({"id":"k01","scene_tag":"t1","season":1,"episode":1,"duration_s":60.0,)"
      R"("utterances":[{"ordinal":1,"transcript":"hello there","speaker":"A",)"
      R"("start_s":0.0,"end_s":5.0}],"annotations":[)"
      R"({"annotator_id":"a1","turning_points":[{"location_s":10.0,"cause":"lamp broke"}]},)"
      R"({"annotator_id":"a2","turning_points":[{"location_s":10.5,"cause":"lamp shattered"}]},)"
      R"({"annotator_id":"judge","turning_points":[{"location_s":11.0,"cause":"lamp broke"}]}]})"
      "\n"
      R"({"id":"k02","scene_tag":"t2","season":1,"episode":2,"duration_s":60.0,)"
      R"("utterances":[{"ordinal":1,"transcript":"more words","speaker":"B",)"
      R"("start_s":0.0,"end_s":5.0}],"annotations":[)"
      R"({"annotator_id":"a1","turning_points":[{"location_s":0.0,"cause":"x happened"}]},)"
      R"({"annotator_id":"a2","turning_points":[{"location_s":30.0,"cause":"y happened"}]},)"
      R"({"annotator_id":"judge","turning_points":[{"location_s":55.0,"cause":"z happened"}]}]})"
      "\n");

  RunConfig config;
  config.dataset = dataset;
  config.output_dir = dir.file("out");
  config.judge_id = "judge";
  std::ostringstream out;
  REQUIRE(cmd_consensus(config, out) == 0);
  CHECK(contains(out.str(), "merged 2 conversations, 1 flagged for deletion"));
  CHECK(contains(out.str(), "k02: flagged for deletion"));

  IoWarnings warnings;
  auto merged = read_dataset(config.output_dir + "/consensus.jsonl", IoOptions{}, warnings);
  REQUIRE(merged.size() == 2);
  REQUIRE(merged[0].consensus.has_value());
  REQUIRE(merged[0].consensus->turning_points.size() == 1);
  // the judge endorses but only annotator locations enter the mean
  CHECK(merged[0].consensus->turning_points[0].location_s == doctest::Approx(10.25));
  CHECK(merged[0].consensus->turning_points[0].cause == "lamp broke; lamp shattered");
  REQUIRE(merged[1].consensus.has_value());
  CHECK(merged[1].consensus->turning_points.empty());

  json log = json::parse(read_text(config.output_dir + "/consensus_log.json"));
  CHECK(log["judge_id"] == "judge");
  CHECK(log["delta_merge"] == 5.0);
  REQUIRE(log["conversations"].size() == 2);
  CHECK(log["conversations"][0]["conversation_id"] == "k01");
  CHECK(log["conversations"][0]["flag_delete"] == false);
  CHECK(log["conversations"][0]["kept"] == 1);
  CHECK(log["conversations"][1]["flag_delete"] == true);
  CHECK(log["conversations"][1]["decisions"].size() == 3);
}

TEST_CASE("consensus needs a judge and complete annotations") {
  RunConfig config;
  config.dataset = fixture_path("dataset_small.jsonl");

  SUBCASE("missing judge id") {
    std::ostringstream out;
    auto err = catch_error([&] { cmd_consensus(config, out); });
    REQUIRE(err.has_value());
    CHECK(err->kind() == ErrorKind::Config);
    CHECK(contains(err->what(), "judge_id"));
  }
  SUBCASE("records without enough annotations fail, nothing is written") {
    TempDir dir;
    config.output_dir = dir.file("out");
    config.judge_id = "judge";
    std::ostringstream out;
    CHECK(cmd_consensus(config, out) == 1);
    // only c01 carries a full annotator set in the fixture
    CHECK(contains(out.str(), "11 conversations failed consensus"));
    CHECK_FALSE(fs::exists(config.output_dir + "/consensus.jsonl"));
  }
}

TEST_CASE("detect runs the scripted pipeline end to end") {
  TempDir dir;
  RunConfig config = scripted_config(dir, "mock_rules.json");

  std::ostringstream first;
  REQUIRE(cmd_detect(config, first) == 0);
  CHECK(contains(first.str(), "detect: 12 fresh, 0 resumed, 0 failed"));
  CHECK(contains(first.str(), "(model calls: 24)"));  // reason + conclude per conversation

  CHECK(dir_file_count(config.output_dir + "/artifacts") == 12);
  CHECK(line_count(config.output_dir + "/predictions.jsonl") == 12);

  json meta = json::parse(read_text(config.output_dir + "/run_meta.json"));
  CHECK(meta["created_at"] == "1970-01-01T00:00:00Z");
  CHECK(meta["model_id"] == "scripted");
  CHECK(meta["backend_kind"] == "mock");
  CHECK(meta["tracking"] == true);

  json c01 = json::parse(read_text(config.output_dir + "/artifacts/c01.json"));
  CHECK(c01["conversation_id"] == "c01");
  CHECK(c01["ordinals"] == json::array({2}));
  CHECK(c01["timestamps"] == json::array({10.0}));
  CHECK(c01["prompt_hash"].get<std::string>().size() == 64);
  CHECK(contains(c01["conclusion_raw"].get<std::string>(), "[utterance_2]"));

  json c05 = json::parse(read_text(config.output_dir + "/artifacts/c05.json"));
  CHECK(c05["ordinals"].empty());

  // a second run consumes the artifacts instead of the model
  std::ostringstream second;
  REQUIRE(cmd_detect(config, second) == 0);
  CHECK(contains(second.str(), "detect: 0 fresh, 12 resumed, 0 failed"));
  CHECK(contains(second.str(), "(model calls: 0)"));
  CHECK(line_count(config.output_dir + "/predictions.jsonl") == 12);

  SUBCASE("no chat backend is a configuration error") {
    RunConfig bare;
    bare.dataset = config.dataset;
    bare.output_dir = dir.file("out2");
    std::ostringstream out;
    auto err = catch_error([&] { cmd_detect(bare, out); });
    REQUIRE(err.has_value());
    CHECK(contains(err->what(), "detect needs a chat backend"));
  }
}

TEST_CASE("detect reports scripted failures and strict mode fails the run") {
  TempDir dir;
  RunConfig config = scripted_config(dir, "mock_rules_failure.json");

  SUBCASE("lenient keeps going") {
    std::ostringstream out;
    CHECK(cmd_detect(config, out) == 0);
    CHECK(contains(out.str(), "detect: 11 fresh, 0 resumed, 1 failed"));
    CHECK(contains(out.str(), "failed: c08:"));
    CHECK(dir_file_count(config.output_dir + "/artifacts") == 11);
    CHECK_FALSE(fs::exists(config.output_dir + "/artifacts/c08.json"));
    CHECK(line_count(config.output_dir + "/predictions.jsonl") == 11);
  }
  SUBCASE("strict turns failures into a nonzero exit") {
    config.strict = true;
    std::ostringstream out;
    CHECK(cmd_detect(config, out) == 1);
    CHECK(contains(out.str(), "failed: c08:"));
  }
}

TEST_CASE("evaluate freezes the scripted run's metrics") {
  TempDir dir;
  RunConfig config = scripted_config(dir, "mock_rules.json");
  std::ostringstream detect_out;
  REQUIRE(cmd_detect(config, detect_out) == 0);

  std::ostringstream out;
  REQUIRE(cmd_evaluate(config, EvaluateArgs{}, out) == 0);
  CHECK(contains(out.str(), "run"));
  CHECK(contains(out.str(), "cls_auc"));

  json j = json::parse(read_text(config.output_dir + "/metrics.json"));
  CHECK(j["method"] == "run");
  CHECK(j["delta_t"] == 20.0);
  CHECK(j["match_mode"] == "exists");

  const json& cls = j["classification"];
  CHECK(cls["precision"].get<double>() == doctest::Approx(0.875).epsilon(1e-12));
  CHECK(cls["recall"].get<double>() == doctest::Approx(0.875).epsilon(1e-12));
  CHECK(cls["f1"].get<double>() == doctest::Approx(0.875).epsilon(1e-12));
  CHECK(cls["auc"].get<double>() == doctest::Approx(0.8125).epsilon(1e-12));
  CHECK(cls["confusion"]["tp"] == 7);
  CHECK(cls["confusion"]["fp"] == 1);
  CHECK(cls["confusion"]["fn"] == 1);
  CHECK(cls["confusion"]["tn"] == 3);

  const json& det = j["detection"];
  CHECK(det["counts"]["matched_gt"] == 6);
  CHECK(det["counts"]["total_gt"] == 9);
  CHECK(det["counts"]["matched_pred"] == 8);
  CHECK(det["counts"]["total_pred"] == 10);
  CHECK(det["precision"].get<double>() == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(det["recall"].get<double>() == doctest::Approx(6.0 / 9.0).epsilon(1e-12));
  CHECK(det["f1"].get<double>() == doctest::Approx(8.0 / 11.0).epsilon(1e-12));

  CHECK(j["diagnostics"].size() == 12);
  CHECK(j.contains("detection_macro"));

  CHECK(fs::exists(config.output_dir + "/report.txt"));
  CHECK(fs::exists(config.output_dir + "/report.csv"));
  CHECK(contains(read_text(config.output_dir + "/report.csv"),
                 "method,cls_precision,cls_recall,cls_f1,cls_auc"));
}

TEST_CASE("report combines metrics files into one table") {
  TempDir dir;
  auto write_metrics = [&](const std::string& name, double p) {
    json j;
    j["method"] = name;
    j["classification"] = {
        {"precision", p}, {"recall", 0.5}, {"f1", 0.5}, {"auc", 0.5}};
    j["detection"] = {{"precision", p}, {"recall", 0.25}, {"f1", 0.3}};
    std::string path = dir.file(name + ".json");
    write_text(path, j.dump());
    return path;
  };
  std::string m1 = write_metrics("alpha", 0.75);
  std::string m2 = write_metrics("beta", 0.5);

  RunConfig config;
  config.output_dir = dir.file("out");
  std::ostringstream out;
  REQUIRE(cmd_report(config, {m1, m2}, out) == 0);
  CHECK(contains(out.str(), "alpha"));
  CHECK(contains(out.str(), "beta"));
  CHECK(contains(read_text(config.output_dir + "/report.txt"), "alpha"));
  CHECK(contains(read_text(config.output_dir + "/report.csv"), "beta,0.50"));

  auto err = catch_error([&] { cmd_report(config, {}, out); });
  REQUIRE(err.has_value());
  CHECK(contains(err->what(), "at least one metrics file"));
}

TEST_CASE("preprocess ingests, attributes, samples frames, and plans clips") {
  TempDir dir;
  RunConfig config;
  config.output_dir = dir.file("out");
  config.frame_mode = "midpoint";
  config.embedding.kind = "mock";
  config.embedding.mock_fixture = fixture_path("mock_embed.json");
  config.chat.kind = "mock";
  config.chat.mock_fixture = fixture_path("mock_embed.json");

  std::string boundaries = dir.file("boundaries.json");
  write_text(boundaries,
             R"([{"season":1,"episode":2,"scene_tag":"balcony","start_s":0.0,"end_s":20.0}])");

  PreprocessArgs args;
  args.asr_path = fixture_path("asr_sample.json");
  args.script_path = fixture_path("script_sample.json");
  args.conversation_id = "p01";
  args.scene_tag = "s";
  args.season = 1;
  args.episode = 2;
  args.boundaries_path = boundaries;
  args.media_path = "ep.mkv";

  std::ostringstream out;
  REQUIRE(cmd_preprocess(config, args, out) == 0);
  CHECK(contains(out.str(), "attributed speakers for 3 utterances, 0 left UNKNOWN"));
  CHECK(contains(out.str(), "clip manifest: 1 jobs"));
  CHECK(contains(out.str(), "wrote 3 utterances for 'p01'"));

  IoWarnings warnings;
  auto records =
      read_dataset(config.output_dir + "/preprocessed.jsonl", IoOptions{}, warnings);
  REQUIRE(records.size() == 1);
  const Conversation& conv = records[0].conversation;
  CHECK(conv.id == "p01");
  CHECK(conv.season == 1);
  CHECK(conv.episode == 2);
  CHECK(conv.duration_s == 14.0);  // last utterance end
  REQUIRE(conv.utterances.size() == 3);
  CHECK(conv.utterances[0].speaker == "Penny");
  CHECK(conv.utterances[1].speaker == "Leonard");
  CHECK(conv.utterances[2].speaker == "Penny");

  json report = json::parse(read_text(config.output_dir + "/attribution_report.json"));
  REQUIRE(report["rows"].size() == 3);
  for (const json& row : report["rows"]) {
    CHECK(row["decision"] == "assigned");
    CHECK(row["similarity"].get<double>() == doctest::Approx(1.0));
  }

  json frames = json::parse(read_text(config.output_dir + "/frame_times.json"));
  CHECK(frames["mode"] == "midpoint");
  REQUIRE(frames["times"].size() == 3);
  CHECK(frames["times"][0]["time_s"].get<double>() == doctest::Approx(2.25));
  CHECK(frames["times"][1]["time_s"].get<double>() == doctest::Approx(7.0));
  CHECK(frames["times"][2]["time_s"].get<double>() == doctest::Approx(12.0));

  json clips = json::parse(read_text(config.output_dir + "/clip_manifest.json"));
  REQUIRE(clips.size() == 1);
  CHECK(clips[0]["input_path"] == "ep.mkv");
  CHECK(contains(clips[0]["output_path"].get<std::string>(), "s01e02_balcony.mp4"));

  SUBCASE("asr input is required") {
    std::ostringstream sink;
    auto err = catch_error([&] { cmd_preprocess(config, PreprocessArgs{}, sink); });
    REQUIRE(err.has_value());
    CHECK(contains(err->what(), "--asr"));
  }
}

TEST_CASE("describe fills visuals through the scripted models") {
  TempDir dir;
  std::string frame1 = dir.file("f1.jpg");
  std::string frame2 = dir.file("f2.jpg");
  write_text(frame1, "fakejpegdata");
  write_text(frame2, "fakejpegdata");

  json record;
  record["id"] = "v01";
  record["scene_tag"] = "t";
  record["season"] = 1;
  record["episode"] = 1;
  record["duration_s"] = 20.0;
  record["utterances"] = json::array(
      {{{"ordinal", 1},
        {"transcript", "hi"},
        {"speaker", "A"},
        {"start_s", 0.0},
        {"end_s", 5.0},
        {"frame_ref", frame1}},
       {{"ordinal", 2},
        {"transcript", "hello"},
        {"speaker", "B"},
        {"start_s", 6.0},
        {"end_s", 10.0},
        {"frame_ref", frame2}}});
  record["annotations"] = json::array();
  std::string dataset = dir.file("frames.jsonl");
  write_text(dataset, record.dump() + "\n");

  std::string rules = dir.file("vision_rules.json");
  write_text(rules, R"({"rules":[)"
                    R"({"match":"Give me the short descriptions",)"
                    R"("response":"A long description of the scene."},)"
                    R"({"match":"Summarize the following scene description",)"
                    R"("response":"Short visual summary."}]})");

  RunConfig config;
  config.dataset = dataset;
  config.output_dir = dir.file("out");
  config.vision.kind = "mock";
  config.vision.mock_fixture = rules;
  config.chat.kind = "mock";
  config.chat.mock_fixture = rules;

  std::ostringstream out;
  REQUIRE(cmd_describe(config, out) == 0);
  CHECK(contains(out.str(), "described 1 of 1 conversations"));

  IoWarnings warnings;
  auto described =
      read_dataset(config.output_dir + "/described.jsonl", IoOptions{}, warnings);
  REQUIRE(described.size() == 1);
  for (const Utterance& u : described[0].conversation.utterances) {
    REQUIRE(u.visual_description.has_value());
    CHECK(*u.visual_description == "Short visual summary.");
  }

  SUBCASE("conversations without frames fail their ceiling") {
    config.dataset = fixture_path("dataset_small.jsonl");
    config.output_dir = dir.file("out2");
    std::ostringstream lenient;
    CHECK(cmd_describe(config, lenient) == 0);
    CHECK(contains(lenient.str(), "described 0 of 12 conversations"));
    CHECK(contains(lenient.str(), "failed: c01:"));

    config.strict = true;
    std::ostringstream strict;
    CHECK(cmd_describe(config, strict) == 1);
  }
}

TEST_CASE("the command line binary maps outcomes to exit codes") {
  SUBCASE("validate") {
    auto r = run_cli("validate --dataset " + fixture_path("dataset_small.jsonl"));
    CHECK(r.exit_code == 0);
    CHECK(contains(r.output, "ok: 12 records valid"));
  }
  SUBCASE("help") {
    auto r = run_cli("--help");
    CHECK(r.exit_code == 0);
    CHECK(contains(r.output, "turning-point detection toolchain"));
  }
  SUBCASE("missing subcommand") {
    CHECK(run_cli("").exit_code == 2);
  }
  SUBCASE("configuration errors exit 2") {
    TempDir dir;
    std::string path = dir.file("bad.json");
    write_text(path, R"({"bogus": 1})");
    auto r = run_cli("--config " + path + " validate");
    CHECK(r.exit_code == 2);
    CHECK(contains(r.output, "unknown key 'bogus'"));

    auto judgeless =
        run_cli("consensus --dataset " + fixture_path("dataset_small.jsonl"));
    CHECK(judgeless.exit_code == 2);
  }
  SUBCASE("io errors exit 1") {
    CHECK(run_cli("report /no/such/metrics.json").exit_code == 1);
  }
  SUBCASE("detect and evaluate flow through a config file") {
    TempDir dir;
    std::string config_path = dir.file("run.json");
    write_text(config_path, scripted_config_json(fixture_path("dataset_small.jsonl"),
                                                 dir.file("out"))
                                .dump());
    auto detect = run_cli("--config " + config_path + " detect");
    CHECK(detect.exit_code == 0);
    CHECK(contains(detect.output, "detect: 12 fresh, 0 resumed, 0 failed"));

    auto evaluate = run_cli("--config " + config_path + " evaluate --method scripted");
    CHECK(evaluate.exit_code == 0);
    CHECK(contains(evaluate.output, "scripted"));

    json metrics = json::parse(read_text(dir.file("out") + "/metrics.json"));
    CHECK(metrics["method"] == "scripted");
    CHECK(metrics["classification"]["confusion"]["tp"] == 7);
  }
}
