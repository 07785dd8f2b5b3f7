#pragma once
// Operator-facing command implementations. The CLI binary maps flags onto
// RunConfig and dispatches here; everything prints through the given stream
// so tests can capture output. Return values are process exit codes: 0 ok,
// 1 validation/eval failure. Config (2), transport (3), and I/O errors are
// thrown and mapped at the CLI boundary.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mtp {

struct BackendConfig {
  std::string kind;  // "mock" | "http" | "" (unset)
  std::string base_url;
  std::string model_id;
  std::string credential_env;
  std::string mock_fixture;
};

struct RunConfig {
  std::string dataset;
  std::string output_dir = "out";
  std::string cache_dir;  // empty disables the response cache
  std::string judge_id;

  BackendConfig chat;
  BackendConfig vision;
  BackendConfig embedding;

  bool tracking = true;
  bool few_shot = false;
  double delta_t = 20.0;
  double delta_merge = 5.0;
  double sim_threshold = 0.75;
  std::string frame_mode = "random";  // random | midpoint
  std::uint64_t frame_seed = 0;
  bool strict = false;
  bool reproducible = false;  // zero all metadata timestamps
  int parallelism = 0;        // 0 = logical processor count
  std::string match_mode = "exists";  // exists | greedy
  int word_limit = 60;
  double failure_ceiling = 0.5;
  std::string overflow = "truncate";  // truncate | strict
  std::optional<int> max_predictions;
  bool classification_vote = false;
  std::string prompt_bundle;  // optional bundle file
  std::vector<std::string> few_shot_files;

  static RunConfig from_file(const std::string& path);
  // Throws a configuration error when paths are missing or options are
  // out of range; `need_dataset` skips the dataset check for commands
  // that do not read one.
  void check(bool need_dataset = true) const;
};

int cmd_validate(const RunConfig& config, std::ostream& out);
int cmd_stats(const RunConfig& config, std::ostream& out);
int cmd_consensus(const RunConfig& config, std::ostream& out);

struct PreprocessArgs {
  std::string asr_path;     // required
  std::string script_path;  // optional: enables speaker attribution
  std::string conversation_id = "conversation";
  std::string scene_tag = "scene";
  int season = 0;
  int episode = 0;
  double duration_s = -1.0;  // negative = last utterance end
  std::string boundaries_path;  // optional: emit a clip manifest
  std::string media_path;
};

int cmd_preprocess(const RunConfig& config, const PreprocessArgs& args, std::ostream& out);
int cmd_describe(const RunConfig& config, std::ostream& out);
int cmd_detect(const RunConfig& config, std::ostream& out);

struct EvaluateArgs {
  std::string predictions_path;  // default {output_dir}/predictions.jsonl
  std::string method_name = "run";
};

int cmd_evaluate(const RunConfig& config, const EvaluateArgs& args, std::ostream& out);
int cmd_report(const RunConfig& config, const std::vector<std::string>& metrics_files,
               std::ostream& out);

}  // namespace mtp
