// Command-line front end. Subcommands:
//   validate | stats | consensus | preprocess | describe | detect | evaluate | report
// Exit codes: 0 ok, 1 validation/eval failure, 2 configuration error,
// 3 transport error.
#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mtp/commands.hpp"
#include "mtp/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"turning-point detection toolchain"};
  app.require_subcommand(1);

  std::string config_path;
  bool strict = false;
  bool reproducible = false;
  int parallelism = -1;
  app.add_option("--config", config_path, "run configuration file (JSON)");
  app.add_flag("--strict", strict, "treat warnings and per-item failures as fatal");
  app.add_flag("--reproducible", reproducible, "zero metadata timestamps");
  app.add_option("--parallelism", parallelism, "worker count (default: processors)");

  std::string dataset_override, output_override, judge_override;
  double delta_t_override = -1.0, delta_merge_override = -1.0;

  CLI::App* validate = app.add_subcommand("validate", "check dataset invariants");
  CLI::App* stats = app.add_subcommand("stats", "dataset statistics and histograms");
  CLI::App* consensus = app.add_subcommand("consensus", "merge annotator records");
  CLI::App* preprocess = app.add_subcommand("preprocess", "ingest ASR, attribute speakers");
  CLI::App* describe = app.add_subcommand("describe", "generate visual descriptions");
  CLI::App* detect = app.add_subcommand("detect", "run turning-point detection");
  CLI::App* evaluate = app.add_subcommand("evaluate", "score predictions");
  CLI::App* report = app.add_subcommand("report", "render a metrics table");

  for (CLI::App* sub : {validate, stats, consensus, preprocess, describe, detect,
                        evaluate, report}) {
    sub->add_option("--dataset", dataset_override, "dataset JSONL path");
    sub->add_option("--out", output_override, "output directory");
  }
  consensus->add_option("--judge", judge_override, "judge annotator id");
  consensus->add_option("--delta-merge", delta_merge_override,
                        "merge window in seconds");
  evaluate->add_option("--delta-t", delta_t_override, "match tolerance in seconds");

  mtp::PreprocessArgs pre_args;
  preprocess->add_option("--asr", pre_args.asr_path, "ASR alignment JSON")->required();
  preprocess->add_option("--script", pre_args.script_path,
                         "script lines JSON for speaker attribution");
  preprocess->add_option("--id", pre_args.conversation_id, "conversation id");
  preprocess->add_option("--scene-tag", pre_args.scene_tag, "scene tag");
  preprocess->add_option("--season", pre_args.season, "season number");
  preprocess->add_option("--episode", pre_args.episode, "episode number");
  preprocess->add_option("--duration", pre_args.duration_s, "conversation duration (s)");
  preprocess->add_option("--boundaries", pre_args.boundaries_path,
                         "scene boundaries JSON for the clip manifest");
  preprocess->add_option("--media", pre_args.media_path, "episode media path");

  mtp::EvaluateArgs eval_args;
  evaluate->add_option("--predictions", eval_args.predictions_path,
                       "submission JSONL (default {out}/predictions.jsonl)");
  evaluate->add_option("--method", eval_args.method_name, "method name for the report");

  std::vector<std::string> metrics_files;
  report->add_option("files", metrics_files, "metrics.json files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    mtp::RunConfig config;
    if (!config_path.empty()) config = mtp::RunConfig::from_file(config_path);
    if (!dataset_override.empty()) config.dataset = dataset_override;
    if (!output_override.empty()) config.output_dir = output_override;
    if (!judge_override.empty()) config.judge_id = judge_override;
    if (delta_t_override > 0.0) config.delta_t = delta_t_override;
    if (delta_merge_override >= 0.0) config.delta_merge = delta_merge_override;
    if (strict) config.strict = true;
    if (reproducible) config.reproducible = true;
    if (parallelism >= 0) config.parallelism = parallelism;

    if (validate->parsed()) return mtp::cmd_validate(config, std::cout);
    if (stats->parsed()) return mtp::cmd_stats(config, std::cout);
    if (consensus->parsed()) return mtp::cmd_consensus(config, std::cout);
    if (preprocess->parsed()) return mtp::cmd_preprocess(config, pre_args, std::cout);
    if (describe->parsed()) return mtp::cmd_describe(config, std::cout);
    if (detect->parsed()) return mtp::cmd_detect(config, std::cout);
    if (evaluate->parsed()) return mtp::cmd_evaluate(config, eval_args, std::cout);
    if (report->parsed()) return mtp::cmd_report(config, metrics_files, std::cout);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const mtp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case mtp::ErrorKind::Config: return 2;
      case mtp::ErrorKind::Transport: return 3;
      default: return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
