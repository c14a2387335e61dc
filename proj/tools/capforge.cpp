// capforge: caption preference data generation and curriculum DPO tooling.

#include <CLI11.hpp>
#include <iostream>

#include "capforge/cli/commands.hpp"

using namespace capforge;

int main(int argc, char** argv) {
  CLI::App app{"capforge: generate agent caption trajectories, build preference data, train and export"};
  app.footer(exit_code_help());
  app.require_subcommand(1);

  GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "Run the caption/score/refine loop over a video manifest");
  generate->add_option("--config", gen.config, "Pipeline config (JSON)")->required();
  generate->add_option("--manifest", gen.manifest, "Video manifest (JSONL)")->required();
  generate->add_option("--out", gen.out_dir, "Run directory (trajectory store, audit log, ledger)")->required();
  generate->add_option("--lambda", gen.lambda, "Override run.lambda");
  generate->add_option("--t-max", gen.t_max, "Override run.t_max");
  generate->add_option("--parallelism", gen.parallelism, "Override run.parallelism");
  generate->add_option("--seed", gen.seed, "Override run.seed");
  generate->add_option("--endpoint", gen.endpoint, "Use a remote backend at this chat-completions URL");

  BuildOptions bld;
  auto* build = app.add_subcommand("build", "Filter trajectories and write preference tuples");
  build->add_option("--store", bld.store_dir, "Run directory holding trajectories.jsonl")->required();
  build->add_option("--out", bld.out_path, "Preference JSONL to write")->required();

  TrainToyOptions tt;
  auto* train_toy = app.add_subcommand("train-toy", "Train the toy policy with DPO under one or more orderings");
  train_toy->add_option("--dataset", tt.dataset, "Preference JSONL")->required();
  train_toy->add_option("--out", tt.out_dir, "Directory for traces and summary.json")->required();
  train_toy->add_option("--ordering", tt.orderings, "Comma-separated: curriculum, shuffled, anti")
      ->capture_default_str();
  train_toy->add_option("--config", tt.config, "Pipeline config whose \"train\" section sets the schedule");
  train_toy->add_option("--epochs", tt.epochs);
  train_toy->add_option("--batch-size", tt.batch_size);
  train_toy->add_option("--lr0", tt.lr0);
  train_toy->add_option("--warmup-frac", tt.warmup_frac);
  train_toy->add_option("--beta", tt.beta);
  train_toy->add_option("--seed", tt.seed);
  train_toy->add_option("--vocab", tt.toy.vocab)->capture_default_str();
  train_toy->add_option("--contexts", tt.toy.contexts)->capture_default_str();
  train_toy->add_option("--seq-len", tt.toy.seq_len)->capture_default_str();
  train_toy->add_option("--label-noise", tt.toy.label_noise)->capture_default_str();
  train_toy->add_option("--init-scale", tt.init_scale)->capture_default_str();

  ExportOptions ex;
  auto* exp = app.add_subcommand("export", "Write an ordered training manifest with checksums");
  exp->add_option("--dataset", ex.dataset, "Preference JSONL")->required();
  exp->add_option("--out", ex.out_path, "Manifest JSONL to write")->required();
  exp->add_option("--ordering", ex.ordering, "curriculum, shuffled or anti")->capture_default_str();
  exp->add_option("--batch-size", ex.batch_size)->capture_default_str();
  exp->add_option("--seed", ex.seed)->capture_default_str();
  exp->add_flag("!--no-reapply", ex.reapply_order_each_epoch, "Record that the order is not reapplied each epoch");

  std::filesystem::path stats_dataset;
  auto* stats = app.add_subcommand("stats", "Print dataset statistics and the gap histogram");
  stats->add_option("--dataset", stats_dataset, "Preference JSONL")->required();

  ValidateOptions val;
  auto* validate = app.add_subcommand("validate", "Check a manifest against its dataset, a dataset, or a store");
  validate->add_option("--manifest", val.manifest, "Training manifest");
  validate->add_option("--dataset", val.dataset, "Preference JSONL");
  validate->add_option("--store", val.store, "Run directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*generate) return cmd_generate(gen, std::cout, std::cerr);
  if (*build) return cmd_build(bld, std::cout, std::cerr);
  if (*train_toy) return cmd_train_toy(tt, std::cout, std::cerr);
  if (*exp) return cmd_export(ex, std::cout, std::cerr);
  if (*stats) return cmd_stats(stats_dataset, std::cout, std::cerr);
  if (*validate) return cmd_validate(val, std::cout, std::cerr);
  return kExitUsage;
}
