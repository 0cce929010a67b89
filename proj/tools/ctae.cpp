// Command-line driver: synth | train | grid | eval | ablate | replay.
// Every subcommand materializes one run directory (under --out, else
// $CTAE_OUT_ROOT, else runs/) and prints it on stdout.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "cli/commands.hpp"
#include "common/errors.hpp"
#include "common/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"coupled transformer autoencoder toolkit"};
  app.set_version_flag("--version", ctae::kProgramVersion);
  app.require_subcommand(1);

  ctae::SynthOptions synth;
  auto* cmd_synth = app.add_subcommand("synth", "generate a planted-latent dataset");
  cmd_synth->add_option("--config", synth.config_path, "synth.* key-value file")->required();
  cmd_synth->add_option("--seed", synth.seed, "override synth.seed");
  cmd_synth->add_option("--out", synth.out_root, "output root");

  ctae::TrainOptions train;
  auto* cmd_train = app.add_subcommand("train", "train a model on a data container");
  cmd_train->add_option("--config", train.config_path, "training key-value file")->required();
  cmd_train->add_option("--data", train.data_path, "data container")->required();
  cmd_train->add_option("--out", train.out_root, "output root");
  cmd_train->add_option("--seed", train.seed, "override train.seed");
  cmd_train->add_option("--epochs-override", train.epochs_override,
                        "replace train.epochs; 0 writes the initial checkpoint only");
  cmd_train->add_option("--regions", train.regions, "assert the container's region count");

  ctae::GridOptions grid;
  auto* cmd_grid = app.add_subcommand("grid", "hyperparameter grid search");
  cmd_grid->add_option("--config", grid.config_path, "training config plus grid.* axes")
      ->required();
  cmd_grid->add_option("--data", grid.data_path, "data container")->required();
  cmd_grid->add_option("--out", grid.out_root, "output root");
  cmd_grid->add_option("--seed", grid.seed, "override train.seed");
  cmd_grid->add_option("--jobs", grid.jobs, "parallel cell workers");

  ctae::EvalOptions eval;
  auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint");
  cmd_eval->add_option("--checkpoint", eval.checkpoint_path, "trained checkpoint")->required();
  cmd_eval->add_option("--data", eval.data_path, "data container")->required();
  cmd_eval->add_option("--truth", eval.truth_path, "ground-truth file for the recovery task");
  cmd_eval->add_option("--config", eval.config_path, "eval.* key-value file");
  cmd_eval->add_option("--out", eval.out_root, "output root");
  cmd_eval->add_option("--subspace", eval.subspace, "shared | private-<k> | all");
  cmd_eval->add_option("--tasks", eval.tasks, "task list")->delimiter(',');
  cmd_eval->add_flag("--time-resolved", eval.time_resolved, "add the sliding-window curve");
  cmd_eval->add_option("--window", eval.window, "odd sliding-window width");

  ctae::AblateOptions ablate;
  auto* cmd_ablate = app.add_subcommand("ablate", "train and score the four loss variants");
  cmd_ablate->add_option("--config", ablate.config_path, "full-model training config")
      ->required();
  cmd_ablate->add_option("--data", ablate.data_path, "data container")->required();
  cmd_ablate->add_option("--out", ablate.out_root, "output root");
  cmd_ablate->add_option("--seed", ablate.seed, "override train.seed");
  cmd_ablate->add_option("--folds", ablate.folds, "decoding CV folds");

  std::string replay_manifest, replay_out;
  auto* cmd_replay = app.add_subcommand("replay", "re-execute a run from its manifest");
  cmd_replay->add_option("manifest", replay_manifest, "manifest.json of the original run")
      ->required();
  cmd_replay->add_option("--out", replay_out, "output root");

  CLI11_PARSE(app, argc, argv);

  try {
    std::string dir;
    if (cmd_synth->parsed()) dir = ctae::run_synth(synth);
    if (cmd_train->parsed()) dir = ctae::run_train(train);
    if (cmd_grid->parsed()) dir = ctae::run_grid(grid);
    if (cmd_eval->parsed()) dir = ctae::run_eval(eval);
    if (cmd_ablate->parsed()) dir = ctae::run_ablate(ablate);
    if (cmd_replay->parsed()) dir = ctae::run_replay(replay_manifest, replay_out);
    std::printf("%s\n", dir.c_str());
    return 0;
  } catch (const ctae::Error& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return static_cast<int>(err.kind());
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return static_cast<int>(ctae::ErrorKind::internal);
  }
}
