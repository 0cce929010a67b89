#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cli/manifest.hpp"

namespace ctae {

// Every command materializes one run directory under the output root (or
// `out_root` when set), writes its artifacts plus exactly one manifest.json
// there, and returns the directory. Failures throw ctae::Error after a
// best-effort manifest write recording the exit status.
//
// Configs arrive either as a file path or as preloaded text (`config_text`,
// used by replay); the path wins when both are set.

struct SynthOptions {
  std::string config_path;
  std::string config_text;
  std::string out_root;
  int64_t seed = -1;  // >= 0 overrides synth.seed
};
std::string run_synth(const SynthOptions& opts);

struct TrainOptions {
  std::string config_path;
  std::string config_text;
  std::string data_path;
  std::string out_root;
  int64_t seed = -1;             // >= 0 overrides train.seed
  int64_t epochs_override = -1;  // 0: initial checkpoint only; > 0: replaces train.epochs
  int64_t regions = 0;           // > 0: assert the container has this many regions
};
std::string run_train(const TrainOptions& opts);

struct GridOptions {
  std::string config_path;  // train.* keys plus grid.* axes
  std::string config_text;
  std::string data_path;
  std::string out_root;
  int64_t seed = -1;
  int64_t jobs = 1;
};
std::string run_grid(const GridOptions& opts);

struct EvalOptions {
  std::string checkpoint_path;
  std::string data_path;
  std::string truth_path;   // enables the recovery task
  std::string config_path;  // optional eval.* keys
  std::string config_text;
  std::string out_root;
  std::string subspace;            // overrides eval.subspace (shared | private-<k> | all)
  std::vector<std::string> tasks;  // overrides eval.tasks
  bool time_resolved = false;      // appends the time_resolved task
  int64_t window = 0;              // > 0 overrides eval.window
};
std::string run_eval(const EvalOptions& opts);

struct AblateOptions {
  std::string config_path;  // train.* keys for the full model
  std::string config_text;
  std::string data_path;
  std::string out_root;
  int64_t seed = -1;
  int64_t folds = 5;
};
std::string run_ablate(const AblateOptions& opts);

// Re-executes the run a manifest describes, into a fresh run directory.
// Artifacts are byte-identical to the original's on the same platform.
std::string run_replay(const std::string& manifest_path, const std::string& out_root = "");

}  // namespace ctae
