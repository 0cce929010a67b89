#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trainer/trainer.hpp"

namespace ctae {

// Hyperparameter grid. Cells are enumerated as nested loops in field order
// (layers outermost, warm-up innermost), which fixes the lexicographic config
// order used for tie-breaking.
struct GridSpec {
  std::vector<int64_t> layers = {1};
  std::vector<int64_t> latent_dims;  // total D; layout via default_latent_layout
  std::vector<double> lambda_shared = {1.0};
  std::vector<double> lambda_align = {0.5};
  std::vector<double> lambda_orth = {0.01};
  std::vector<double> learning_rates = {1e-4};
  std::vector<int64_t> warmups = {100};
  int64_t epochs_cap = 0;  // >0 caps epochs during the search

  void validate() const;
};

// Scalar grid dim -> latent layout: each region's private block gets
// floor(d / (R+1)), the shared block takes the remainder.
MembershipMask default_latent_layout(int64_t regions, int64_t d);

struct GridCellResult {
  TrainConfig config;
  std::string config_hash;
  int64_t cell_index = 0;  // enumeration order
  double val_total = std::numeric_limits<double>::infinity();
  bool diverged = false;
  std::string error;  // divergence diagnostic
  CheckpointRecord best;
  bool cached = false;  // satisfied from the cell cache
};

struct GridOutcome {
  // sorted: converged cells by (val_total, latent dim, cell_index), then
  // diverged cells by cell_index
  std::vector<GridCellResult> ranked;
};

// One train run per cell. Divergence (non-finite loss) flags the cell and the
// search continues; any other failure propagates. `cache_dir` (optional)
// persists per-cell results keyed by config hash so an interrupted search
// resumes without retraining completed cells. `jobs` > 1 trains cells on that
// many worker threads; results are identical to the sequential order.
GridOutcome grid_search(const TrainConfig& base, const GridSpec& grid,
                        const std::vector<RegionRecording>& data, int jobs = 1,
                        const std::string& cache_dir = "");

}  // namespace ctae
