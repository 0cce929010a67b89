#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "datasets/datasets.hpp"
#include "diffcore/adam.hpp"
#include "objectives/objectives.hpp"
#include "seqmodel/model.hpp"

namespace ctae {

// One full training run: model + objective targets + optimization knobs.
// channels and t_len in `model` may be left empty/0; train() fills them from
// the data. The remainder of train_frac + val_frac is the test split.
struct TrainConfig {
  ModelConfig model;
  MembershipMask mask;
  LossWeights weights;
  double lr = 1e-4;
  int64_t epochs = 10000;
  int64_t batch_size = 0;  // 0: full batch up to 512 train trials, else 32
  uint64_t seed = 0;
  double train_frac = 0.7;
  double val_frac = 0.15;
  int64_t report_interval = 50;  // validation cadence, in epochs
  bool standardize = true;       // z-score channels on train-split statistics

  void validate() const;
};

// Canonical `key = value` echo of a TrainConfig; the same text names the run
// (config hash), seeds the checkpoint echo, and round-trips through
// train_config_from_kv.
std::string to_kv_text(const TrainConfig& cfg);
TrainConfig train_config_from_kv(const std::string& text, const std::string& origin);

// Per-channel affine map fit on the train split: x' = (x - mean) * scale.
struct Standardizer {
  std::vector<double> mean, scale;
};

std::vector<Standardizer> fit_standardizers(const std::vector<RegionRecording>& data,
                                            const std::vector<int64_t>& train_ids,
                                            bool enabled);

// [K,N,T] recordings -> standardized [K,T,N] model inputs.
std::vector<DenseArray<double>> prepare_inputs(const std::vector<RegionRecording>& data,
                                               const std::vector<Standardizer>& std_maps);

// Sub-stream seed for a named role (split / init / train), so the trial split
// never aliases the weight init or the dropout stream.
uint64_t derive_seed(uint64_t seed, const char* role);

// Fills channels/t_len from the data and validates the whole config.
TrainConfig resolve_config(const TrainConfig& cfg, const std::vector<RegionRecording>& data);

// The split, standardizers, and standardized inputs exactly as train() builds
// them, for evaluation code that must see the same data the model saw.
struct PreparedRun {
  std::vector<std::vector<int64_t>> split;  // train / validation / test ids
  std::vector<Standardizer> standardizers;
  std::vector<DenseArray<double>> inputs;  // [K,T,N] per region
};
PreparedRun prepare_run(const TrainConfig& cfg, const std::vector<RegionRecording>& data);

struct EpochLog {
  LossReport train;
  double val_total = std::numeric_limits<double>::quiet_NaN();  // NaN off-interval
  int64_t clipped = 0;  // batches whose gradient norm hit the clip
};

// Serialized training state: enough to continue bit-exactly (parameters,
// optimizer moments, RNG) plus the config echo and best-validation metadata.
struct CheckpointRecord {
  std::string config_text;
  std::vector<std::pair<uint32_t, int64_t>> mask_blocks;  // code -> size
  int64_t regions = 0;
  int64_t epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  int64_t best_epoch = -1;
  std::vector<Parameter<double>> params;
  Adam<double>::State opt;
  std::string rng_state;
};

void save_checkpoint(const std::string& path, const CheckpointRecord& rec);
CheckpointRecord load_checkpoint(const std::string& path);

// Model rebuilt from a record's config echo with its parameters applied.
// channels/t_len come from the echo, so no data is needed.
CtaeModel<double> model_from_checkpoint(const CheckpointRecord& rec);

struct TrainOutcome {
  CheckpointRecord last;  // state after the final epoch; the resume point
  CheckpointRecord best;  // state at the best validation epoch of this run
  bool improved = false;  // best_val improved within this run (vs the resume)
  std::vector<EpochLog> log;
  std::vector<std::vector<int64_t>> split;  // train / validation / test ids
  std::vector<Standardizer> standardizers;
};

// One optimizer pass per epoch over the train split, validation totals on the
// configured cadence, best-validation tracking. Pass `resume` to continue a
// saved run; the subsequent trajectory is identical to the uninterrupted one.
TrainOutcome train(const TrainConfig& cfg, const std::vector<RegionRecording>& data,
                   const CheckpointRecord* resume = nullptr);

// Epoch-0 snapshot: freshly initialized parameters, optimizer and training RNG
// untouched. Resuming from it reproduces an uninterrupted run bit for bit.
CheckpointRecord initial_checkpoint(const TrainConfig& cfg,
                                    const std::vector<RegionRecording>& data);

// Validation total of a checkpoint, recomputed from scratch (fresh split and
// standardizers from the config echo). Selection oracle for grid ranking.
double validation_loss(const CheckpointRecord& rec, const std::vector<RegionRecording>& data);

// `epoch,rec,shared,align,orth,lambda_orth_eff,total,val_total,clipped` CSV;
// val_total is blank off the validation cadence.
void write_training_log(const std::string& path, const std::vector<EpochLog>& log);

}  // namespace ctae
