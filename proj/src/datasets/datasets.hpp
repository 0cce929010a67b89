#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffcore/array.hpp"
#include "seqmodel/masks.hpp"

namespace ctae {

// One region's trials. values layout is [K, N_r, T] (channel-major within a
// trial, matching the D x T convention for latents).
struct RegionRecording {
  int64_t region_id = 0;
  int64_t trials = 0;
  int64_t channels = 0;
  int64_t t_len = 0;
  double bin_ms = 0;
  bool counts = false;  // counts from binning, rates after smoothing
  DenseArray<double> values;
  std::vector<int64_t> labels;   // optional condition label per trial
  DenseArray<double> targets;    // optional [K, dims, T] continuous targets

  void validate() const;
};

// Events are seconds, bins are milliseconds; bin t covers
// [t*bin_ms, (t+1)*bin_ms), left-closed. events is [trial][channel][event].
RegionRecording bin_spikes(const std::vector<std::vector<std::vector<double>>>& events,
                           double bin_ms, int64_t t_len, int64_t region_id = 0);

// Per-channel temporal convolution with a normalized Gaussian: sigma = k/2
// bins, truncated at radius k, reflect padding (mirror without repeating the
// edge sample). Output is in rates mode.
RegionRecording gaussian_smooth(const RegionRecording& rec, int64_t kernel);

// Raw kernel weights for the smoother, sum normalized to 1; 2k+1 taps.
std::vector<double> gaussian_kernel(int64_t kernel);

// Disjoint, exhaustive index sets of the requested fractional sizes, shuffled
// per seed. When labels are given, every class is dealt proportionally across
// the splits (within one trial of the global proportion); a split that would
// receive zero members of some class is an error.
std::vector<std::vector<int64_t>> split_trials(int64_t trials,
                                               const std::vector<double>& fractions,
                                               const std::vector<int64_t>& labels,
                                               uint64_t seed);

// k-fold variant: fold id per trial, stratified the same way.
std::vector<int> stratified_folds(int64_t trials, int64_t folds,
                                  const std::vector<int64_t>& labels, uint64_t seed);

// Column-text event lists: "trial channel time" per line, '#' comments.
// Indices are 0-based; sizes are inferred from the largest index seen.
struct EventList {
  int64_t trials = 0;
  int64_t channels = 0;
  std::vector<std::vector<std::vector<double>>> events;
};
EventList import_event_list(const std::string& path);

}  // namespace ctae
