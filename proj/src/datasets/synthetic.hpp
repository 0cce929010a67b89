#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "datasets/datasets.hpp"
#include "seqmodel/masks.hpp"

namespace ctae {

struct SyntheticSpec {
  int64_t regions = 2;
  std::vector<std::pair<uint32_t, int64_t>> subset_sizes;  // code -> planted dims
  int64_t trials = 0;
  int64_t t_len = 0;
  std::vector<int64_t> channels;  // per region
  int64_t kernel = 3;             // temporal smoothness of the planted rows
  std::string mixing = "tanh";    // linear | tanh
  double noise_std = 0.05;
  int64_t conditions = 1;
  double bin_ms = 100.0;
  uint64_t seed = 0;

  void validate() const;
};

struct GroundTruth {
  MembershipMask mask;
  DenseArray<double> latents;  // [K, D, T], post-orthogonalization
  std::vector<int64_t> labels;
  // per region: the mixing map. Linear uses w1 only ([N_r, d_r]); tanh-MLP is
  // x = w2 * tanh(w1 * l) with w1 [4 d_r, d_r], w2 [N_r, 4 d_r]. scale is the
  // per-channel normalization applied after mixing.
  std::vector<DenseArray<double>> mix_w1, mix_w2;
  std::vector<std::vector<double>> mix_scale;
};

struct SyntheticData {
  std::vector<RegionRecording> regions;
  GroundTruth truth;
};

// Planted-latent generator: (i) smooth unit-RMS latent rows from seeded white
// noise; (ii) condition offsets injected into the first two shared rows as
// cos/sin amplitudes of two fixed temporal profiles; (iii) per-trial
// orthogonalization of the stacked rows (two-pass modified Gram-Schmidt,
// re-normalized); (iv) per-region mixing of the claimed rows; (v) per-channel
// RMS normalization, then observation noise.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace ctae
