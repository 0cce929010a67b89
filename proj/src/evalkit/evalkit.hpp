#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffcore/array.hpp"
#include "seqmodel/masks.hpp"
#include "seqmodel/model.hpp"

namespace ctae {

// Per-trial feature matrices, [K, dims, T]. `source` names the subspace the
// features came from: "all", "shared", "private:<region index>", or
// "block:<subset code bits>".
struct FeatureView {
  std::string source;
  DenseArray<double> values;
};

// Offset/size of the latent block a source selector names ("all" spans D).
std::pair<int64_t, int64_t> block_span(const MembershipMask& mask, const std::string& source);

// Slice latents [K,T,D] down to a block and transpose into feature layout.
FeatureView features_from_latents(const DenseArray<double>& latents, const MembershipMask& mask,
                                  const std::string& source);

// Run the encoders and extract one subspace of the fused latents.
FeatureView extract_features(CtaeModel<double>& model,
                             const std::vector<DenseArray<double>>& inputs,
                             const std::string& source, int64_t chunk = 256);

// Row slice of stacked [K, d, T] matrices (ground-truth latents use this layout).
DenseArray<double> slice_rows(const DenseArray<double>& kdt, int64_t offset, int64_t size);

// Restrict a view to time bins [t0, t1).
FeatureView time_window(const FeatureView& view, int64_t t0, int64_t t1);

struct DecodeReport {
  std::string task;  // "continuous" | "discrete"
  std::vector<double> fold_scores;
  double mean = 0.0;
  double sd = 0.0;
  bool degenerate = false;  // constant features (or targets) hit somewhere

  // continuous: held-out predictions assembled across folds, [K, q, T]
  DenseArray<double> predictions;

  // discrete only
  double accuracy = 0.0;            // pooled over all held-out trials
  DenseArray<double> confusion;     // [C, C], row-normalized
  std::vector<int64_t> classes;     // label value per confusion row
  std::vector<int64_t> predicted;   // held-out prediction per trial

  std::vector<double> coef_digest;  // mean |coefficient| per feature dim
};

// Per-time-point ridge regression of continuous targets [K, q, T] on the
// features; regularization picked by inner validation per fold and time point.
DecodeReport fit_linear_decoder(const FeatureView& features, const DenseArray<double>& targets,
                                int64_t folds = 5);

// Multinomial logistic regression on time-flattened features, standardized
// per fold, gradient descent to 1e-6 loss-change convergence.
DecodeReport fit_logistic_decoder(const FeatureView& features, const std::vector<int64_t>& labels,
                                  int64_t folds = 5, uint64_t seed = 0);

struct TimeCurve {
  std::vector<double> accuracy;    // per center bin, pooled over held-out trials
  std::vector<double> sd;          // across folds, per bin
  std::vector<uint8_t> truncated;  // 1 where the window cannot sit centered
  double full_accuracy = 0.0;      // same folds, nothing masked
};

// Sliding-window decoding: the classifier is trained once per fold on the
// full time-flattened features; at test time everything outside a w-bin
// window is imputed with the training feature means (zero once standardized).
// Edge windows keep w bins by sliding inward and are flagged truncated, so
// w == T degenerates to full-feature decoding at every bin.
TimeCurve time_resolved_decoding(const FeatureView& features, const std::vector<int64_t>& labels,
                                 int64_t window = 5, int64_t folds = 5, uint64_t seed = 0);

struct GramDiagnostics {
  DenseArray<double> mean_abs;     // [D, D]: |cos(z_i, z_j)| averaged over trials
  DenseArray<double> block_pairs;  // [B, B]: block-pair means of the above
  double off_diagonal_mean = 0.0;  // every valid i < j pair
  std::vector<int64_t> collapsed;  // dims whose rows are zero-norm in all trials
};

GramDiagnostics gram_diagnostics(const DenseArray<double>& latents, const MembershipMask& mask);

struct AlignmentDiagnostics {
  DenseArray<double> per_region;     // [R, d_s]: E ||Z^(r)_s - Z_s||^2 per dim
  double overall = 0.0;
  DenseArray<double> region_traces;  // [R, d_s, T], trial-averaged
  DenseArray<double> fused_trace;    // [d_s, T], trial-averaged
};

AlignmentDiagnostics alignment_diagnostics(const LatentValues<double>& lat,
                                           const MembershipMask& mask);

struct RecoveryReport {
  std::vector<double> fold_r2;
  double r2 = 0.0;  // mean over folds
  bool degenerate = false;
};

// Cross-validated linear regression of planted rows onto recovered rows,
// one sample per (trial, time bin); both arguments are [K, d, T].
RecoveryReport subspace_recovery(const DenseArray<double>& recovered,
                                 const DenseArray<double>& planted, int64_t folds = 5);

struct VarianceReport {
  std::vector<double> fractions;  // sorted descending, sums to 1
  std::vector<double> per_dim;    // raw variance per latent dim
  int64_t d_eff = 0;              // fractions strictly above 1%
};

VarianceReport variance_per_latent(const DenseArray<double>& latents);

}  // namespace ctae
