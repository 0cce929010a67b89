#pragma once

#include <cstdint>
#include <vector>

#include "common/errors.hpp"
#include "diffcore/ops.hpp"
#include "diffcore/tape.hpp"
#include "seqmodel/masks.hpp"
#include "seqmodel/model.hpp"

namespace ctae {

// Targets for Eq. 12. orth is the post-warm-up value; the effective
// coefficient at a given epoch comes from warmup_coefficient.
struct LossWeights {
  double shared = 0.0;
  double align = 0.0;
  double orth = 0.0;
  int64_t warmup_epochs = 1;  // e

  void validate() const {
    if (shared < 0 || align < 0 || orth < 0)
      fail(ErrorKind::config, "loss weights must be non-negative");
    if (warmup_epochs < 1) fail(ErrorKind::config, "warm-up epochs must be >= 1");
  }
};

struct LossNodes {
  int rec = -1;
  int shared = -1;  // -1 when the shared-only term is skipped
  int align = -1;
  int orth = -1;
  int total = -1;
};

struct LossReport {
  int64_t epoch = 0;
  double rec = 0;
  double shared = 0;
  double align = 0;
  double orth = 0;
  double lambda_orth_eff = 0;
  double total = 0;
};

// App. C ramp: 0 for t <= e, (t-e)/e * lambda for e < t <= 2e, lambda after.
// Continuous at both joins (value 0 at t=e, lambda at t=2e).
inline double warmup_coefficient(int64_t t, int64_t e, double lambda_orth) {
  if (e < 1) fail(ErrorKind::config, "warm-up epochs must be >= 1");
  if (t < 0) fail(ErrorKind::config, "epoch index must be >= 0");
  if (t <= e) return 0.0;
  if (t <= 2 * e)
    return lambda_orth * (static_cast<double>(t - e) / static_cast<double>(e));
  return lambda_orth;
}

namespace detail {

template <class Real>
int64_t batch_trials(Tape<Real>& t, int node) {
  const auto& s = t.shape(node);
  if (s.size() != 3) fail(ErrorKind::shape, "loss inputs must be [K,T,N]");
  return s[0];
}

template <class Real>
int mask_const(Tape<Real>& t, const std::vector<double>& v) {
  DenseArray<Real> a({static_cast<int64_t>(v.size())}, std::vector<Real>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) a.data[i] = static_cast<Real>(v[i]);
  return t.constant(a);
}

}  // namespace detail

// Eq. 8: sum over regions of the squared Frobenius distance, as a mean over
// the trials in the batch.
template <class Real>
int loss_reconstruction(Tape<Real>& t, const std::vector<int>& xhat,
                        const std::vector<int>& x) {
  if (xhat.size() != x.size() || xhat.empty())
    fail(ErrorKind::shape, "reconstruction loss needs matching region lists");
  const int64_t K = detail::batch_trials(t, x[0]);
  int acc = -1;
  for (size_t r = 0; r < x.size(); ++r) {
    const int s = ops::sum_all(t, ops::square(t, ops::sub(t, xhat[r], x[r])));
    acc = r == 0 ? s : ops::add(t, acc, s);
  }
  return ops::scale(t, acc, static_cast<Real>(1.0 / static_cast<double>(K)));
}

// Eq. 9 shares the functional form of Eq. 8; the distinction is purely which
// reconstructions are passed in (decodes of the shared-masked latents).
template <class Real>
int loss_shared_only(Tape<Real>& t, const std::vector<int>& xhat_shared,
                     const std::vector<int>& x) {
  return loss_reconstruction(t, xhat_shared, x);
}

// Eq. 10: for each region, the fused latents and that region's encoder output
// are compared on the region's claimed dimensions. Private dimensions pass
// through fusion unchanged (Eq. 5), so they contribute exactly zero.
template <class Real>
int loss_alignment(Tape<Real>& t, int fused, const std::vector<int>& z,
                   const MembershipMask& mask) {
  if (static_cast<int64_t>(z.size()) != mask.regions)
    fail(ErrorKind::shape, "alignment loss needs one latent block per region");
  const int64_t K = detail::batch_trials(t, fused);
  int acc = -1;
  for (size_t r = 0; r < z.size(); ++r) {
    const int w = detail::mask_const(t, mask.w[r]);
    const int d = ops::sub(t, ops::mul_bcast(t, fused, w), ops::mul_bcast(t, z[r], w));
    const int s = ops::sum_all(t, ops::square(t, d));
    acc = r == 0 ? s : ops::add(t, acc, s);
  }
  return ops::scale(t, acc, static_cast<Real>(1.0 / static_cast<double>(K)));
}

// Eq. 11 per trial: G = (1/T) Z Zᵀ over the time axis, penalty is the squared
// Frobenius norm of the off-diagonal part, averaged over trials.
template <class Real>
int loss_orthogonality(Tape<Real>& t, int fused) {
  const auto& s = t.shape(fused);
  if (s.size() != 3) fail(ErrorKind::shape, "orthogonality loss expects [K,T,D] latents");
  const int64_t K = s[0], T = s[1], D = s[2];
  const int gram = ops::scale(t, ops::bmm_tn(t, fused, fused),
                              static_cast<Real>(1.0 / static_cast<double>(T)));
  DenseArray<Real> off = DenseArray<Real>::zeros({D, D});
  for (int64_t i = 0; i < D; ++i)
    for (int64_t j = 0; j < D; ++j)
      if (i != j) off.data[static_cast<size_t>(i * D + j)] = Real(1);
  const int masked = ops::mul_bcast(t, gram, t.constant(off));
  return ops::scale(t, ops::sum_all(t, ops::square(t, masked)),
                    static_cast<Real>(1.0 / static_cast<double>(K)));
}

// Eq. 12. Components are always built (they are all logged); terms enter the
// total only with a nonzero coefficient, so ablations change the graph only
// by dropping add/scale pairs at the root. The shared-only term additionally
// needs the second decoder pass: if the forward skipped it, shared stays at
// -1 and lambda_shared must be zero.
template <class Real>
LossNodes total_loss(Tape<Real>& t, const ForwardOut& f, const MembershipMask& mask,
                     const LossWeights& w, int64_t epoch) {
  w.validate();
  LossNodes n;
  n.rec = loss_reconstruction(t, f.xhat, f.x);
  if (!f.xhat_shared.empty()) n.shared = loss_shared_only(t, f.xhat_shared, f.x);
  n.align = loss_alignment(t, f.fused, f.z, mask);
  n.orth = loss_orthogonality(t, f.fused);

  const double lo = warmup_coefficient(epoch, w.warmup_epochs, w.orth);
  n.total = n.rec;
  if (w.shared != 0.0) {
    if (n.shared < 0)
      fail(ErrorKind::internal, "shared-only loss requested but forward skipped the decode");
    n.total = ops::add(t, n.total, ops::scale(t, n.shared, static_cast<Real>(w.shared)));
  }
  if (w.align != 0.0)
    n.total = ops::add(t, n.total, ops::scale(t, n.align, static_cast<Real>(w.align)));
  if (lo != 0.0)
    n.total = ops::add(t, n.total, ops::scale(t, n.orth, static_cast<Real>(lo)));
  return n;
}

// Reads the component values off the tape (before backward frees them).
template <class Real>
LossReport read_losses(Tape<Real>& t, const LossNodes& n, const LossWeights& w,
                       int64_t epoch) {
  LossReport r;
  r.epoch = epoch;
  r.rec = static_cast<double>(t.scalar(n.rec));
  r.shared = n.shared >= 0 ? static_cast<double>(t.scalar(n.shared)) : 0.0;
  r.align = static_cast<double>(t.scalar(n.align));
  r.orth = static_cast<double>(t.scalar(n.orth));
  r.lambda_orth_eff = warmup_coefficient(epoch, w.warmup_epochs, w.orth);
  r.total = static_cast<double>(t.scalar(n.total));
  return r;
}

}  // namespace ctae
