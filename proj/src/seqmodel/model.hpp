#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "common/errors.hpp"
#include "diffcore/ops.hpp"
#include "diffcore/param_set.hpp"
#include "diffcore/rng.hpp"
#include "diffcore/tape.hpp"
#include "seqmodel/masks.hpp"
#include "seqmodel/positional.hpp"

namespace ctae {

struct ModelConfig {
  std::vector<int64_t> channels;  // N_r per region
  int64_t t_len = 0;
  int64_t layers = 1;
  int64_t d_model = 64;
  int64_t heads = 4;
  int64_t ff = 256;
  double dropout = 0.1;
  double ln_eps = 1e-5;
  std::string fusion = "auto";  // auto | two_region | general

  void validate(const MembershipMask& mask) const {
    if (channels.empty()) fail(ErrorKind::config, "model needs at least one region");
    if (static_cast<int64_t>(channels.size()) != mask.regions)
      fail(ErrorKind::config, "channel list has " + std::to_string(channels.size()) +
                                  " regions but mask has " + std::to_string(mask.regions));
    for (int64_t n : channels)
      if (n <= 0) fail(ErrorKind::config, "region channel count must be positive");
    if (t_len <= 0) fail(ErrorKind::config, "t_len must be positive");
    if (layers <= 0) fail(ErrorKind::config, "layers must be positive");
    if (d_model <= 0 || d_model % 2 != 0)
      fail(ErrorKind::config, "d_model must be positive and even");
    if (heads <= 0 || d_model % heads != 0)
      fail(ErrorKind::config, "d_model must be divisible by heads");
    if (ff <= 0) fail(ErrorKind::config, "ff width must be positive");
    if (dropout < 0.0 || dropout >= 1.0)
      fail(ErrorKind::config, "dropout must be in [0,1)");
    if (ln_eps <= 0.0) fail(ErrorKind::config, "ln_eps must be positive");
    if (fusion != "auto" && fusion != "two_region" && fusion != "general")
      fail(ErrorKind::config, "fusion must be auto, two_region, or general");
    if (fusion == "two_region" && !mask.exact_two_region())
      fail(ErrorKind::config, "two_region fusion requires the [shared, private-1, private-2] layout");
  }
};

struct ForwardPlan {
  bool training = false;
  bool shared_only = false;  // also decode shared-masked latents (Eq. 9)
  Rng* dropout_rng = nullptr;
};

struct ForwardOut {
  std::vector<int> x;            // input constants, per region [K,T,N_r]
  std::vector<int> z;            // per-region latents [K,T,D]
  int fused = -1;                // [K,T,D]
  std::vector<int> xhat;         // reconstructions [K,T,N_r]
  std::vector<int> xhat_shared;  // shared-only reconstructions, if requested
};

template <class Real>
struct LatentValues {
  std::vector<DenseArray<Real>> z;  // per region [K,T,D]
  DenseArray<Real> fused;           // [K,T,D]
};

// Coupled transformer autoencoder: one causal transformer encoder/decoder
// pair per region plus membership-masked latent fusion (Eqs. 2-7). Dropout,
// when enabled, is applied to attention probabilities and to the FF hidden
// activation, in that order per layer; region stacks consume the dropout RNG
// in registration order.
template <class Real>
class CtaeModel {
 public:
  CtaeModel(ModelConfig cfg, MembershipMask mask)
      : cfg_(std::move(cfg)), mask_(std::move(mask)) {
    cfg_.validate(mask_);
    use_two_region_ = cfg_.fusion == "two_region" ||
                      (cfg_.fusion == "auto" && mask_.exact_two_region());
    for (int64_t r = 0; r < regions(); ++r) encoders_.push_back(make_encoder(r));
    for (int64_t r = 0; r < regions(); ++r) decoders_.push_back(make_decoder(r));
    pe_ = positional_encoding<Real>(cfg_.t_len, cfg_.d_model);
    causal_ = causal_mask<Real>(cfg_.t_len);
  }

  int64_t regions() const { return static_cast<int64_t>(cfg_.channels.size()); }
  const ModelConfig& config() const { return cfg_; }
  const MembershipMask& mask() const { return mask_; }
  bool two_region_path() const { return use_two_region_; }
  ParameterSet<Real>& params() { return ps_; }
  const ParameterSet<Real>& params() const { return ps_; }

  // Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases and LN shifts zero,
  // LN gains one. Walks parameters in registration order, so a fixed seed
  // pins every weight.
  void init(Rng& rng) {
    for (int id = 0; id < ps_.count(); ++id) {
      auto& p = ps_.at(id);
      const InitSpec& is = init_[static_cast<size_t>(id)];
      switch (is.kind) {
        case InitSpec::uniform: {
          const double b = 1.0 / std::sqrt(static_cast<double>(is.fan_in));
          for (auto& v : p.value) v = static_cast<Real>(rng.uniform(-b, b));
          break;
        }
        case InitSpec::zero:
          std::fill(p.value.begin(), p.value.end(), Real(0));
          break;
        case InitSpec::one:
          std::fill(p.value.begin(), p.value.end(), Real(1));
          break;
      }
    }
  }

  ForwardOut forward(Tape<Real>& t, const std::vector<DenseArray<Real>>& x,
                     const ForwardPlan& plan = {}) {
    if (static_cast<int64_t>(x.size()) != regions())
      fail(ErrorKind::shape, "forward expects one input per region");
    if (plan.training && cfg_.dropout > 0.0 && plan.dropout_rng == nullptr)
      fail(ErrorKind::internal, "training forward with dropout needs an RNG");
    Ctx c = make_ctx(t, plan);
    ForwardOut out;
    const int64_t K = x[0].shape[0];
    for (int64_t r = 0; r < regions(); ++r) {
      const auto& xr = x[static_cast<size_t>(r)];
      if (xr.shape.size() != 3 || xr.shape[0] != K || xr.shape[1] != cfg_.t_len ||
          xr.shape[2] != cfg_.channels[static_cast<size_t>(r)])
        fail(ErrorKind::shape, "region " + std::to_string(r + 1) + " input must be [K," +
                                   std::to_string(cfg_.t_len) + "," +
                                   std::to_string(cfg_.channels[static_cast<size_t>(r)]) +
                                   "], got " + shape_str(xr.shape));
      out.x.push_back(t.constant(xr));
    }
    for (int64_t r = 0; r < regions(); ++r)
      out.z.push_back(encode_region(t, r, out.x[static_cast<size_t>(r)], c));
    out.fused = fuse_latents(t, out.z);
    for (int64_t r = 0; r < regions(); ++r)
      out.xhat.push_back(
          decode_region(t, r, out.fused, mask_.w[static_cast<size_t>(r)], c));
    if (plan.shared_only)
      for (int64_t r = 0; r < regions(); ++r)
        out.xhat_shared.push_back(
            decode_region(t, r, out.fused, mask_.w_shared[static_cast<size_t>(r)], c));
    return out;
  }

  // Inference-only latents, chunked over trials to bound tape memory.
  LatentValues<Real> infer_latents(const std::vector<DenseArray<Real>>& x,
                                   int64_t chunk = 64) {
    if (static_cast<int64_t>(x.size()) != regions())
      fail(ErrorKind::shape, "infer_latents expects one input per region");
    const int64_t K = x[0].shape[0];
    LatentValues<Real> lat;
    for (int64_t r = 0; r < regions(); ++r)
      lat.z.push_back(DenseArray<Real>::zeros({K, cfg_.t_len, mask_.dim}));
    lat.fused = DenseArray<Real>::zeros({K, cfg_.t_len, mask_.dim});
    for (int64_t k0 = 0; k0 < K; k0 += chunk) {
      const int64_t kb = std::min(chunk, K - k0);
      std::vector<DenseArray<Real>> piece;
      for (int64_t r = 0; r < regions(); ++r) {
        const auto& xr = x[static_cast<size_t>(r)];
        const int64_t n = xr.shape[2];
        DenseArray<Real> p = DenseArray<Real>::zeros({kb, cfg_.t_len, n});
        std::copy_n(xr.data.data() + k0 * cfg_.t_len * n, kb * cfg_.t_len * n,
                    p.data.data());
        piece.push_back(std::move(p));
      }
      Tape<Real> t(&ps_);
      Ctx c = make_ctx(t, ForwardPlan{});
      std::vector<int> z;
      for (int64_t r = 0; r < regions(); ++r)
        z.push_back(encode_region(t, r, t.constant(piece[static_cast<size_t>(r)]), c));
      const int fused = fuse_latents(t, z);
      const int64_t span = cfg_.t_len * mask_.dim;
      for (int64_t r = 0; r < regions(); ++r)
        std::copy_n(t.cdata(z[static_cast<size_t>(r)]), kb * span,
                    lat.z[static_cast<size_t>(r)].data.data() + k0 * span);
      std::copy_n(t.cdata(fused), kb * span, lat.fused.data.data() + k0 * span);
    }
    return lat;
  }

  // Standalone graph builders for composition in tests and evaluation. Each
  // call opens its own inference context (no dropout).
  int encode_region(Tape<Real>& t, int64_t r, int x_node) {
    Ctx c = make_ctx(t, ForwardPlan{});
    return encode_region(t, r, x_node, c);
  }
  int decode_region(Tape<Real>& t, int64_t r, int z_node, const std::vector<double>& w) {
    Ctx c = make_ctx(t, ForwardPlan{});
    return decode_region(t, r, z_node, w, c);
  }

  // Eqs. 4-6. The two-region path realizes the masked average as shared
  // halving plus private pass-through; the general path divides the masked
  // sum by the claim count. Both round identically (multiplies by exact
  // 0/1/0.5 and additions of zero), so the paths are interchangeable
  // bit-for-bit at the loss level.
  int fuse_latents(Tape<Real>& t, const std::vector<int>& z) {
    if (static_cast<int64_t>(z.size()) != regions())
      fail(ErrorKind::shape, "fuse_latents expects one latent block per region");
    if (use_two_region_) {
      const int s = mask_const(t, mask_.s);
      const int sum_s =
          ops::add(t, ops::mul_bcast(t, z[0], s), ops::mul_bcast(t, z[1], s));
      const int half = ops::scale(t, sum_s, Real(0.5));
      const int priv = ops::add(t, ops::mul_bcast(t, z[0], mask_const(t, mask_.w_priv[0])),
                                ops::mul_bcast(t, z[1], mask_const(t, mask_.w_priv[1])));
      return ops::add(t, half, priv);
    }
    int acc = ops::mul_bcast(t, z[0], mask_const(t, mask_.w[0]));
    for (int64_t r = 1; r < regions(); ++r)
      acc = ops::add(
          t, acc, ops::mul_bcast(t, z[static_cast<size_t>(r)], mask_const(t, mask_.w[static_cast<size_t>(r)])));
    return ops::mul_bcast(t, acc, mask_const(t, mask_.recip));
  }

 private:
  struct LinearP {
    int w = -1, b = -1;
    int64_t in = 0, out = 0;
  };
  struct LnP {
    int g = -1, b = -1;
  };
  struct AttnP {
    LinearP q, k, v, o;
  };
  struct EncLayerP {
    LnP ln1;
    AttnP attn;
    LnP ln2;
    LinearP ff1, ff2;
  };
  struct DecLayerP {
    LnP ln1;
    AttnP self_attn;
    LnP lnx;
    AttnP cross;
    LnP ln2;
    LinearP ff1, ff2;
  };
  struct EncoderP {
    LinearP in;
    std::vector<EncLayerP> layers;
    LnP ln_f;
    LinearP out;
  };
  struct DecoderP {
    LinearP q_in, m_in;
    std::vector<DecLayerP> layers;
    LnP ln_f;
    LinearP out;
  };

  struct InitSpec {
    enum Kind { uniform, zero, one } kind = zero;
    int64_t fan_in = 1;
  };

  // Per-forward state: one leaf node per touched parameter, shared constant
  // nodes, and the dropout stream.
  struct Ctx {
    Tape<Real>* t = nullptr;
    std::vector<int> leaf;  // param id -> node id or -1
    int pe = -1;
    int causal = -1;
    bool training = false;
    Rng* rng = nullptr;
  };

  Ctx make_ctx(Tape<Real>& t, const ForwardPlan& plan) {
    Ctx c;
    c.t = &t;
    c.leaf.assign(static_cast<size_t>(ps_.count()), -1);
    c.pe = t.constant(pe_);
    c.causal = t.constant(causal_);
    c.training = plan.training;
    c.rng = plan.dropout_rng;
    return c;
  }

  int pleaf(Ctx& c, int pid) {
    int& n = c.leaf[static_cast<size_t>(pid)];
    if (n < 0) n = c.t->leaf(pid);
    return n;
  }

  int add_param(const std::string& name, std::vector<int64_t> shape, InitSpec spec) {
    const int id = ps_.add(name, std::move(shape));
    init_.push_back(spec);
    return id;
  }

  LinearP make_linear(const std::string& name, int64_t in, int64_t out, bool bias = true) {
    LinearP p;
    p.in = in;
    p.out = out;
    p.w = add_param(name + ".w", {in, out}, {InitSpec::uniform, in});
    if (bias) p.b = add_param(name + ".b", {out}, {InitSpec::zero, 1});
    return p;
  }

  LnP make_ln(const std::string& name) {
    LnP p;
    p.g = add_param(name + ".g", {cfg_.d_model}, {InitSpec::one, 1});
    p.b = add_param(name + ".b", {cfg_.d_model}, {InitSpec::zero, 1});
    return p;
  }

  AttnP make_attn(const std::string& name) {
    AttnP p;
    p.q = make_linear(name + ".q", cfg_.d_model, cfg_.d_model);
    // no key bias: softmax is invariant to the per-row constant it adds, so
    // the direction is untrainable
    p.k = make_linear(name + ".k", cfg_.d_model, cfg_.d_model, false);
    p.v = make_linear(name + ".v", cfg_.d_model, cfg_.d_model);
    p.o = make_linear(name + ".o", cfg_.d_model, cfg_.d_model);
    return p;
  }

  EncoderP make_encoder(int64_t r) {
    const std::string base = "enc" + std::to_string(r + 1);
    EncoderP e;
    e.in = make_linear(base + ".in", cfg_.channels[static_cast<size_t>(r)], cfg_.d_model);
    for (int64_t i = 0; i < cfg_.layers; ++i) {
      const std::string lb = base + ".l" + std::to_string(i + 1);
      EncLayerP l;
      l.ln1 = make_ln(lb + ".ln1");
      l.attn = make_attn(lb + ".attn");
      l.ln2 = make_ln(lb + ".ln2");
      l.ff1 = make_linear(lb + ".ff1", cfg_.d_model, cfg_.ff);
      l.ff2 = make_linear(lb + ".ff2", cfg_.ff, cfg_.d_model);
      e.layers.push_back(l);
    }
    e.ln_f = make_ln(base + ".ln");
    e.out = make_linear(base + ".out", cfg_.d_model, mask_.dim);
    return e;
  }

  DecoderP make_decoder(int64_t r) {
    const std::string base = "dec" + std::to_string(r + 1);
    DecoderP d;
    d.q_in = make_linear(base + ".q", cfg_.d_model, cfg_.d_model);
    d.m_in = make_linear(base + ".mem", mask_.dim, cfg_.d_model);
    for (int64_t i = 0; i < cfg_.layers; ++i) {
      const std::string lb = base + ".l" + std::to_string(i + 1);
      DecLayerP l;
      l.ln1 = make_ln(lb + ".ln1");
      l.self_attn = make_attn(lb + ".attn");
      l.lnx = make_ln(lb + ".lnx");
      l.cross = make_attn(lb + ".xattn");
      l.ln2 = make_ln(lb + ".ln2");
      l.ff1 = make_linear(lb + ".ff1", cfg_.d_model, cfg_.ff);
      l.ff2 = make_linear(lb + ".ff2", cfg_.ff, cfg_.d_model);
      d.layers.push_back(l);
    }
    d.ln_f = make_ln(base + ".ln");
    d.out = make_linear(base + ".out", cfg_.d_model, cfg_.channels[static_cast<size_t>(r)]);
    return d;
  }

  int apply_linear(Ctx& c, const LinearP& p, int x) {
    Tape<Real>& t = *c.t;
    const int h = ops::matmul(t, x, pleaf(c, p.w));
    if (p.b < 0) return h;
    return ops::add_bcast(t, h, pleaf(c, p.b));
  }

  int apply_ln(Ctx& c, const LnP& p, int x) {
    return ops::layer_norm(*c.t, x, pleaf(c, p.g), pleaf(c, p.b),
                           static_cast<Real>(cfg_.ln_eps));
  }

  int dropout_node(Ctx& c, int x) {
    if (!c.training || cfg_.dropout <= 0.0) return x;
    Tape<Real>& t = *c.t;
    DenseArray<Real> mask(t.shape(x), std::vector<Real>(numel(t.shape(x))));
    const double p = cfg_.dropout;
    const Real keep = static_cast<Real>(1.0 / (1.0 - p));
    for (auto& v : mask.data) v = c.rng->unit() < p ? Real(0) : keep;
    return ops::mul(t, x, t.constant(mask));
  }

  // Multi-head attention with the causal mask on the score matrix. q_x and
  // kv_x are [K, T, d_model]; both self- (q_x == kv_x) and cross-attention
  // stay causal.
  int attention(Ctx& c, const AttnP& p, int q_x, int kv_x) {
    Tape<Real>& t = *c.t;
    const int64_t dh = cfg_.d_model / cfg_.heads;
    const int q = ops::split_heads(t, apply_linear(c, p.q, q_x), cfg_.heads);
    const int k = ops::split_heads(t, apply_linear(c, p.k, kv_x), cfg_.heads);
    const int v = ops::split_heads(t, apply_linear(c, p.v, kv_x), cfg_.heads);
    int scores = ops::bmm_nt(t, q, k);
    scores = ops::scale(t, scores, static_cast<Real>(1.0 / std::sqrt(static_cast<double>(dh))));
    scores = ops::add_bcast(t, scores, c.causal);
    int probs = ops::softmax_lastdim(t, scores);
    probs = dropout_node(c, probs);
    const int ctx = ops::merge_heads(t, ops::bmm_nn(t, probs, v), cfg_.heads);
    return apply_linear(c, p.o, ctx);
  }

  int feed_forward(Ctx& c, const LinearP& ff1, const LinearP& ff2, int x) {
    Tape<Real>& t = *c.t;
    int h = ops::relu(t, apply_linear(c, ff1, x));
    h = dropout_node(c, h);
    return apply_linear(c, ff2, h);
  }

  // Eq. 2, one region: input projection + positional encoding, L pre-LN
  // causal blocks, final LN, linear head d_model -> D.
  int encode_region(Tape<Real>& t, int64_t r, int x_node, Ctx& c) {
    const EncoderP& e = encoders_[static_cast<size_t>(r)];
    int h = ops::add_bcast(t, apply_linear(c, e.in, x_node), c.pe);
    for (const auto& l : e.layers) {
      const int ln1 = apply_ln(c, l.ln1, h);
      h = ops::add(t, h, attention(c, l.attn, ln1, ln1));
      h = ops::add(t, h, feed_forward(c, l.ff1, l.ff2, apply_ln(c, l.ln2, h)));
    }
    return apply_linear(c, e.out, apply_ln(c, e.ln_f, h));
  }

  // Eq. 7, one region: mask the latents, project to memory, decode with
  // PE-derived queries through L pre-LN blocks (causal self- and
  // cross-attention), linear head d_model -> N_r.
  int decode_region(Tape<Real>& t, int64_t r, int z_node, const std::vector<double>& w,
                    Ctx& c) {
    const DecoderP& d = decoders_[static_cast<size_t>(r)];
    const int zin = ops::mul_bcast(t, z_node, mask_const(t, w));
    int mem = ops::add_bcast(t, apply_linear(c, d.m_in, zin), c.pe);
    const int64_t K = t.shape(z_node)[0];
    int h = ops::expand_batch(t, apply_linear(c, d.q_in, c.pe), K);
    for (const auto& l : d.layers) {
      const int ln1 = apply_ln(c, l.ln1, h);
      h = ops::add(t, h, attention(c, l.self_attn, ln1, ln1));
      h = ops::add(t, h, attention(c, l.cross, apply_ln(c, l.lnx, h), mem));
      h = ops::add(t, h, feed_forward(c, l.ff1, l.ff2, apply_ln(c, l.ln2, h)));
    }
    return apply_linear(c, d.out, apply_ln(c, d.ln_f, h));
  }

  int mask_const(Tape<Real>& t, const std::vector<double>& v) {
    DenseArray<Real> a({static_cast<int64_t>(v.size())},
                       std::vector<Real>(v.size()));
    for (size_t i = 0; i < v.size(); ++i) a.data[i] = static_cast<Real>(v[i]);
    return t.constant(a);
  }

  ModelConfig cfg_;
  MembershipMask mask_;
  bool use_two_region_ = false;
  ParameterSet<Real> ps_;
  std::vector<InitSpec> init_;
  std::vector<EncoderP> encoders_;
  std::vector<DecoderP> decoders_;
  DenseArray<Real> pe_;
  DenseArray<Real> causal_;
};

}  // namespace ctae
