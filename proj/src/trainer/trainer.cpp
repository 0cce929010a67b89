#include "trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "common/binio.hpp"
#include "common/hash.hpp"
#include "common/kvconfig.hpp"
#include "common/version.hpp"

namespace ctae {

namespace {

constexpr char kCkptMagic[8] = {'C', 'T', 'A', 'E', 'C', 'K', 'P', 'T'};
constexpr int64_t kFullBatchLimit = 512;
constexpr int64_t kDefaultMinibatch = 32;
constexpr int64_t kEvalChunk = 256;

std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

std::string fmt_list(const std::vector<int64_t>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string mask_text(const MembershipMask& m) {
  std::string s;
  for (size_t b = 0; b < m.codes.size(); ++b) {
    if (b) s += ",";
    s += MembershipMask::code_str(m.codes[b], m.regions) + ":" +
         std::to_string(m.block_sizes[b]);
  }
  return s;
}

MembershipMask mask_from_text(const std::string& text, const std::string& origin) {
  std::vector<std::pair<uint32_t, int64_t>> blocks;
  int64_t regions = -1;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      fail(ErrorKind::config, origin + ": latent block '" + item + "' must be code:size");
    const std::string bits = item.substr(0, colon);
    if (regions < 0) regions = static_cast<int64_t>(bits.size());
    const uint32_t code = MembershipMask::parse_code(bits, regions);
    int64_t size = 0;
    try {
      size = std::stoll(item.substr(colon + 1));
    } catch (const std::exception&) {
      fail(ErrorKind::config, origin + ": bad latent block size in '" + item + "'");
    }
    blocks.push_back({code, size});
  }
  if (blocks.empty()) fail(ErrorKind::config, origin + ": empty latent layout");
  return build_membership(regions, blocks);
}

// epoch index at which the warm-up has fully ramped; validation always scores
// with the final target lambda_orth
int64_t post_warmup_epoch(const LossWeights& w) { return 2 * w.warmup_epochs + 1; }

DenseArray<double> gather_trials(const DenseArray<double>& x, const std::vector<int64_t>& ids,
                                 size_t begin, size_t end) {
  const int64_t t_len = x.shape[1], n = x.shape[2], row = t_len * n;
  DenseArray<double> out = DenseArray<double>::zeros({static_cast<int64_t>(end - begin), t_len, n});
  for (size_t i = begin; i < end; ++i)
    std::copy_n(x.data.data() + ids[i] * row, row, out.data.data() + (i - begin) * row);
  return out;
}

void check_data(const std::vector<RegionRecording>& data) {
  if (data.empty()) fail(ErrorKind::shape, "training needs at least one region");
  for (const auto& r : data) {
    r.validate();
    if (r.trials != data[0].trials || r.t_len != data[0].t_len)
      fail(ErrorKind::shape, "all regions must share trials and t_len");
    if (r.labels != data[0].labels)
      fail(ErrorKind::shape, "all regions must share condition labels");
  }
}

void apply_params(CtaeModel<double>& model, const CheckpointRecord& rec) {
  auto& ps = model.params();
  if (static_cast<size_t>(ps.count()) != rec.params.size())
    fail(ErrorKind::io, "checkpoint has " + std::to_string(rec.params.size()) +
                            " parameters, model expects " + std::to_string(ps.count()));
  for (int i = 0; i < ps.count(); ++i) {
    auto& p = ps.at(i);
    const auto& q = rec.params[static_cast<size_t>(i)];
    if (p.name != q.name || p.shape != q.shape)
      fail(ErrorKind::io, "checkpoint parameter '" + q.name + "' does not match model slot '" +
                              p.name + "'");
    p.value = q.value;
    std::fill(p.grad.begin(), p.grad.end(), 0.0);
  }
}

CheckpointRecord snapshot(const std::string& echo, const MembershipMask& mask, int64_t epoch,
                          double best_val, int64_t best_epoch, const CtaeModel<double>& model,
                          const Adam<double>& adam, const Rng& rng) {
  CheckpointRecord rec;
  rec.config_text = echo;
  rec.regions = mask.regions;
  for (size_t b = 0; b < mask.codes.size(); ++b)
    rec.mask_blocks.push_back({mask.codes[b], mask.block_sizes[b]});
  rec.epoch = epoch;
  rec.best_val = best_val;
  rec.best_epoch = best_epoch;
  const auto& ps = model.params();
  for (int i = 0; i < ps.count(); ++i) rec.params.push_back(ps.at(i));
  for (auto& p : rec.params) p.grad.clear();
  rec.opt = adam.export_state();
  rec.rng_state = rng.save_state();
  return rec;
}

// mean validation total over `ids`, scored at the final target lambda_orth
double evaluate_total(CtaeModel<double>& model, const std::vector<DenseArray<double>>& inputs,
                      const std::vector<int64_t>& ids, const TrainConfig& cfg) {
  ForwardPlan plan;
  plan.training = false;
  plan.shared_only = cfg.weights.shared != 0.0;
  const int64_t eval_epoch = post_warmup_epoch(cfg.weights);
  double sum = 0;
  for (size_t at = 0; at < ids.size(); at += kEvalChunk) {
    const size_t end = std::min(ids.size(), at + kEvalChunk);
    std::vector<DenseArray<double>> batch;
    for (const auto& x : inputs) batch.push_back(gather_trials(x, ids, at, end));
    Tape<double> tape(&model.params());
    const auto fwd = model.forward(tape, batch, plan);
    const auto nodes = total_loss(tape, fwd, model.mask(), cfg.weights, eval_epoch);
    sum += tape.scalar(nodes.total) * static_cast<double>(end - at);
  }
  return sum / static_cast<double>(ids.size());
}

}  // namespace

uint64_t derive_seed(uint64_t seed, const char* role) {
  return fnv1a64(std::string(role) + ":" + std::to_string(seed));
}

TrainConfig resolve_config(const TrainConfig& cfg, const std::vector<RegionRecording>& data) {
  check_data(data);
  TrainConfig c = cfg;
  if (c.model.channels.empty())
    for (const auto& r : data) c.model.channels.push_back(r.channels);
  if (c.model.t_len == 0) c.model.t_len = data[0].t_len;
  if (static_cast<int64_t>(data.size()) != c.mask.regions)
    fail(ErrorKind::config, "latent layout spans " + std::to_string(c.mask.regions) +
                                " regions but the data has " + std::to_string(data.size()));
  for (size_t r = 0; r < data.size(); ++r)
    if (c.model.channels[r] != data[r].channels)
      fail(ErrorKind::shape, "region " + std::to_string(r + 1) + " channel mismatch");
  if (c.model.t_len != data[0].t_len) fail(ErrorKind::shape, "t_len mismatch with data");
  c.validate();
  c.model.validate(c.mask);
  return c;
}

PreparedRun prepare_run(const TrainConfig& cfg, const std::vector<RegionRecording>& data) {
  const int64_t k = data[0].trials;
  std::vector<double> fracs = {cfg.train_frac, cfg.val_frac};
  const double rest = 1.0 - cfg.train_frac - cfg.val_frac;
  if (rest > 1e-9) fracs.push_back(rest);
  PreparedRun p;
  p.split = split_trials(k, fracs, data[0].labels, derive_seed(cfg.seed, "split"));
  if (p.split.size() == 2) p.split.push_back({});
  p.standardizers = fit_standardizers(data, p.split[0], cfg.standardize);
  p.inputs = prepare_inputs(data, p.standardizers);
  return p;
}

void TrainConfig::validate() const {
  weights.validate();
  if (lr <= 0) fail(ErrorKind::config, "learning rate must be positive");
  if (epochs < 1) fail(ErrorKind::config, "epochs must be >= 1");
  if (batch_size < 0) fail(ErrorKind::config, "batch size must be >= 0");
  if (train_frac <= 0 || val_frac <= 0)
    fail(ErrorKind::config, "train and validation fractions must be positive");
  if (train_frac + val_frac > 1.0 + 1e-9)
    fail(ErrorKind::config, "train + validation fractions exceed 1");
  if (report_interval < 1) fail(ErrorKind::config, "report interval must be >= 1");
  if (mask.dim <= 0) fail(ErrorKind::config, "latent layout is empty");
}

std::string to_kv_text(const TrainConfig& cfg) {
  KvConfig kv;
  kv.set("model.layers", std::to_string(cfg.model.layers));
  kv.set("model.d_model", std::to_string(cfg.model.d_model));
  kv.set("model.heads", std::to_string(cfg.model.heads));
  kv.set("model.ff", std::to_string(cfg.model.ff));
  kv.set("model.dropout", fmt(cfg.model.dropout));
  kv.set("model.ln_eps", fmt(cfg.model.ln_eps));
  kv.set("model.fusion", cfg.model.fusion);
  kv.set("model.t_len", std::to_string(cfg.model.t_len));
  kv.set("model.channels", fmt_list(cfg.model.channels));
  kv.set("mask.blocks", mask_text(cfg.mask));
  kv.set("loss.shared", fmt(cfg.weights.shared));
  kv.set("loss.align", fmt(cfg.weights.align));
  kv.set("loss.orth", fmt(cfg.weights.orth));
  kv.set("loss.warmup", std::to_string(cfg.weights.warmup_epochs));
  kv.set("train.lr", fmt(cfg.lr));
  kv.set("train.epochs", std::to_string(cfg.epochs));
  kv.set("train.batch_size", std::to_string(cfg.batch_size));
  kv.set("train.seed", std::to_string(cfg.seed));
  kv.set("train.train_frac", fmt(cfg.train_frac));
  kv.set("train.val_frac", fmt(cfg.val_frac));
  kv.set("train.report_interval", std::to_string(cfg.report_interval));
  kv.set("train.standardize", cfg.standardize ? "true" : "false");
  return kv.canonical_text();
}

TrainConfig train_config_from_kv(const std::string& text, const std::string& origin) {
  KvConfig kv = KvConfig::from_string(text, origin);
  TrainConfig cfg;
  cfg.model.layers = kv.get_int("model.layers", 1);
  cfg.model.d_model = kv.get_int("model.d_model", 64);
  cfg.model.heads = kv.get_int("model.heads", 4);
  cfg.model.ff = kv.get_int("model.ff", 256);
  cfg.model.dropout = kv.get_double("model.dropout", 0.1);
  cfg.model.ln_eps = kv.get_double("model.ln_eps", 1e-5);
  cfg.model.fusion = kv.get_string("model.fusion", "auto");
  cfg.model.t_len = kv.get_int("model.t_len", 0);
  cfg.model.channels = kv.get_int_list("model.channels", {});
  cfg.mask = mask_from_text(kv.get_string("mask.blocks"), origin);
  cfg.weights.shared = kv.get_double("loss.shared", 0.0);
  cfg.weights.align = kv.get_double("loss.align", 0.0);
  cfg.weights.orth = kv.get_double("loss.orth", 0.0);
  cfg.weights.warmup_epochs = kv.get_int("loss.warmup", 1);
  cfg.lr = kv.get_double("train.lr", 1e-4);
  cfg.epochs = kv.get_int("train.epochs", 10000);
  cfg.batch_size = kv.get_int("train.batch_size", 0);
  cfg.seed = static_cast<uint64_t>(std::stoull(
      kv.get_string("train.seed", "0")));
  cfg.train_frac = kv.get_double("train.train_frac", 0.7);
  cfg.val_frac = kv.get_double("train.val_frac", 0.15);
  cfg.report_interval = kv.get_int("train.report_interval", 50);
  cfg.standardize = kv.get_bool("train.standardize", true);
  kv.finish();
  return cfg;
}

std::vector<Standardizer> fit_standardizers(const std::vector<RegionRecording>& data,
                                            const std::vector<int64_t>& train_ids,
                                            bool enabled) {
  if (train_ids.empty()) fail(ErrorKind::config, "standardizer needs a non-empty train split");
  std::vector<Standardizer> out;
  for (const auto& rec : data) {
    Standardizer s;
    s.mean.assign(static_cast<size_t>(rec.channels), 0.0);
    s.scale.assign(static_cast<size_t>(rec.channels), 1.0);
    if (enabled) {
      const int64_t t_len = rec.t_len, n_ch = rec.channels;
      const double m = static_cast<double>(train_ids.size() * static_cast<size_t>(t_len));
      for (int64_t n = 0; n < n_ch; ++n) {
        double sum = 0;
        for (const int64_t k : train_ids)
          for (int64_t t = 0; t < t_len; ++t)
            sum += rec.values.data[static_cast<size_t>((k * n_ch + n) * t_len + t)];
        const double mean = sum / m;
        double sq = 0;
        for (const int64_t k : train_ids)
          for (int64_t t = 0; t < t_len; ++t) {
            const double d =
                rec.values.data[static_cast<size_t>((k * n_ch + n) * t_len + t)] - mean;
            sq += d * d;
          }
        const double sd = std::sqrt(sq / m);
        s.mean[static_cast<size_t>(n)] = mean;
        s.scale[static_cast<size_t>(n)] = sd > 1e-8 ? 1.0 / sd : 1.0;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<DenseArray<double>> prepare_inputs(const std::vector<RegionRecording>& data,
                                               const std::vector<Standardizer>& std_maps) {
  if (data.size() != std_maps.size())
    fail(ErrorKind::shape, "one standardizer per region required");
  std::vector<DenseArray<double>> out;
  for (size_t r = 0; r < data.size(); ++r) {
    const auto& rec = data[r];
    const auto& sm = std_maps[r];
    if (static_cast<int64_t>(sm.mean.size()) != rec.channels)
      fail(ErrorKind::shape, "standardizer channel mismatch");
    DenseArray<double> x = DenseArray<double>::zeros({rec.trials, rec.t_len, rec.channels});
    for (int64_t k = 0; k < rec.trials; ++k)
      for (int64_t n = 0; n < rec.channels; ++n) {
        const double mean = sm.mean[static_cast<size_t>(n)];
        const double scale = sm.scale[static_cast<size_t>(n)];
        for (int64_t t = 0; t < rec.t_len; ++t)
          x.data[static_cast<size_t>((k * rec.t_len + t) * rec.channels + n)] =
              (rec.values.data[static_cast<size_t>((k * rec.channels + n) * rec.t_len + t)] -
               mean) *
              scale;
      }
    out.push_back(std::move(x));
  }
  return out;
}

CheckpointRecord initial_checkpoint(const TrainConfig& cfg,
                                    const std::vector<RegionRecording>& data) {
  const TrainConfig c = resolve_config(cfg, data);
  CtaeModel<double> model(c.model, c.mask);
  typename Adam<double>::Config opt_cfg;
  opt_cfg.lr = c.lr;
  opt_cfg.clip_norm = 5.0;
  Adam<double> adam(model.params(), opt_cfg);
  Rng init_rng(derive_seed(c.seed, "init"));
  model.init(init_rng);
  Rng train_rng(derive_seed(c.seed, "train"));
  return snapshot(to_kv_text(c), c.mask, 0, std::numeric_limits<double>::infinity(), -1, model,
                  adam, train_rng);
}

TrainOutcome train(const TrainConfig& cfg, const std::vector<RegionRecording>& data,
                   const CheckpointRecord* resume) {
  const TrainConfig c = resolve_config(cfg, data);
  const std::string echo = to_kv_text(c);

  PreparedRun prep = prepare_run(c, data);
  const std::vector<int64_t>& train_ids = prep.split[0];
  const std::vector<int64_t>& val_ids = prep.split[1];
  const int64_t k_train = static_cast<int64_t>(train_ids.size());

  CtaeModel<double> model(c.model, c.mask);
  typename Adam<double>::Config opt_cfg;
  opt_cfg.lr = c.lr;
  opt_cfg.clip_norm = 5.0;
  Adam<double> adam(model.params(), opt_cfg);
  Rng train_rng(derive_seed(c.seed, "train"));

  int64_t start_epoch = 1;
  double best_val = std::numeric_limits<double>::infinity();
  int64_t best_epoch = -1;
  if (resume) {
    // the echo must match except for the run length
    auto strip = [](const std::string& text) {
      auto kv = KvConfig::from_string(text, "<echo>");
      auto m = kv.entries();
      m.erase("train.epochs");
      return m;
    };
    if (strip(resume->config_text) != strip(echo))
      fail(ErrorKind::config, "checkpoint config does not match this run's config");
    if (resume->epoch >= c.epochs)
      fail(ErrorKind::config, "checkpoint is already at epoch " + std::to_string(resume->epoch) +
                                  " of " + std::to_string(c.epochs));
    apply_params(model, *resume);
    adam.import_state(resume->opt);
    train_rng.load_state(resume->rng_state);
    start_epoch = resume->epoch + 1;
    best_val = resume->best_val;
    best_epoch = resume->best_epoch;
  } else {
    Rng init_rng(derive_seed(c.seed, "init"));
    model.init(init_rng);
  }

  int64_t batch = c.batch_size > 0 ? c.batch_size
                                   : (k_train <= kFullBatchLimit ? k_train : kDefaultMinibatch);
  batch = std::min(batch, k_train);

  ForwardPlan plan;
  plan.training = true;
  plan.shared_only = c.weights.shared != 0.0;
  plan.dropout_rng = &train_rng;

  TrainOutcome out;
  out.split = prep.split;
  out.standardizers = prep.standardizers;

  for (int64_t epoch = start_epoch; epoch <= c.epochs; ++epoch) {
    std::vector<int64_t> order = train_ids;
    if (batch < k_train) {
      const auto perm = train_rng.permutation(k_train);
      for (int64_t i = 0; i < k_train; ++i)
        order[static_cast<size_t>(i)] = train_ids[static_cast<size_t>(perm[static_cast<size_t>(i)])];
    }

    EpochLog el;
    LossReport acc;
    int64_t n_batches = 0;
    for (size_t at = 0; at < order.size(); at += static_cast<size_t>(batch), ++n_batches) {
      const size_t end = std::min(order.size(), at + static_cast<size_t>(batch));
      std::vector<DenseArray<double>> bx;
      for (const auto& x : prep.inputs) bx.push_back(gather_trials(x, order, at, end));

      Tape<double> tape(&model.params());
      const auto fwd = model.forward(tape, bx, plan);
      const auto nodes = total_loss(tape, fwd, c.mask, c.weights, epoch);
      const LossReport rep = read_losses(tape, nodes, c.weights, epoch);
      if (!std::isfinite(rep.total) || !std::isfinite(rep.rec))
        fail(ErrorKind::numeric,
             "non-finite loss at epoch " + std::to_string(epoch) + ": rec " + fmt(rep.rec) +
                 ", shared " + fmt(rep.shared) + ", align " + fmt(rep.align) + ", orth " +
                 fmt(rep.orth) + ", total " + fmt(rep.total));

      model.params().zero_grad();
      tape.backward(nodes.total);
      const double norm = adam.step();
      if (norm > adam.config().clip_norm) ++el.clipped;

      const double w = static_cast<double>(end - at);
      acc.rec += rep.rec * w;
      acc.shared += rep.shared * w;
      acc.align += rep.align * w;
      acc.orth += rep.orth * w;
      acc.total += rep.total * w;
      if (n_batches == 0) el.train = rep;  // exact values in the single-batch case
    }
    if (n_batches > 1) {
      const double kw = static_cast<double>(k_train);
      el.train.rec = acc.rec / kw;
      el.train.shared = acc.shared / kw;
      el.train.align = acc.align / kw;
      el.train.orth = acc.orth / kw;
      el.train.total = acc.total / kw;
    }
    el.train.epoch = epoch;
    el.train.lambda_orth_eff =
        warmup_coefficient(epoch, c.weights.warmup_epochs, c.weights.orth);

    if (epoch % c.report_interval == 0 || epoch == c.epochs) {
      el.val_total = evaluate_total(model, prep.inputs, val_ids, c);
      if (!std::isfinite(el.val_total))
        fail(ErrorKind::numeric,
             "non-finite validation loss at epoch " + std::to_string(epoch));
      if (el.val_total < best_val) {
        best_val = el.val_total;
        best_epoch = epoch;
        out.best = snapshot(echo, c.mask, epoch, best_val, best_epoch, model, adam, train_rng);
        out.improved = true;
      }
    }
    out.log.push_back(el);
  }

  out.last = snapshot(echo, c.mask, c.epochs, best_val, best_epoch, model, adam, train_rng);
  if (out.improved) {
    out.best.best_val = best_val;
    out.best.best_epoch = best_epoch;
  }
  return out;
}

double validation_loss(const CheckpointRecord& rec, const std::vector<RegionRecording>& data) {
  const TrainConfig c = resolve_config(train_config_from_kv(rec.config_text, "<checkpoint>"), data);
  PreparedRun prep = prepare_run(c, data);
  CtaeModel<double> model(c.model, c.mask);
  apply_params(model, rec);
  return evaluate_total(model, prep.inputs, prep.split[1], c);
}

CtaeModel<double> model_from_checkpoint(const CheckpointRecord& rec) {
  const TrainConfig c = train_config_from_kv(rec.config_text, "<checkpoint>");
  if (c.model.channels.empty() || c.model.t_len == 0)
    fail(ErrorKind::io, "checkpoint config echo is missing the data dimensions");
  c.model.validate(c.mask);
  CtaeModel<double> model(c.model, c.mask);
  apply_params(model, rec);
  return model;
}

void save_checkpoint(const std::string& path, const CheckpointRecord& rec) {
  binio::Writer w;
  w.raw(kCkptMagic, 8);
  w.put<uint32_t>(kCheckpointFormatVersion);
  w.put_string(rec.config_text);
  w.put<uint32_t>(static_cast<uint32_t>(rec.regions));
  w.put<uint32_t>(static_cast<uint32_t>(rec.mask_blocks.size()));
  for (const auto& [code, size] : rec.mask_blocks) {
    w.put<uint32_t>(code);
    w.put<int64_t>(size);
  }
  w.put<int64_t>(rec.epoch);
  w.put<double>(rec.best_val);
  w.put<int64_t>(rec.best_epoch);
  w.put<uint32_t>(static_cast<uint32_t>(rec.params.size()));
  for (const auto& p : rec.params) {
    w.put_string(p.name);
    w.put<uint32_t>(static_cast<uint32_t>(p.shape.size()));
    for (const int64_t d : p.shape) w.put<int64_t>(d);
    w.put_f64s(p.value);
  }
  w.put<int64_t>(rec.opt.t);
  w.put<int64_t>(static_cast<int64_t>(rec.opt.m.size()));
  w.put_f64s(rec.opt.m);
  w.put_f64s(rec.opt.v);
  w.put_string(rec.rng_state);
  w.finish(path);
}

CheckpointRecord load_checkpoint(const std::string& path) {
  binio::Reader rd(path, kCkptMagic);
  rd.check_version(rd.get<uint32_t>(), kCheckpointFormatVersion);
  CheckpointRecord rec;
  rec.config_text = rd.get_string();
  rec.regions = rd.get<uint32_t>();
  const uint32_t n_blocks = rd.get<uint32_t>();
  if (n_blocks == 0 || n_blocks > 1024) fail(ErrorKind::io, "implausible block count in " + path);
  for (uint32_t b = 0; b < n_blocks; ++b) {
    const uint32_t code = rd.get<uint32_t>();
    const int64_t size = binio::checked_dim(rd.get<int64_t>(), "block size", path);
    rec.mask_blocks.push_back({code, size});
  }
  rec.epoch = binio::checked_dim(rd.get<int64_t>(), "epoch", path);
  rec.best_val = rd.get<double>();
  rec.best_epoch = rd.get<int64_t>();
  const uint32_t n_params = rd.get<uint32_t>();
  if (n_params > (1u << 20)) fail(ErrorKind::io, "implausible parameter count in " + path);
  for (uint32_t i = 0; i < n_params; ++i) {
    Parameter<double> p;
    p.name = rd.get_string(4096);
    const uint32_t ndim = rd.get<uint32_t>();
    if (ndim > 8) fail(ErrorKind::io, "implausible parameter rank in " + path);
    int64_t n = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      p.shape.push_back(binio::checked_dim(rd.get<int64_t>(), "parameter dim", path));
      n *= p.shape.back();
    }
    rd.get_f64s(p.value, static_cast<size_t>(n));
    rec.params.push_back(std::move(p));
  }
  rec.opt.t = binio::checked_dim(rd.get<int64_t>(), "step count", path);
  const int64_t n_opt = binio::checked_dim(rd.get<int64_t>(), "optimizer size", path);
  rd.get_f64s(rec.opt.m, static_cast<size_t>(n_opt));
  rd.get_f64s(rec.opt.v, static_cast<size_t>(n_opt));
  rec.rng_state = rd.get_string(1 << 16);  // a serialized mt19937_64 state is ~6.5 KB
  rd.expect_end();
  return rec;
}

void write_training_log(const std::string& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open training log for writing: " + path);
  out << "epoch,rec,shared,align,orth,lambda_orth_eff,total,val_total,clipped\n";
  for (const auto& el : log) {
    out << el.train.epoch << ',' << fmt(el.train.rec) << ',' << fmt(el.train.shared) << ','
        << fmt(el.train.align) << ',' << fmt(el.train.orth) << ','
        << fmt(el.train.lambda_orth_eff) << ',' << fmt(el.train.total) << ',';
    if (std::isfinite(el.val_total)) out << fmt(el.val_total);
    out << ',' << el.clipped << '\n';
  }
  if (!out) fail(ErrorKind::io, "write failed: " + path);
}

}  // namespace ctae
