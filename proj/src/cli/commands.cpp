#include "cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "common/errors.hpp"
#include "common/hash.hpp"
#include "common/kvconfig.hpp"
#include "common/version.hpp"
#include "datasets/container.hpp"
#include "datasets/synthetic.hpp"
#include "evalkit/evalkit.hpp"
#include "seqmodel/masks.hpp"
#include "trainer/grid.hpp"
#include "trainer/trainer.hpp"

namespace ctae {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

std::string join(const std::vector<std::string>& parts) {
  std::string s;
  for (size_t i = 0; i < parts.size(); ++i) s += (i ? "," : "") + parts[i];
  return s;
}

std::string abs_path(const std::string& p) {
  std::error_code ec;
  fs::path a = fs::absolute(p, ec);
  return ec ? p : a.lexically_normal().string();
}

KvConfig config_from(const std::string& path, const std::string& text) {
  if (!path.empty()) return KvConfig::from_file(path);
  return KvConfig::from_string(text, "<manifest>");
}

uint64_t file_bytes_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return fnv1a64(buf.str());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  out << text;
  if (!out.flush()) fail(ErrorKind::io, "short write to " + path);
}

void write_json(const std::string& path, const ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::string mask_text(const MembershipMask& m) {
  std::string s;
  for (size_t b = 0; b < m.codes.size(); ++b) {
    if (b) s += ",";
    s += MembershipMask::code_str(m.codes[b], m.regions) + ":" + std::to_string(m.block_sizes[b]);
  }
  return s;
}

// Creates the run directory, stamps the envelope, and writes the manifest on
// both the success and the failure path.
std::string with_manifest(RunManifest man, const std::string& out_root,
                          const std::function<void(const std::string&, RunManifest&)>& work) {
  man.run_dir = make_run_dir(man.command, config_hash(man.config_text), out_root);
  man.started_utc = utc_timestamp();
  try {
    work(man.run_dir, man);
  } catch (const Error& e) {
    man.finished_utc = utc_timestamp();
    man.exit_status = static_cast<int>(e.kind());
    try {
      write_manifest(man);
    } catch (...) {
    }
    throw;
  }
  man.finished_utc = utc_timestamp();
  man.exit_status = 0;
  write_manifest(man);
  return man.run_dir;
}

SyntheticSpec synth_spec_from_kv(KvConfig& kv) {
  SyntheticSpec spec;
  const std::string blocks = kv.get_string("synth.blocks");
  int64_t regions = -1;
  std::stringstream ss(blocks);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      fail(ErrorKind::config, "synth.blocks entry '" + item + "' must be code:size");
    const std::string bits = item.substr(0, colon);
    if (regions < 0) regions = static_cast<int64_t>(bits.size());
    const uint32_t code = MembershipMask::parse_code(bits, regions);
    int64_t size = 0;
    try {
      size = std::stoll(item.substr(colon + 1));
    } catch (const std::exception&) {
      fail(ErrorKind::config, "synth.blocks entry '" + item + "' has a bad size");
    }
    spec.subset_sizes.emplace_back(code, size);
  }
  if (regions < 1) fail(ErrorKind::config, "synth.blocks is empty");
  spec.regions = regions;
  spec.trials = kv.get_int("synth.trials");
  spec.t_len = kv.get_int("synth.t_len");
  spec.channels = kv.get_int_list("synth.channels");
  spec.kernel = kv.get_int("synth.kernel", 3);
  spec.mixing = kv.get_string("synth.mixing", "tanh");
  spec.noise_std = kv.get_double("synth.noise_std", 0.05);
  spec.conditions = kv.get_int("synth.conditions", 1);
  spec.bin_ms = kv.get_double("synth.bin_ms", 100.0);
  spec.seed = static_cast<uint64_t>(std::stoull(kv.get_string("synth.seed", "0")));
  kv.finish();
  spec.validate();
  return spec;
}

std::string synth_to_kv(const SyntheticSpec& spec) {
  KvConfig kv;
  std::string blocks;
  for (size_t i = 0; i < spec.subset_sizes.size(); ++i) {
    if (i) blocks += ",";
    blocks += MembershipMask::code_str(spec.subset_sizes[i].first, spec.regions) + ":" +
              std::to_string(spec.subset_sizes[i].second);
  }
  kv.set("synth.blocks", blocks);
  kv.set("synth.trials", std::to_string(spec.trials));
  kv.set("synth.t_len", std::to_string(spec.t_len));
  std::string chans;
  for (size_t i = 0; i < spec.channels.size(); ++i)
    chans += (i ? "," : "") + std::to_string(spec.channels[i]);
  kv.set("synth.channels", chans);
  kv.set("synth.kernel", std::to_string(spec.kernel));
  kv.set("synth.mixing", spec.mixing);
  kv.set("synth.noise_std", fmt(spec.noise_std));
  kv.set("synth.conditions", std::to_string(spec.conditions));
  kv.set("synth.bin_ms", fmt(spec.bin_ms));
  kv.set("synth.seed", std::to_string(spec.seed));
  return kv.canonical_text();
}

// shared | private-<k> (1-based) | private:<r> | block:<bits> | all
std::string subspace_source(const std::string& name) {
  if (name == "shared" || name == "all") return name;
  if (name.rfind("private-", 0) == 0) {
    int64_t k = 0;
    try {
      k = std::stoll(name.substr(8));
    } catch (const std::exception&) {
      fail(ErrorKind::config, "bad subspace '" + name + "'");
    }
    if (k < 1) fail(ErrorKind::config, "subspace '" + name + "' is 1-based");
    return "private:" + std::to_string(k - 1);
  }
  if (name.rfind("private:", 0) == 0 || name.rfind("block:", 0) == 0) return name;
  fail(ErrorKind::config, "unknown subspace '" + name + "'");
}

ordered_json decode_json(const DecodeReport& rep, bool confusion) {
  ordered_json j;
  j["mean"] = rep.mean;
  j["sd"] = rep.sd;
  j["fold_scores"] = rep.fold_scores;
  j["degenerate"] = rep.degenerate;
  if (confusion) {
    j["accuracy"] = rep.accuracy;
    j["classes"] = rep.classes;
    ordered_json rows = ordered_json::array();
    const int64_t c = static_cast<int64_t>(rep.classes.size());
    for (int64_t i = 0; i < c; ++i) {
      ordered_json row = ordered_json::array();
      for (int64_t k = 0; k < c; ++k)
        row.push_back(rep.confusion.data[static_cast<size_t>(i * c + k)]);
      rows.push_back(row);
    }
    j["confusion"] = rows;
  }
  return j;
}

ordered_json matrix_json(const DenseArray<double>& m) {
  ordered_json rows = ordered_json::array();
  const int64_t r = m.shape[0], c = m.shape[1];
  for (int64_t i = 0; i < r; ++i) {
    ordered_json row = ordered_json::array();
    for (int64_t k = 0; k < c; ++k) row.push_back(m.data[static_cast<size_t>(i * c + k)]);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::string run_synth(const SynthOptions& opts) {
  KvConfig kv = config_from(opts.config_path, opts.config_text);
  if (opts.seed >= 0) kv.set("synth.seed", std::to_string(opts.seed));
  const SyntheticSpec spec = synth_spec_from_kv(kv);

  RunManifest man;
  man.command = "synth";
  man.config_text = synth_to_kv(spec);
  man.seed = spec.seed;
  if (!opts.config_path.empty()) man.inputs["config"] = abs_path(opts.config_path);

  return with_manifest(std::move(man), opts.out_root,
                       [&](const std::string& dir, RunManifest& m) {
                         const SyntheticData data = generate_synthetic(spec);
                         save_container(dir + "/data.ctae", data.regions);
                         save_ground_truth(dir + "/truth.ctgt", data.truth);
                         m.outputs = {"data.ctae", "truth.ctgt"};
                       });
}

std::string run_train(const TrainOptions& opts) {
  if (opts.data_path.empty()) fail(ErrorKind::config, "train needs a data container");
  KvConfig kv = config_from(opts.config_path, opts.config_text);
  if (opts.seed >= 0) kv.set("train.seed", std::to_string(opts.seed));
  if (opts.epochs_override > 0) kv.set("train.epochs", std::to_string(opts.epochs_override));
  const std::string origin = opts.config_path.empty() ? "<manifest>" : opts.config_path;
  const TrainConfig cfg = train_config_from_kv(kv.canonical_text(), origin);

  const auto data = load_container(opts.data_path);
  if (opts.regions > 0 && static_cast<int64_t>(data.size()) != opts.regions)
    fail(ErrorKind::config, "expected " + std::to_string(opts.regions) +
                                " regions, container has " + std::to_string(data.size()));
  const TrainConfig resolved = resolve_config(cfg, data);

  RunManifest man;
  man.command = "train";
  man.config_text = to_kv_text(resolved);
  man.seed = resolved.seed;
  man.inputs["data"] = abs_path(opts.data_path);
  if (!opts.config_path.empty()) man.inputs["config"] = abs_path(opts.config_path);
  if (opts.epochs_override >= 0) man.params["epochs_override"] = std::to_string(opts.epochs_override);
  if (opts.regions > 0) man.params["regions"] = std::to_string(opts.regions);

  return with_manifest(std::move(man), opts.out_root, [&](const std::string& dir, RunManifest& m) {
    if (opts.epochs_override == 0) {
      save_checkpoint(dir + "/last.ckpt", initial_checkpoint(resolved, data));
      write_training_log(dir + "/training_log.csv", {});
      m.outputs = {"last.ckpt", "training_log.csv"};
      return;
    }
    const TrainOutcome out = train(resolved, data);
    save_checkpoint(dir + "/last.ckpt", out.last);
    m.outputs = {"last.ckpt"};
    if (out.improved) {
      save_checkpoint(dir + "/best.ckpt", out.best);
      m.outputs.push_back("best.ckpt");
    }
    write_training_log(dir + "/training_log.csv", out.log);
    m.outputs.push_back("training_log.csv");
  });
}

std::string run_grid(const GridOptions& opts) {
  if (opts.data_path.empty()) fail(ErrorKind::config, "grid needs a data container");
  KvConfig kv = config_from(opts.config_path, opts.config_text);
  if (opts.seed >= 0) kv.set("train.seed", std::to_string(opts.seed));
  const std::string combined = kv.canonical_text();

  // split the grid axes from the base training config
  std::string grid_text, base_text;
  for (const auto& [key, value] : kv.entries())
    (key.rfind("grid.", 0) == 0 ? grid_text : base_text) += key + " = " + value + "\n";

  KvConfig gkv = KvConfig::from_string(grid_text, "<grid>");
  GridSpec grid;
  grid.layers = gkv.get_int_list("grid.layers", {1});
  grid.latent_dims = gkv.get_int_list("grid.latent_dims", {});
  grid.lambda_shared = gkv.get_double_list("grid.lambda_shared", {1.0});
  grid.lambda_align = gkv.get_double_list("grid.lambda_align", {0.5});
  grid.lambda_orth = gkv.get_double_list("grid.lambda_orth", {0.01});
  grid.learning_rates = gkv.get_double_list("grid.learning_rates", {1e-4});
  grid.warmups = gkv.get_int_list("grid.warmups", {100});
  grid.epochs_cap = gkv.get_int("grid.epochs_cap", 0);
  gkv.finish();

  const std::string origin = opts.config_path.empty() ? "<manifest>" : opts.config_path;
  const TrainConfig base = train_config_from_kv(base_text, origin);
  const auto data = load_container(opts.data_path);

  RunManifest man;
  man.command = "grid";
  man.config_text = combined;
  man.seed = base.seed;
  man.inputs["data"] = abs_path(opts.data_path);
  if (!opts.config_path.empty()) man.inputs["config"] = abs_path(opts.config_path);
  man.params["jobs"] = std::to_string(opts.jobs);

  // the cell cache outlives the run so an interrupted search resumes
  const fs::path cache_root = fs::path(opts.out_root.empty() ? output_root() : opts.out_root) /
                              "gridcache" /
                              (config_hash(combined) + "-" + hex16(file_bytes_hash(opts.data_path)));
  std::error_code ec;
  fs::create_directories(cache_root, ec);
  if (ec) fail(ErrorKind::io, "cannot create " + cache_root.string() + ": " + ec.message());
  man.params["cache_dir"] = abs_path(cache_root.string());

  return with_manifest(std::move(man), opts.out_root, [&](const std::string& dir, RunManifest& m) {
    const GridOutcome out =
        grid_search(base, grid, data, static_cast<int>(opts.jobs), cache_root.string());

    ordered_json ranked = ordered_json::array();
    for (size_t i = 0; i < out.ranked.size(); ++i) {
      const GridCellResult& r = out.ranked[i];
      ordered_json cell;
      cell["rank"] = i;
      cell["cell_index"] = r.cell_index;
      cell["config_hash"] = r.config_hash;
      cell["layers"] = r.config.model.layers;
      cell["mask"] = mask_text(r.config.mask);
      cell["lambda_shared"] = r.config.weights.shared;
      cell["lambda_align"] = r.config.weights.align;
      cell["lambda_orth"] = r.config.weights.orth;
      cell["lr"] = r.config.lr;
      cell["warmup"] = r.config.weights.warmup_epochs;
      cell["epochs"] = r.config.epochs;
      cell["diverged"] = r.diverged;
      if (r.diverged)
        cell["error"] = r.error;
      else
        cell["val_total"] = r.val_total;
      ranked.push_back(cell);
    }
    ordered_json j;
    j["format_version"] = kReportFormatVersion;
    j["program_version"] = kProgramVersion;
    j["cells"] = out.ranked.size();
    j["ranked"] = ranked;
    write_json(dir + "/grid_results.json", j);
    m.outputs = {"grid_results.json"};
    if (!out.ranked.empty() && !out.ranked.front().diverged) {
      save_checkpoint(dir + "/best.ckpt", out.ranked.front().best);
      m.outputs.push_back("best.ckpt");
    }
  });
}

std::string run_eval(const EvalOptions& opts) {
  if (opts.checkpoint_path.empty() || opts.data_path.empty())
    fail(ErrorKind::config, "eval needs a checkpoint and a data container");
  KvConfig kv = (opts.config_path.empty() && opts.config_text.empty())
                    ? KvConfig::from_string("", "<default>")
                    : config_from(opts.config_path, opts.config_text);
  if (!opts.subspace.empty()) kv.set("eval.subspace", opts.subspace);
  if (!opts.tasks.empty()) kv.set("eval.tasks", join(opts.tasks));
  if (opts.window > 0) kv.set("eval.window", std::to_string(opts.window));

  std::vector<std::string> default_tasks = {"discrete", "gram", "alignment", "variance"};
  if (!opts.truth_path.empty()) default_tasks.push_back("recovery");
  std::vector<std::string> tasks = kv.get_string_list("eval.tasks", default_tasks);
  if (opts.time_resolved && std::find(tasks.begin(), tasks.end(), "time_resolved") == tasks.end())
    tasks.push_back("time_resolved");
  const std::string source = subspace_source(kv.get_string("eval.subspace", "shared"));
  const int64_t window = kv.get_int("eval.window", 5);
  const int64_t folds = kv.get_int("eval.folds", 5);
  const uint64_t seed = static_cast<uint64_t>(std::stoull(kv.get_string("eval.seed", "0")));
  kv.finish();

  KvConfig echo;
  echo.set("eval.tasks", join(tasks));
  echo.set("eval.subspace", source);
  echo.set("eval.window", std::to_string(window));
  echo.set("eval.folds", std::to_string(folds));
  echo.set("eval.seed", std::to_string(seed));

  const CheckpointRecord rec = load_checkpoint(opts.checkpoint_path);
  const auto data = load_container(opts.data_path);
  const TrainConfig tcfg = train_config_from_kv(rec.config_text, "<checkpoint>");
  const TrainConfig resolved = resolve_config(tcfg, data);

  RunManifest man;
  man.command = "eval";
  man.config_text = echo.canonical_text();
  man.seed = seed;
  man.inputs["checkpoint"] = abs_path(opts.checkpoint_path);
  man.inputs["data"] = abs_path(opts.data_path);
  if (!opts.truth_path.empty()) man.inputs["truth"] = abs_path(opts.truth_path);
  if (!opts.config_path.empty()) man.inputs["config"] = abs_path(opts.config_path);
  const auto span = block_span(resolved.mask, source);
  man.params["subspace"] = source;
  man.params["feature_dims"] = std::to_string(span.first) + ":" + std::to_string(span.second);
  man.params["tasks"] = join(tasks);

  return with_manifest(std::move(man), opts.out_root, [&](const std::string& dir, RunManifest& m) {
    const PreparedRun prep = prepare_run(resolved, data);
    CtaeModel<double> model = model_from_checkpoint(rec);
    const LatentValues<double> lat = model.infer_latents(prep.inputs);
    const FeatureView feats = features_from_latents(lat.fused, resolved.mask, source);
    const std::vector<int64_t>& labels = data[0].labels;

    ordered_json report;
    report["format_version"] = kReportFormatVersion;
    report["program_version"] = kProgramVersion;
    report["subspace"] = source;
    report["feature_dims"] = {{"offset", span.first}, {"size", span.second}};
    ordered_json& tj = report["tasks"] = ordered_json::object();

    bool curve_written = false;
    for (const std::string& task : tasks) {
      if (task == "discrete") {
        if (labels.empty()) fail(ErrorKind::config, "discrete task needs labeled trials");
        tj["discrete"] = decode_json(fit_logistic_decoder(feats, labels, folds, seed), true);
      } else if (task == "gram") {
        const GramDiagnostics g = gram_diagnostics(lat.fused, resolved.mask);
        ordered_json gj;
        gj["off_diagonal_mean"] = g.off_diagonal_mean;
        gj["collapsed"] = g.collapsed;
        gj["blocks"] = mask_text(resolved.mask);
        gj["block_pairs"] = matrix_json(g.block_pairs);
        gj["mean_abs"] = matrix_json(g.mean_abs);
        tj["gram"] = gj;
      } else if (task == "alignment") {
        const AlignmentDiagnostics a = alignment_diagnostics(lat, resolved.mask);
        ordered_json aj;
        aj["overall"] = a.overall;
        aj["per_region"] = matrix_json(a.per_region);
        tj["alignment"] = aj;
      } else if (task == "variance") {
        const VarianceReport v = variance_per_latent(lat.fused);
        ordered_json vj;
        vj["d_eff"] = v.d_eff;
        vj["fractions"] = v.fractions;
        vj["per_dim"] = v.per_dim;
        tj["variance"] = vj;
      } else if (task == "recovery") {
        if (opts.truth_path.empty()) fail(ErrorKind::config, "recovery task needs a ground-truth file");
        const GroundTruth truth = load_ground_truth(opts.truth_path);
        const auto pspan = block_span(truth.mask, "shared");
        const DenseArray<double> planted = slice_rows(truth.latents, pspan.first, pspan.second);
        const FeatureView shared = features_from_latents(lat.fused, resolved.mask, "shared");
        ordered_json rj;
        rj["shared_r2"] = subspace_recovery(shared.values, planted, folds).r2;
        ordered_json leak = ordered_json::object(), priv = ordered_json::object();
        for (int64_t r = 0; r < resolved.mask.regions; ++r) {
          const std::string name = "private:" + std::to_string(r);
          const FeatureView pf = features_from_latents(lat.fused, resolved.mask, name);
          leak[name] = subspace_recovery(pf.values, planted, folds).r2;
          const auto tspan = block_span(truth.mask, name);
          const DenseArray<double> planted_p = slice_rows(truth.latents, tspan.first, tspan.second);
          priv[name] = subspace_recovery(pf.values, planted_p, folds).r2;
        }
        rj["leakage_r2"] = leak;
        rj["private_r2"] = priv;
        tj["recovery"] = rj;
      } else if (task == "time_resolved") {
        if (labels.empty()) fail(ErrorKind::config, "time_resolved task needs labeled trials");
        const TimeCurve curve = time_resolved_decoding(feats, labels, window, folds, seed);
        std::ostringstream csv;
        csv << "bin,accuracy,sd,truncated\n" << std::setprecision(17);
        for (size_t t = 0; t < curve.accuracy.size(); ++t)
          csv << t << "," << curve.accuracy[t] << "," << curve.sd[t] << ","
              << int(curve.truncated[t]) << "\n";
        write_text(dir + "/curve.csv", csv.str());
        curve_written = true;
        ordered_json cj;
        cj["window"] = window;
        cj["full_accuracy"] = curve.full_accuracy;
        cj["bins"] = curve.accuracy.size();
        tj["time_resolved"] = cj;
      } else {
        fail(ErrorKind::config, "unknown eval task '" + task + "'");
      }
    }
    write_json(dir + "/report.json", report);
    m.outputs = {"report.json"};
    if (curve_written) m.outputs.push_back("curve.csv");
  });
}

std::string run_ablate(const AblateOptions& opts) {
  if (opts.data_path.empty()) fail(ErrorKind::config, "ablate needs a data container");
  KvConfig kv = config_from(opts.config_path, opts.config_text);
  if (opts.seed >= 0) kv.set("train.seed", std::to_string(opts.seed));
  const std::string origin = opts.config_path.empty() ? "<manifest>" : opts.config_path;
  const TrainConfig cfg = train_config_from_kv(kv.canonical_text(), origin);
  const auto data = load_container(opts.data_path);
  const TrainConfig resolved = resolve_config(cfg, data);
  if (data[0].labels.empty()) fail(ErrorKind::config, "ablate needs labeled trials");

  RunManifest man;
  man.command = "ablate";
  man.config_text = to_kv_text(resolved);
  man.seed = resolved.seed;
  man.inputs["data"] = abs_path(opts.data_path);
  if (!opts.config_path.empty()) man.inputs["config"] = abs_path(opts.config_path);
  man.params["folds"] = std::to_string(opts.folds);

  return with_manifest(std::move(man), opts.out_root, [&](const std::string& dir, RunManifest& m) {
    std::error_code ec;
    fs::create_directory(fs::path(dir) / "variants", ec);
    if (ec) fail(ErrorKind::io, "cannot create " + dir + "/variants: " + ec.message());

    struct Variant {
      const char* name;
      double LossWeights::*knob;  // zeroed for the ablated runs
    };
    const Variant variants[] = {{"full", nullptr},
                                {"no_shared", &LossWeights::shared},
                                {"no_align", &LossWeights::align},
                                {"no_orth", &LossWeights::orth}};

    ordered_json rows = ordered_json::array();
    m.outputs = {"ablation.json"};
    for (const Variant& v : variants) {
      TrainConfig vc = resolved;
      if (v.knob) vc.weights.*v.knob = 0.0;
      const TrainOutcome out = train(vc, data);
      const std::string ckpt = std::string("variants/") + v.name + ".ckpt";
      save_checkpoint(dir + "/" + ckpt, out.last);
      m.outputs.push_back(ckpt);

      CtaeModel<double> model = model_from_checkpoint(out.last);
      const PreparedRun prep = prepare_run(vc, data);
      const LatentValues<double> lat = model.infer_latents(prep.inputs);

      ordered_json row;
      row["variant"] = v.name;
      row["lambda_shared"] = vc.weights.shared;
      row["lambda_align"] = vc.weights.align;
      row["lambda_orth"] = vc.weights.orth;
      const FeatureView sf = features_from_latents(lat.fused, vc.mask, "shared");
      row["shared"] = decode_json(
          fit_logistic_decoder(sf, data[0].labels, opts.folds, resolved.seed), false);
      for (int64_t r = 0; r < vc.mask.regions; ++r) {
        const FeatureView pf =
            features_from_latents(lat.fused, vc.mask, "private:" + std::to_string(r));
        row["private-" + std::to_string(r + 1)] = decode_json(
            fit_logistic_decoder(pf, data[0].labels, opts.folds, resolved.seed), false);
      }
      row["gram_off_diagonal"] = gram_diagnostics(lat.fused, vc.mask).off_diagonal_mean;
      rows.push_back(row);
    }

    ordered_json j;
    j["format_version"] = kReportFormatVersion;
    j["program_version"] = kProgramVersion;
    j["rows"] = rows;
    write_json(dir + "/ablation.json", j);
  });
}

std::string run_replay(const std::string& manifest_path, const std::string& out_root) {
  const RunManifest man = read_manifest(manifest_path);
  const auto p_int = [&](const char* key, int64_t dflt) -> int64_t {
    const auto it = man.params.find(key);
    return it == man.params.end() ? dflt : std::stoll(it->second);
  };
  const auto input = [&](const char* key, bool required = true) -> std::string {
    const auto it = man.inputs.find(key);
    if (it == man.inputs.end()) {
      if (required)
        fail(ErrorKind::config, "manifest " + manifest_path + " lacks input '" + key + "'");
      return "";
    }
    return it->second;
  };

  if (man.command == "synth") {
    SynthOptions o;
    o.config_text = man.config_text;
    o.out_root = out_root;
    return run_synth(o);
  }
  if (man.command == "train") {
    TrainOptions o;
    o.config_text = man.config_text;
    o.data_path = input("data");
    o.out_root = out_root;
    o.epochs_override = p_int("epochs_override", -1);
    o.regions = p_int("regions", 0);
    return run_train(o);
  }
  if (man.command == "grid") {
    GridOptions o;
    o.config_text = man.config_text;
    o.data_path = input("data");
    o.out_root = out_root;
    o.jobs = p_int("jobs", 1);
    return run_grid(o);
  }
  if (man.command == "eval") {
    EvalOptions o;
    o.checkpoint_path = input("checkpoint");
    o.data_path = input("data");
    o.truth_path = input("truth", false);
    o.config_text = man.config_text;
    o.out_root = out_root;
    return run_eval(o);
  }
  if (man.command == "ablate") {
    AblateOptions o;
    o.config_text = man.config_text;
    o.data_path = input("data");
    o.out_root = out_root;
    o.folds = p_int("folds", 5);
    return run_ablate(o);
  }
  fail(ErrorKind::config, "manifest command '" + man.command + "' is not replayable");
}

}  // namespace ctae
