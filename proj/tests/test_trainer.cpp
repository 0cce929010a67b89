#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "common/hash.hpp"
#include "datasets/synthetic.hpp"
#include "trainer/grid.hpp"
#include "trainer/trainer.hpp"

using namespace ctae;

namespace {

std::string temp_path(const std::string& tag) {
  return "/tmp/ctae_trainer_" + tag + "_" + std::to_string(::getpid());
}

std::vector<RegionRecording> tiny_data(uint64_t seed = 11, int64_t trials = 20) {
  SyntheticSpec spec;
  spec.subset_sizes = {{3u, 1}, {2u, 1}, {1u, 1}};
  spec.trials = trials;
  spec.t_len = 12;
  spec.channels = {5, 5};
  spec.mixing = "tanh";
  spec.noise_std = 0.05;
  spec.conditions = 2;
  spec.seed = seed;
  return generate_synthetic(spec).regions;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.model.d_model = 8;
  cfg.model.heads = 2;
  cfg.model.ff = 16;
  cfg.model.layers = 1;
  cfg.model.dropout = 0.0;
  cfg.mask = build_two_region_masks(1, 1, 1);
  cfg.weights.shared = 1.0;
  cfg.weights.align = 0.5;
  cfg.weights.orth = 0.01;
  cfg.weights.warmup_epochs = 4;
  cfg.lr = 1e-3;
  cfg.epochs = 10;
  cfg.seed = 21;
  cfg.report_interval = 5;
  return cfg;
}

bool params_equal(const std::vector<Parameter<double>>& a,
                  const std::vector<Parameter<double>>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].shape != b[i].shape) return false;
    if (a[i].value.size() != b[i].value.size()) return false;
    if (std::memcmp(a[i].value.data(), b[i].value.data(),
                    a[i].value.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

bool logs_equal(const std::vector<EpochLog>& a, const std::vector<EpochLog>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i].train;
    const auto& y = b[i].train;
    if (x.epoch != y.epoch || x.rec != y.rec || x.shared != y.shared || x.align != y.align ||
        x.orth != y.orth || x.lambda_orth_eff != y.lambda_orth_eff || x.total != y.total)
      return false;
    const bool xv = std::isfinite(a[i].val_total), yv = std::isfinite(b[i].val_total);
    if (xv != yv || (xv && a[i].val_total != b[i].val_total)) return false;
    if (a[i].clipped != b[i].clipped) return false;
  }
  return true;
}

void patch_and_fix_crc(std::vector<unsigned char>& bytes, size_t offset,
                       const std::vector<unsigned char>& patch) {
  std::copy(patch.begin(), patch.end(), bytes.begin() + static_cast<ptrdiff_t>(offset));
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0L, bytes.data(), static_cast<uInt>(bytes.size() - 4)));
  for (int i = 0; i < 4; ++i)
    bytes[bytes.size() - 4 + static_cast<size_t>(i)] =
        static_cast<unsigned char>((crc >> (8 * i)) & 0xff);
}

}  // namespace

TEST_CASE("config echo round trip") {
  TrainConfig cfg = tiny_config();
  cfg.model.channels = {5, 5};
  cfg.model.t_len = 12;
  const std::string text = to_kv_text(cfg);
  const TrainConfig back = train_config_from_kv(text, "<test>");
  CHECK(to_kv_text(back) == text);
  CHECK(back.model.d_model == 8);
  CHECK(back.mask.codes == cfg.mask.codes);
  CHECK(back.mask.block_sizes == cfg.mask.block_sizes);
  CHECK(back.weights.align == 0.5);
  CHECK(back.lr == 1e-3);
  CHECK(back.seed == 21);
  CHECK(config_hash(text) == config_hash(to_kv_text(back)));

  CHECK_THROWS_AS(train_config_from_kv("mask.blocks = 11:1\nunknown.key = 3\n", "<t>"), Error);
  CHECK_THROWS_AS(train_config_from_kv("mask.blocks = nocolon\n", "<t>"), Error);
  CHECK_THROWS_AS(train_config_from_kv("mask.blocks = 2:1\n", "<t>"), Error);  // not binary
}

TEST_CASE("default latent layout") {
  auto m = default_latent_layout(2, 15);
  CHECK(m.codes == std::vector<uint32_t>{3, 2, 1});
  CHECK(m.block_sizes == std::vector<int64_t>{5, 5, 5});
  m = default_latent_layout(2, 10);
  CHECK(m.block_sizes == std::vector<int64_t>{4, 3, 3});
  m = default_latent_layout(2, 5);
  CHECK(m.block_sizes == std::vector<int64_t>{3, 1, 1});
  m = default_latent_layout(2, 1);
  CHECK(m.block_sizes == std::vector<int64_t>{1, 0, 0});
  CHECK(m.dim == 1);
  m = default_latent_layout(3, 8);
  CHECK(m.codes == std::vector<uint32_t>{7, 4, 2, 1});
  CHECK(m.block_sizes == std::vector<int64_t>{2, 2, 2, 2});
  CHECK_THROWS_AS(default_latent_layout(1, 5), Error);
  CHECK_THROWS_AS(default_latent_layout(2, 0), Error);
}

TEST_CASE("standardizers") {
  const auto data = tiny_data();
  const std::vector<int64_t> train_ids = {0, 1, 2, 3, 4, 5, 6, 7};

  SUBCASE("z-scores the train split") {
    const auto sm = fit_standardizers(data, train_ids, true);
    const auto inputs = prepare_inputs(data, sm);
    REQUIRE(inputs.size() == 2);
    CHECK(inputs[0].shape == std::vector<int64_t>({20, 12, 5}));
    for (size_t r = 0; r < data.size(); ++r)
      for (int64_t n = 0; n < data[r].channels; ++n) {
        double sum = 0, sq = 0;
        for (const int64_t k : train_ids)
          for (int64_t t = 0; t < 12; ++t) {
            const double v = inputs[r].data[static_cast<size_t>((k * 12 + t) * 5 + n)];
            sum += v;
            sq += v * v;
          }
        const double m = static_cast<double>(train_ids.size() * 12);
        CHECK(std::abs(sum / m) < 1e-12);
        CHECK(sq / m == doctest::Approx(1.0).epsilon(1e-9));
      }
  }

  SUBCASE("disabled mode only transposes") {
    const auto sm = fit_standardizers(data, train_ids, false);
    const auto inputs = prepare_inputs(data, sm);
    for (int64_t k = 0; k < 3; ++k)
      for (int64_t n = 0; n < 5; ++n)
        for (int64_t t = 0; t < 12; ++t)
          CHECK(inputs[0].data[static_cast<size_t>((k * 12 + t) * 5 + n)] ==
                data[0].values.data[static_cast<size_t>((k * 5 + n) * 12 + t)]);
  }

  SUBCASE("constant channel does not blow up") {
    auto flat = data;
    for (int64_t k = 0; k < flat[0].trials; ++k)
      for (int64_t t = 0; t < 12; ++t)
        flat[0].values.data[static_cast<size_t>((k * 5 + 2) * 12 + t)] = 3.5;
    const auto sm = fit_standardizers(flat, train_ids, true);
    CHECK(sm[0].scale[2] == 1.0);
    const auto inputs = prepare_inputs(flat, sm);
    for (int64_t t = 0; t < 12; ++t)
      CHECK(inputs[0].data[static_cast<size_t>(t * 5 + 2)] == 0.0);
  }

  CHECK_THROWS_AS(fit_standardizers(data, {}, true), Error);
}

TEST_CASE("decoupled training reduces reconstruction loss") {
  const auto data = tiny_data();
  TrainConfig cfg = tiny_config();
  cfg.weights = {};  // all couplings off -> two independent autoencoders
  cfg.weights.warmup_epochs = 1;
  cfg.epochs = 200;
  cfg.report_interval = 50;
  const auto out = train(cfg, data);
  REQUIRE(out.log.size() == 200);
  CHECK(out.log.back().train.rec < 0.8 * out.log.front().train.rec);
  for (const auto& el : out.log) {
    CHECK(el.train.total == el.train.rec);  // no other active term
    CHECK(el.train.shared == 0.0);
    CHECK(el.train.lambda_orth_eff == 0.0);
  }
}

TEST_CASE("training is deterministic in the seed") {
  const auto data = tiny_data();
  TrainConfig cfg = tiny_config();
  cfg.model.dropout = 0.1;  // exercise the dropout stream too
  const auto a = train(cfg, data);
  const auto b = train(cfg, data);
  CHECK(logs_equal(a.log, b.log));
  CHECK(params_equal(a.last.params, b.last.params));
  CHECK(a.last.rng_state == b.last.rng_state);

  cfg.seed = 22;
  const auto c = train(cfg, data);
  CHECK_FALSE(logs_equal(a.log, c.log));
}

TEST_CASE("split and schedule bookkeeping") {
  const auto data = tiny_data();
  TrainConfig cfg = tiny_config();
  cfg.weights.orth = 0.5;
  cfg.epochs = 12;
  cfg.report_interval = 5;
  const auto out = train(cfg, data);

  // 70/15/15 of 20 trials, stratified over 2 balanced classes
  REQUIRE(out.split.size() == 3);
  CHECK(out.split[0].size() == 14);
  CHECK(out.split[1].size() == 4);
  CHECK(out.split[2].size() == 2);
  std::set<int64_t> seen;
  for (const auto& s : out.split)
    for (const int64_t i : s) CHECK(seen.insert(i).second);
  CHECK(seen.size() == 20);

  // warm-up schedule is logged exactly; validation on the cadence only
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < out.log.size(); ++i) {
    const int64_t epoch = static_cast<int64_t>(i) + 1;
    CHECK(out.log[i].train.epoch == epoch);
    CHECK(out.log[i].train.lambda_orth_eff == warmup_coefficient(epoch, 4, 0.5));
    const bool expect_val = epoch % 5 == 0 || epoch == 12;
    CHECK(std::isfinite(out.log[i].val_total) == expect_val);
    if (expect_val) best = std::min(best, out.log[i].val_total);
  }
  CHECK(out.improved);
  CHECK(out.best.best_val == best);
  CHECK(out.best.best_epoch >= 1);
  CHECK(out.best.epoch == out.best.best_epoch);
  CHECK(out.last.epoch == 12);
  CHECK(out.last.best_val == best);
}

TEST_CASE("divergence aborts with a component dump") {
  const auto data = tiny_data();
  TrainConfig cfg = tiny_config();
  cfg.lr = 1e200;  // Adam steps are ~lr in magnitude, so this overflows on the next forward
  cfg.epochs = 40;
  try {
    train(cfg, data);
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric);
  }
}

TEST_CASE("checkpoint round trip and damage") {
  const auto data = tiny_data();
  TrainConfig cfg = tiny_config();
  cfg.epochs = 6;
  cfg.report_interval = 3;
  const auto out = train(cfg, data);
  const std::string path = temp_path("ckpt.bin");
  save_checkpoint(path, out.last);
  const auto back = load_checkpoint(path);
  CHECK(back.config_text == out.last.config_text);
  CHECK(back.mask_blocks == out.last.mask_blocks);
  CHECK(back.regions == 2);
  CHECK(back.epoch == 6);
  CHECK(back.best_val == out.last.best_val);
  CHECK(back.best_epoch == out.last.best_epoch);
  CHECK(params_equal(back.params, out.last.params));
  CHECK(back.opt.t == out.last.opt.t);
  CHECK(back.opt.m == out.last.opt.m);
  CHECK(back.opt.v == out.last.opt.v);
  CHECK(back.rng_state == out.last.rng_state);

  // a restored model reproduces the saved parameters
  auto model = model_from_checkpoint(back);
  CHECK(model.params().count() == static_cast<int>(back.params.size()));
  CHECK(model.params().at(0).value == back.params[0].value);

  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>()};
  in.close();

  auto write_bytes = [&](const std::vector<unsigned char>& b) {
    std::ofstream o(path, std::ios::binary | std::ios::trunc);
    o.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  };

  auto corrupted = bytes;
  corrupted[corrupted.size() / 2] ^= 0x10;
  write_bytes(corrupted);
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("checksum"), Error);

  auto versioned = bytes;
  patch_and_fix_crc(versioned, 8, {77, 0, 0, 0});
  write_bytes(versioned);
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version"), Error);

  auto truncated = bytes;
  truncated.resize(truncated.size() / 2);
  write_bytes(truncated);
  CHECK_THROWS_AS(load_checkpoint(path), Error);
  std::remove(path.c_str());
}

TEST_CASE("continuation reproduces the uninterrupted run") {
  const auto data = tiny_data();
  TrainConfig cfg = tiny_config();
  cfg.model.dropout = 0.1;  // continuation must also restore the dropout stream
  cfg.epochs = 30;
  cfg.report_interval = 5;
  const auto full = train(cfg, data);

  TrainConfig half = cfg;
  half.epochs = 15;
  const auto first = train(half, data);
  const std::string path = temp_path("resume.bin");
  save_checkpoint(path, first.last);
  const auto loaded = load_checkpoint(path);
  const auto second = train(cfg, data, &loaded);

  REQUIRE(second.log.size() == 15);  // epochs 16..30
  std::vector<EpochLog> tail(full.log.begin() + 15, full.log.end());
  CHECK(logs_equal(tail, second.log));
  CHECK(params_equal(full.last.params, second.last.params));
  CHECK(full.last.opt.m == second.last.opt.m);
  CHECK(full.last.rng_state == second.last.rng_state);
  CHECK(full.last.best_val == second.last.best_val);
  CHECK(full.last.best_epoch == second.last.best_epoch);
  std::remove(path.c_str());

  // resuming under a different config is rejected
  TrainConfig other = cfg;
  other.lr = 5e-4;
  CHECK_THROWS_WITH_AS(train(other, data, &loaded), doctest::Contains("does not match"), Error);
  TrainConfig done = cfg;
  done.epochs = 15;
  CHECK_THROWS_WITH_AS(train(done, data, &loaded), doctest::Contains("already at epoch"), Error);
}

TEST_CASE("minibatch mode visits every train trial") {
  const auto data = tiny_data(13, 40);
  TrainConfig cfg = tiny_config();
  cfg.batch_size = 8;  // 28 train trials -> batches of 8,8,8,4
  cfg.epochs = 4;
  cfg.report_interval = 2;
  const auto out = train(cfg, data);
  REQUIRE(out.log.size() == 4);
  for (const auto& el : out.log) CHECK(std::isfinite(el.train.total));
  // deterministic too
  const auto again = train(cfg, data);
  CHECK(logs_equal(out.log, again.log));
}

TEST_CASE("two-region and general fusion train identically") {
  const auto data = tiny_data();
  TrainConfig a = tiny_config();
  a.model.fusion = "two_region";
  TrainConfig b = tiny_config();
  b.model.fusion = "general";
  const auto ra = train(a, data);
  const auto rb = train(b, data);
  // the echoes differ (fusion key), but the trajectories must not
  CHECK(logs_equal(ra.log, rb.log));
  CHECK(params_equal(ra.last.params, rb.last.params));
}

TEST_CASE("gradient clipping is recorded") {
  const auto data = tiny_data();
  TrainConfig cfg = tiny_config();
  cfg.weights.align = 1e5;  // huge coupling -> gradient norm far above the clip
  cfg.epochs = 1;
  cfg.report_interval = 1;
  const auto out = train(cfg, data);
  CHECK(out.log[0].clipped >= 1);
}

TEST_CASE("training log CSV") {
  const auto data = tiny_data();
  TrainConfig cfg = tiny_config();
  cfg.weights.orth = 0.25;
  cfg.epochs = 8;
  cfg.report_interval = 4;
  const auto out = train(cfg, data);
  const std::string path = temp_path("log.csv");
  write_training_log(path, out.log);

  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "epoch,rec,shared,align,orth,lambda_orth_eff,total,val_total,clipped");
  size_t rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (line.back() == ',') fields.push_back("");
    REQUIRE(fields.size() == 9);
    const auto& el = out.log[rows];
    CHECK(std::stoll(fields[0]) == el.train.epoch);
    CHECK(std::stod(fields[1]) == el.train.rec);
    CHECK(std::stod(fields[5]) == el.train.lambda_orth_eff);
    CHECK(std::stod(fields[6]) == el.train.total);
    if (std::isfinite(el.val_total))
      CHECK(std::stod(fields[7]) == el.val_total);
    else
      CHECK(fields[7].empty());
    ++rows;
  }
  CHECK(rows == out.log.size());
  std::remove(path.c_str());
}

TEST_CASE("single-cell grid matches a direct train run") {
  const auto data = tiny_data();
  TrainConfig base = tiny_config();
  base.epochs = 8;
  base.report_interval = 4;

  GridSpec grid;
  grid.layers = {1};
  grid.latent_dims = {3};
  grid.lambda_shared = {1.0};
  grid.lambda_align = {0.5};
  grid.lambda_orth = {0.01};
  grid.learning_rates = {1e-3};
  grid.warmups = {4};
  const auto gout = grid_search(base, grid, data);
  REQUIRE(gout.ranked.size() == 1);
  CHECK_FALSE(gout.ranked[0].diverged);

  TrainConfig direct = base;
  direct.mask = default_latent_layout(2, 3);
  direct.weights.warmup_epochs = 4;
  const auto tout = train(direct, data);
  CHECK(gout.ranked[0].val_total == tout.best.best_val);
  CHECK(params_equal(gout.ranked[0].best.params, tout.best.params));
}

TEST_CASE("grid ranking, divergence, and the re-evaluation oracle") {
  const auto data = tiny_data();
  TrainConfig base = tiny_config();
  base.epochs = 6;
  base.report_interval = 3;

  GridSpec grid;
  grid.latent_dims = {2, 3};
  grid.learning_rates = {1e-3, 1e200};  // the second diverges
  grid.warmups = {4};
  const auto out = grid_search(base, grid, data);
  REQUIRE(out.ranked.size() == 4);

  // diverged cells sink to the bottom, flagged with a diagnostic
  CHECK_FALSE(out.ranked[0].diverged);
  CHECK_FALSE(out.ranked[1].diverged);
  CHECK(out.ranked[2].diverged);
  CHECK(out.ranked[3].diverged);
  CHECK(out.ranked[2].cell_index < out.ranked[3].cell_index);
  CHECK_FALSE(out.ranked[2].error.empty());

  // order matches an independent re-evaluation of each surviving checkpoint
  const double v0 = validation_loss(out.ranked[0].best, data);
  const double v1 = validation_loss(out.ranked[1].best, data);
  CHECK(v0 == out.ranked[0].val_total);
  CHECK(v1 == out.ranked[1].val_total);
  CHECK(v0 <= v1);

  // enumeration order is the nested-loop order (d then lr)
  std::vector<int64_t> dims_by_index(4);
  for (const auto& cell : out.ranked)
    dims_by_index[static_cast<size_t>(cell.cell_index)] = cell.config.mask.dim;
  CHECK(dims_by_index == std::vector<int64_t>{2, 2, 3, 3});

  GridSpec empty = grid;
  empty.latent_dims = {};
  CHECK_THROWS_AS(grid_search(base, empty, data), Error);
}

TEST_CASE("grid cache resumes without retraining") {
  const auto data = tiny_data();
  TrainConfig base = tiny_config();
  base.epochs = 6;
  base.report_interval = 3;

  GridSpec grid;
  grid.latent_dims = {2, 3};
  grid.warmups = {4};

  const std::string dir = temp_path("gridcache");
  std::remove(dir.c_str());
  REQUIRE(::mkdir(dir.c_str(), 0755) == 0);

  const auto first = grid_search(base, grid, data, 1, dir);
  for (const auto& cell : first.ranked) CHECK_FALSE(cell.cached);

  const auto second = grid_search(base, grid, data, 1, dir);
  REQUIRE(second.ranked.size() == first.ranked.size());
  for (size_t i = 0; i < second.ranked.size(); ++i) {
    CHECK(second.ranked[i].cached);
    CHECK(second.ranked[i].val_total == first.ranked[i].val_total);
    CHECK(second.ranked[i].config_hash == first.ranked[i].config_hash);
    CHECK(params_equal(second.ranked[i].best.params, first.ranked[i].best.params));
  }

  // dropping one meta entry retrains just that cell, to the same result
  std::remove((dir + "/cell_" + first.ranked[0].config_hash + ".meta").c_str());
  const auto third = grid_search(base, grid, data, 1, dir);
  for (size_t i = 0; i < third.ranked.size(); ++i) {
    CHECK(third.ranked[i].val_total == first.ranked[i].val_total);
    CHECK(params_equal(third.ranked[i].best.params, first.ranked[i].best.params));
  }

  for (const auto& cell : first.ranked) {
    std::remove((dir + "/cell_" + cell.config_hash + ".meta").c_str());
    std::remove((dir + "/cell_" + cell.config_hash + ".ckpt").c_str());
  }
  ::rmdir(dir.c_str());
}

TEST_CASE("parallel grid matches sequential") {
  const auto data = tiny_data();
  TrainConfig base = tiny_config();
  base.epochs = 4;
  base.report_interval = 2;

  GridSpec grid;
  grid.latent_dims = {2, 3};
  grid.lambda_align = {0.25, 0.5};
  grid.warmups = {4};

  const auto seq = grid_search(base, grid, data, 1);
  const auto par = grid_search(base, grid, data, 3);
  REQUIRE(seq.ranked.size() == par.ranked.size());
  for (size_t i = 0; i < seq.ranked.size(); ++i) {
    CHECK(seq.ranked[i].cell_index == par.ranked[i].cell_index);
    CHECK(seq.ranked[i].val_total == par.ranked[i].val_total);
    CHECK(params_equal(seq.ranked[i].best.params, par.ranked[i].best.params));
  }
}
