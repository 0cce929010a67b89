#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "diffcore/grad_check.hpp"
#include "seqmodel/masks.hpp"
#include "seqmodel/model.hpp"
#include "seqmodel/positional.hpp"

using namespace ctae;

namespace {

bool bits_equal(const double* a, const double* b, size_t n) {
  return std::memcmp(a, b, n * sizeof(double)) == 0;
}

bool bits_equal(const DenseArray<double>& a, const DenseArray<double>& b) {
  return a.shape == b.shape && bits_equal(a.data.data(), b.data.data(), a.data.size());
}

DenseArray<double> random_array(std::vector<int64_t> shape, Rng& rng) {
  DenseArray<double> a = DenseArray<double>::zeros(std::move(shape));
  for (auto& v : a.data) v = rng.normal();
  return a;
}

ModelConfig small_config(std::vector<int64_t> channels, int64_t t_len, int64_t layers,
                         int64_t d_model, int64_t heads, int64_t ff,
                         const std::string& fusion = "auto") {
  ModelConfig cfg;
  cfg.channels = std::move(channels);
  cfg.t_len = t_len;
  cfg.layers = layers;
  cfg.d_model = d_model;
  cfg.heads = heads;
  cfg.ff = ff;
  cfg.dropout = 0.0;
  cfg.fusion = fusion;
  return cfg;
}

// scalar loss: sum of outputs weighted by a fixed pseudo-random pattern, so
// every output coordinate gets a distinct pull
int weighted_sum(Tape<double>& t, int node, uint64_t seed) {
  Rng rng(seed);
  DenseArray<double> w = DenseArray<double>::zeros(t.shape(node));
  for (auto& v : w.data) v = rng.uniform(-1.0, 1.0);
  return ops::sum_all(t, ops::mul(t, node, t.constant(w)));
}

}  // namespace

TEST_CASE("positional encoding hand values") {
  const auto pe = positional_encoding<double>(6, 8);
  REQUIRE(pe.shape == std::vector<int64_t>({6, 8}));
  for (int64_t i = 0; i < 4; ++i) {
    CHECK(pe.data[static_cast<size_t>(2 * i)] == 0.0);
    CHECK(pe.data[static_cast<size_t>(2 * i + 1)] == 1.0);
  }
  // 10000^{2i/8} = 1, 10, 100, 1000 for i = 0..3
  CHECK(pe.data[8 + 0] == doctest::Approx(std::sin(1.0)).epsilon(1e-15));
  CHECK(pe.data[8 + 1] == doctest::Approx(std::cos(1.0)).epsilon(1e-15));
  CHECK(pe.data[8 + 2] == doctest::Approx(std::sin(0.1)).epsilon(1e-15));
  CHECK(pe.data[8 + 3] == doctest::Approx(std::cos(0.1)).epsilon(1e-15));
  CHECK(pe.data[5 * 8 + 4] == doctest::Approx(std::sin(0.05)).epsilon(1e-15));
  CHECK(pe.data[5 * 8 + 5] == doctest::Approx(std::cos(0.05)).epsilon(1e-15));
}

TEST_CASE("positional encoding pair identity and validation") {
  const auto pe = positional_encoding<double>(17, 10);
  for (int64_t t = 0; t < 17; ++t)
    for (int64_t i = 0; i < 5; ++i) {
      const double s = pe.data[static_cast<size_t>(t * 10 + 2 * i)];
      const double c = pe.data[static_cast<size_t>(t * 10 + 2 * i + 1)];
      CHECK(s * s + c * c == doctest::Approx(1.0).epsilon(1e-12));
    }
  CHECK_THROWS_AS(positional_encoding<double>(4, 7), Error);
  CHECK_THROWS_AS(positional_encoding<double>(0, 8), Error);
}

TEST_CASE("causal mask layout") {
  const auto m = causal_mask<double>(4);
  for (int64_t q = 0; q < 4; ++q)
    for (int64_t k = 0; k < 4; ++k) {
      const double v = m.data[static_cast<size_t>(q * 4 + k)];
      if (k <= q)
        CHECK(v == 0.0);
      else
        CHECK(std::isinf(v));
    }
}

TEST_CASE("two-region membership masks") {
  const auto m = build_two_region_masks(1, 1, 1);
  CHECK(m.dim == 3);
  CHECK(m.w[0] == std::vector<double>({1, 1, 0}));
  CHECK(m.w[1] == std::vector<double>({1, 0, 1}));
  CHECK(m.s == std::vector<double>({1, 0, 0}));
  CHECK(m.recip == std::vector<double>({0.5, 1, 1}));
  CHECK(m.w_shared[0] == std::vector<double>({1, 0, 0}));
  CHECK(m.w_priv[0] == std::vector<double>({0, 1, 0}));
  CHECK(m.w_priv[1] == std::vector<double>({0, 0, 1}));
  CHECK(m.exact_two_region());
  CHECK(m.shared_dim() == 1);

  const auto all_shared = build_two_region_masks(2, 0, 0);
  CHECK(all_shared.dim == 2);
  CHECK(all_shared.w[0] == std::vector<double>({1, 1}));
  CHECK(all_shared.w[1] == std::vector<double>({1, 1}));
  CHECK(all_shared.s == std::vector<double>({1, 1}));

  const auto none_shared = build_two_region_masks(0, 1, 1);
  CHECK(none_shared.dim == 2);
  CHECK(none_shared.w[0] == std::vector<double>({1, 0}));
  CHECK(none_shared.w[1] == std::vector<double>({0, 1}));
  CHECK(none_shared.s == std::vector<double>({0, 0}));
  CHECK(none_shared.shared_dim() == 0);
}

TEST_CASE("general membership builder") {
  // three regions, codes 111 / 110 / 100
  const auto m = build_membership(3, {{0b100u, 1}, {0b111u, 1}, {0b110u, 1}});
  CHECK(m.dim == 3);
  CHECK(m.codes == std::vector<uint32_t>({7, 6, 4}));
  CHECK(m.w[0] == std::vector<double>({1, 1, 1}));
  CHECK(m.w[1] == std::vector<double>({1, 1, 0}));
  CHECK(m.w[2] == std::vector<double>({1, 0, 0}));
  CHECK(m.s == std::vector<double>({1, 1, 0}));

  // canonical order over all 7 nonempty subsets of 3 regions
  std::vector<std::pair<uint32_t, int64_t>> blocks;
  for (uint32_t c = 1; c < 8; ++c) blocks.push_back({c, 1});
  const auto full = build_membership(3, blocks);
  CHECK(full.codes == std::vector<uint32_t>({7, 6, 5, 3, 4, 2, 1}));
  CHECK(full.colsum == std::vector<double>({3, 2, 2, 2, 1, 1, 1}));
  CHECK(full.s == std::vector<double>({1, 1, 1, 1, 0, 0, 0}));
  CHECK(full.block_offsets == std::vector<int64_t>({0, 1, 2, 3, 4, 5, 6}));

  // two-region specialization and the general builder agree
  const auto a = build_two_region_masks(2, 3, 1);
  const auto b = build_membership(2, {{3u, 2}, {2u, 3}, {1u, 1}});
  CHECK(a.codes == b.codes);
  CHECK(a.w == b.w);
  CHECK(a.s == b.s);
  CHECK(a.recip == b.recip);

  CHECK_THROWS_AS(build_membership(2, {{0u, 1}}), Error);
  CHECK_THROWS_AS(build_membership(2, {{4u, 1}}), Error);
  CHECK_THROWS_AS(build_membership(2, {{3u, 1}, {3u, 2}}), Error);
  CHECK_THROWS_AS(build_membership(2, {{3u, 0}, {2u, 0}, {1u, 0}}), Error);
  CHECK_THROWS_AS(build_membership(2, {{3u, -1}}), Error);
  CHECK(MembershipMask::parse_code("110", 3) == 6u);
  CHECK_THROWS_AS(MembershipMask::parse_code("11", 3), Error);
  CHECK_THROWS_AS(MembershipMask::parse_code("1x0", 3), Error);
}

TEST_CASE("block extraction") {
  const auto m = build_two_region_masks(1, 2, 1);
  DenseArray<double> z = DenseArray<double>::zeros({1, 2, 4});
  for (size_t i = 0; i < z.data.size(); ++i) z.data[i] = static_cast<double>(i);
  const auto p1 = extract_block(z, m, m.block_of_code(2u));
  CHECK(p1.shape == std::vector<int64_t>({1, 2, 2}));
  CHECK(p1.data == std::vector<double>({1, 2, 5, 6}));
  const auto sh = extract_block(z, m, m.block_of_code(3u));
  CHECK(sh.data == std::vector<double>({0, 4}));
  CHECK_THROWS_AS(m.block_of_code(0u), Error);
  DenseArray<double> bad = DenseArray<double>::zeros({1, 2, 5});
  CHECK_THROWS_AS(extract_block(bad, m, 0), Error);
}

TEST_CASE("model config validation") {
  const auto mask = build_two_region_masks(1, 1, 1);
  auto cfg = small_config({3, 4}, 5, 1, 8, 2, 16);
  CHECK_NOTHROW(cfg.validate(mask));
  auto bad = cfg;
  bad.d_model = 7;
  CHECK_THROWS_AS(bad.validate(mask), Error);
  bad = cfg;
  bad.heads = 3;
  CHECK_THROWS_AS(bad.validate(mask), Error);
  bad = cfg;
  bad.channels = {3};
  CHECK_THROWS_AS(bad.validate(mask), Error);
  bad = cfg;
  bad.dropout = 1.0;
  CHECK_THROWS_AS(bad.validate(mask), Error);
  bad = cfg;
  bad.fusion = "two_region";
  CHECK_NOTHROW(bad.validate(mask));
  const auto r3 = build_membership(3, {{7u, 1}, {6u, 1}, {1u, 1}});
  bad.channels = {3, 4, 2};
  CHECK_THROWS_AS(bad.validate(r3), Error);  // two_region fusion, non-2R layout
}

TEST_CASE("init is seed-deterministic") {
  const auto mask = build_two_region_masks(2, 1, 1);
  const auto cfg = small_config({3, 4}, 5, 1, 8, 2, 16);
  CtaeModel<double> a(cfg, mask), b(cfg, mask), c(cfg, mask);
  Rng r1(11), r2(11), r3(12);
  a.init(r1);
  b.init(r2);
  c.init(r3);
  REQUIRE(a.params().count() == b.params().count());
  bool all_equal = true, any_diff_seed = false;
  for (int i = 0; i < a.params().count(); ++i) {
    const auto& pa = a.params().at(i).value;
    const auto& pb = b.params().at(i).value;
    const auto& pc = c.params().at(i).value;
    if (!bits_equal(pa.data(), pb.data(), pa.size())) all_equal = false;
    if (!bits_equal(pa.data(), pc.data(), pa.size())) any_diff_seed = true;
  }
  CHECK(all_equal);
  CHECK(any_diff_seed);
  // gains start at one, biases at zero
  bool saw_gamma = false, saw_bias = false;
  for (int i = 0; i < a.params().count(); ++i) {
    const auto& p = a.params().at(i);
    if (p.name.find(".ln1.g") != std::string::npos) {
      saw_gamma = true;
      for (double v : p.value) CHECK(v == 1.0);
    }
    if (p.name.find(".in.b") != std::string::npos) {
      saw_bias = true;
      for (double v : p.value) CHECK(v == 0.0);
    }
  }
  CHECK(saw_gamma);
  CHECK(saw_bias);
}

TEST_CASE("forward shapes and determinism") {
  const auto mask = build_two_region_masks(2, 1, 1);
  const auto cfg = small_config({3, 4}, 5, 2, 8, 2, 16);
  CtaeModel<double> model(cfg, mask);
  Rng init_rng(42);
  model.init(init_rng);

  Rng data_rng(5);
  std::vector<DenseArray<double>> x;
  x.push_back(random_array({6, 5, 3}, data_rng));
  x.push_back(random_array({6, 5, 4}, data_rng));

  Tape<double> t1(&model.params());
  ForwardPlan plan;
  plan.shared_only = true;
  const auto f1 = model.forward(t1, x, plan);
  REQUIRE(f1.z.size() == 2);
  CHECK(t1.shape(f1.z[0]) == std::vector<int64_t>({6, 5, 4}));
  CHECK(t1.shape(f1.fused) == std::vector<int64_t>({6, 5, 4}));
  CHECK(t1.shape(f1.xhat[0]) == std::vector<int64_t>({6, 5, 3}));
  CHECK(t1.shape(f1.xhat[1]) == std::vector<int64_t>({6, 5, 4}));
  REQUIRE(f1.xhat_shared.size() == 2);
  CHECK(t1.shape(f1.xhat_shared[1]) == std::vector<int64_t>({6, 5, 4}));

  Tape<double> t2(&model.params());
  const auto f2 = model.forward(t2, x, plan);
  CHECK(bits_equal(t1.value_copy(f1.fused), t2.value_copy(f2.fused)));
  CHECK(bits_equal(t1.value_copy(f1.xhat[0]), t2.value_copy(f2.xhat[0])));
  CHECK(bits_equal(t1.value_copy(f1.xhat_shared[0]), t2.value_copy(f2.xhat_shared[0])));

  // wrong region count / wrong channel width are rejected
  std::vector<DenseArray<double>> short_x(1, x[0]);
  Tape<double> t3(&model.params());
  CHECK_THROWS_AS(model.forward(t3, short_x), Error);
  std::vector<DenseArray<double>> bad_x = x;
  bad_x[1] = random_array({6, 5, 5}, data_rng);
  CHECK_THROWS_AS(model.forward(t3, bad_x), Error);
}

TEST_CASE("fusion hand example and fixed point") {
  const auto mask = build_two_region_masks(1, 1, 1);
  for (const char* path : {"two_region", "general"}) {
    const auto cfg = small_config({2, 2}, 1, 1, 2, 1, 4, path);
    CtaeModel<double> model(cfg, mask);
    Rng rng(3);
    model.init(rng);
    CHECK(model.two_region_path() == (std::string(path) == "two_region"));

    Tape<double> t(&model.params());
    DenseArray<double> z1({1, 1, 3}, {0.3, -1.2, 2.5});
    DenseArray<double> z2({1, 1, 3}, {0.7, 0.25, -0.5});
    const int fused = model.fuse_latents(t, {t.constant(z1), t.constant(z2)});
    const auto v = t.value_copy(fused);
    CHECK(v.data[0] == (0.3 + 0.7) * 0.5);
    CHECK(v.data[1] == -1.2);
    CHECK(v.data[2] == -0.5);

    // identical latents pass through unchanged
    Rng zr(9);
    const auto z = random_array({2, 3, 3}, zr);
    Tape<double> t2(&model.params());
    const int fp = model.fuse_latents(t2, {t2.constant(z), t2.constant(z)});
    CHECK(bits_equal(t2.value_copy(fp), z));
  }
}

TEST_CASE("general fusion matches the masked-average oracle") {
  const auto mask = build_membership(3, {{0b111u, 2}, {0b110u, 1}, {0b011u, 1}, {0b100u, 2}});
  REQUIRE(mask.dim == 6);
  const auto cfg = small_config({2, 2, 2}, 2, 1, 2, 1, 4, "general");
  CtaeModel<double> model(cfg, mask);
  Rng rng(8);
  model.init(rng);

  Rng zr(21);
  std::vector<DenseArray<double>> z;
  for (int r = 0; r < 3; ++r) z.push_back(random_array({3, 2, 6}, zr));

  Tape<double> t(&model.params());
  const int fused =
      model.fuse_latents(t, {t.constant(z[0]), t.constant(z[1]), t.constant(z[2])});
  const auto got = t.value_copy(fused);

  // same accumulation order as the graph: region by region, then the
  // reciprocal multiply
  DenseArray<double> want = DenseArray<double>::zeros({3, 2, 6});
  for (int64_t i = 0; i < 6 * 3 * 2; ++i) {
    const int64_t d = i % 6;
    double acc = z[0].data[static_cast<size_t>(i)] * mask.w[0][static_cast<size_t>(d)];
    acc += z[1].data[static_cast<size_t>(i)] * mask.w[1][static_cast<size_t>(d)];
    acc += z[2].data[static_cast<size_t>(i)] * mask.w[2][static_cast<size_t>(d)];
    want.data[static_cast<size_t>(i)] = acc * mask.recip[static_cast<size_t>(d)];
  }
  CHECK(bits_equal(got, want));

  // linearity in the latents
  Tape<double> t2(&model.params());
  std::vector<DenseArray<double>> z3 = z;
  for (auto& a : z3)
    for (auto& v : a.data) v *= 3.0;
  const int f3 =
      model.fuse_latents(t2, {t2.constant(z3[0]), t2.constant(z3[1]), t2.constant(z3[2])});
  const auto got3 = t2.value_copy(f3);
  for (size_t i = 0; i < got3.data.size(); ++i)
    CHECK(got3.data[i] == doctest::Approx(3.0 * got.data[i]).epsilon(1e-12));
}

TEST_CASE("two-region and general paths agree bit for bit") {
  const auto mask = build_two_region_masks(2, 1, 1);
  const auto cfg_a = small_config({3, 4}, 5, 1, 8, 2, 16, "two_region");
  const auto cfg_b = small_config({3, 4}, 5, 1, 8, 2, 16, "general");
  CtaeModel<double> a(cfg_a, mask), b(cfg_b, mask);
  Rng r1(17), r2(17);
  a.init(r1);
  b.init(r2);
  CHECK(a.two_region_path());
  CHECK(!b.two_region_path());

  Rng data_rng(33);
  std::vector<DenseArray<double>> x;
  x.push_back(random_array({4, 5, 3}, data_rng));
  x.push_back(random_array({4, 5, 4}, data_rng));

  ForwardPlan plan;
  plan.shared_only = true;
  Tape<double> ta(&a.params()), tb(&b.params());
  const auto fa = a.forward(ta, x, plan);
  const auto fb = b.forward(tb, x, plan);
  CHECK(bits_equal(ta.value_copy(fa.fused), tb.value_copy(fb.fused)));
  for (int r = 0; r < 2; ++r) {
    CHECK(bits_equal(ta.value_copy(fa.xhat[r]), tb.value_copy(fb.xhat[r])));
    CHECK(bits_equal(ta.value_copy(fa.xhat_shared[r]), tb.value_copy(fb.xhat_shared[r])));
  }
}

TEST_CASE("encoder and decoder are causal") {
  int cases = 0;
  Rng meta(99);
  for (int rep = 0; rep < 40; ++rep) {
    const int64_t T = 6;
    const int64_t dm = meta.uniform_int(2) == 0 ? 4 : 8;
    const int64_t H = meta.uniform_int(2) + 1;
    const int64_t L = meta.uniform_int(2) + 1;
    const int64_t n1 = meta.uniform_int(3) + 2;
    const int64_t n2 = meta.uniform_int(3) + 2;
    const auto mask = build_two_region_masks(1, 1, 1);
    const auto cfg = small_config({n1, n2}, T, L, dm, H, 2 * dm);
    CtaeModel<double> model(cfg, mask);
    Rng init_rng(1000 + static_cast<uint64_t>(rep));
    model.init(init_rng);

    Rng data_rng(500 + static_cast<uint64_t>(rep));
    const auto x = random_array({1, T, n1}, data_rng);
    Tape<double> t0(&model.params());
    const auto z0 = t0.value_copy(model.encode_region(t0, 0, t0.constant(x)));

    for (int probe_i = 0; probe_i < 2; ++probe_i) {
      const int64_t probe = meta.uniform_int(T - 1);  // perturb after this time
      auto xp = x;
      for (int64_t tt = probe + 1; tt < T; ++tt)
        for (int64_t j = 0; j < n1; ++j)
          xp.data[static_cast<size_t>(tt * n1 + j)] += data_rng.normal();
      Tape<double> t1(&model.params());
      const auto z1 = t1.value_copy(model.encode_region(t1, 0, t1.constant(xp)));
      CHECK(bits_equal(z0.data.data(), z1.data.data(),
                       static_cast<size_t>((probe + 1) * mask.dim)));
      bool later_changed = false;
      for (size_t i = static_cast<size_t>((probe + 1) * mask.dim); i < z1.data.size(); ++i)
        later_changed |= z0.data[i] != z1.data[i];
      CHECK(later_changed);
      ++cases;
    }

    // decoder: reconstructions up to the probe ignore later latents
    const auto z = random_array({1, T, mask.dim}, data_rng);
    Tape<double> t2(&model.params());
    const auto y0 = t2.value_copy(model.decode_region(t2, 1, t2.constant(z), mask.w[1]));
    for (int probe_i = 0; probe_i < 2; ++probe_i) {
      const int64_t probe = meta.uniform_int(T - 1);
      auto zp = z;
      for (int64_t tt = probe + 1; tt < T; ++tt)
        for (int64_t d = 0; d < mask.dim; ++d)
          zp.data[static_cast<size_t>(tt * mask.dim + d)] += data_rng.normal();
      Tape<double> t3(&model.params());
      const auto y1 = t3.value_copy(model.decode_region(t3, 1, t3.constant(zp), mask.w[1]));
      CHECK(bits_equal(y0.data.data(), y1.data.data(),
                       static_cast<size_t>((probe + 1) * n2)));
      ++cases;
    }
  }
  CHECK(cases >= 100);
}

TEST_CASE("decoding ignores masked-out latent dimensions") {
  const auto mask = build_two_region_masks(2, 1, 1);
  const auto cfg = small_config({3, 4}, 5, 1, 8, 2, 16);
  CtaeModel<double> model(cfg, mask);
  Rng init_rng(4);
  model.init(init_rng);

  Rng data_rng(6);
  const auto z = random_array({3, 5, 4}, data_rng);
  Tape<double> t0(&model.params());
  const auto y0 = t0.value_copy(model.decode_region(t0, 0, t0.constant(z), mask.w[0]));

  // region 1 never sees dim 3 (private to region 2)
  auto zp = z;
  for (int64_t i = 3; i < 3 * 5 * 4; i += 4) zp.data[static_cast<size_t>(i)] = data_rng.normal();
  Tape<double> t1(&model.params());
  const auto y1 = t1.value_copy(model.decode_region(t1, 0, t1.constant(zp), mask.w[0]));
  CHECK(bits_equal(y0, y1));

  // but it does see shared dims
  auto zs = z;
  zs.data[0] += 1.0;
  Tape<double> t2(&model.params());
  const auto y2 = t2.value_copy(model.decode_region(t2, 0, t2.constant(zs), mask.w[0]));
  CHECK(!bits_equal(y0, y2));
}

TEST_CASE("shared-only reconstructions reuse the decoder with the shared mask") {
  const auto mask = build_two_region_masks(2, 1, 1);
  const auto cfg = small_config({3, 4}, 5, 1, 8, 2, 16);
  CtaeModel<double> model(cfg, mask);
  Rng init_rng(14);
  model.init(init_rng);
  Rng data_rng(15);
  std::vector<DenseArray<double>> x;
  x.push_back(random_array({2, 5, 3}, data_rng));
  x.push_back(random_array({2, 5, 4}, data_rng));
  Tape<double> t(&model.params());
  ForwardPlan plan;
  plan.shared_only = true;
  const auto f = model.forward(t, x, plan);
  for (int r = 0; r < 2; ++r) {
    const int manual = model.decode_region(t, r, f.fused, mask.w_shared[static_cast<size_t>(r)]);
    CHECK(bits_equal(t.value_copy(f.xhat_shared[static_cast<size_t>(r)]),
                     t.value_copy(manual)));
  }
}

TEST_CASE("dropout is seed-deterministic and off at inference") {
  const auto mask = build_two_region_masks(2, 1, 1);
  auto cfg = small_config({3, 4}, 5, 1, 8, 2, 16);
  cfg.dropout = 0.5;
  CtaeModel<double> model(cfg, mask);
  Rng init_rng(77);
  model.init(init_rng);

  Rng data_rng(78);
  std::vector<DenseArray<double>> x;
  x.push_back(random_array({2, 5, 3}, data_rng));
  x.push_back(random_array({2, 5, 4}, data_rng));

  auto run = [&](uint64_t seed) {
    Tape<double> t(&model.params());
    Rng drop(seed);
    ForwardPlan plan;
    plan.training = true;
    plan.dropout_rng = &drop;
    const auto f = model.forward(t, x, plan);
    return t.value_copy(f.xhat[0]);
  };
  CHECK(bits_equal(run(1), run(1)));
  CHECK(!bits_equal(run(1), run(2)));

  // inference path never consumes the RNG and matches a dropout-free model
  auto cfg0 = cfg;
  cfg0.dropout = 0.0;
  CtaeModel<double> clean(cfg0, mask);
  Rng init_rng2(77);
  clean.init(init_rng2);
  Tape<double> ta(&model.params()), tb(&clean.params());
  const auto fa = model.forward(ta, x);
  const auto fb = clean.forward(tb, x);
  CHECK(bits_equal(ta.value_copy(fa.xhat[1]), tb.value_copy(fb.xhat[1])));

  // training with dropout but no RNG is a hard error
  Tape<double> tc(&model.params());
  ForwardPlan bad;
  bad.training = true;
  CHECK_THROWS_AS(model.forward(tc, x, bad), Error);
}

TEST_CASE("model gradients match finite differences") {
  const auto mask = build_two_region_masks(1, 1, 1);
  const auto cfg = small_config({2, 3}, 3, 1, 4, 2, 6);
  CtaeModel<double> model(cfg, mask);
  Rng init_rng(2024);
  model.init(init_rng);

  Rng data_rng(31);
  std::vector<DenseArray<double>> x;
  x.push_back(random_array({2, 3, 2}, data_rng));
  x.push_back(random_array({2, 3, 3}, data_rng));

  const auto rep = grad_check(
      model.params(),
      [&](Tape<double>& t) {
        ForwardPlan plan;
        plan.shared_only = true;
        const auto f = model.forward(t, x, plan);
        int loss = weighted_sum(t, f.fused, 1);
        loss = ops::add(t, loss, weighted_sum(t, f.xhat[0], 2));
        loss = ops::add(t, loss, weighted_sum(t, f.xhat[1], 3));
        loss = ops::add(t, loss, weighted_sum(t, f.xhat_shared[0], 4));
        loss = ops::add(t, loss, weighted_sum(t, f.xhat_shared[1], 5));
        return loss;
      },
      1e-4, 2, 7);
  CHECK(rep.checked > 0);
  CHECK(rep.max_rel_err <= 1e-4);
}

TEST_CASE("latent inference is chunk-invariant") {
  const auto mask = build_two_region_masks(2, 1, 1);
  const auto cfg = small_config({3, 4}, 5, 1, 8, 2, 16);
  CtaeModel<double> model(cfg, mask);
  Rng init_rng(55);
  model.init(init_rng);
  Rng data_rng(56);
  std::vector<DenseArray<double>> x;
  x.push_back(random_array({7, 5, 3}, data_rng));
  x.push_back(random_array({7, 5, 4}, data_rng));

  const auto whole = model.infer_latents(x, 64);
  const auto pieces = model.infer_latents(x, 3);
  CHECK(bits_equal(whole.fused, pieces.fused));
  CHECK(bits_equal(whole.z[0], pieces.z[0]));
  CHECK(bits_equal(whole.z[1], pieces.z[1]));

  // matches the forward graph latents
  Tape<double> t(&model.params());
  const auto f = model.forward(t, x);
  CHECK(bits_equal(whole.fused, t.value_copy(f.fused)));
}
