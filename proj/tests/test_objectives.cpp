#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "diffcore/grad_check.hpp"
#include "objectives/objectives.hpp"

using namespace ctae;

namespace {

bool bits_equal(const DenseArray<double>& a, const DenseArray<double>& b) {
  return a.shape == b.shape &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

DenseArray<double> random_array(std::vector<int64_t> shape, Rng& rng) {
  DenseArray<double> a = DenseArray<double>::zeros(std::move(shape));
  for (auto& v : a.data) v = rng.normal();
  return a;
}

CtaeModel<double> micro_model(const MembershipMask& mask, std::vector<int64_t> channels,
                              int64_t t_len, uint64_t seed,
                              const std::string& fusion = "auto") {
  ModelConfig cfg;
  cfg.channels = std::move(channels);
  cfg.t_len = t_len;
  cfg.layers = 1;
  cfg.d_model = 4;
  cfg.heads = 2;
  cfg.ff = 6;
  cfg.dropout = 0.0;
  cfg.fusion = fusion;
  CtaeModel<double> m(cfg, mask);
  Rng rng(seed);
  m.init(rng);
  return m;
}

}  // namespace

TEST_CASE("warm-up schedule") {
  const double lam = 0.05;
  CHECK(warmup_coefficient(0, 100, lam) == 0.0);
  CHECK(warmup_coefficient(50, 100, lam) == 0.0);
  CHECK(warmup_coefficient(100, 100, lam) == 0.0);
  CHECK(warmup_coefficient(101, 100, lam) == lam * (1.0 / 100.0));
  CHECK(warmup_coefficient(150, 100, lam) == 0.5 * lam);
  CHECK(warmup_coefficient(200, 100, lam) == lam);  // continuous at t = 2e
  CHECK(warmup_coefficient(300, 100, lam) == lam);
  CHECK(warmup_coefficient(1, 1, 2.0) == 0.0);
  CHECK(warmup_coefficient(2, 1, 2.0) == 2.0);
  CHECK_THROWS_AS(warmup_coefficient(5, 0, lam), Error);
  CHECK_THROWS_AS(warmup_coefficient(-1, 100, lam), Error);
}

TEST_CASE("reconstruction loss values") {
  Tape<double> t(nullptr);
  Rng rng(3);
  const auto x = random_array({2, 3, 4}, rng);
  auto xp = x;
  for (auto& v : xp.data) v += 1.0;
  const int l =
      loss_reconstruction(t, {t.constant(xp)}, {t.constant(x)});
  // offset of 1 everywhere, one region: N*T per trial
  CHECK(t.scalar(l) == 12.0);

  // perfect reconstruction
  const int z = loss_reconstruction(t, {t.constant(x)}, {t.constant(x)});
  CHECK(t.scalar(z) == 0.0);

  // random pair matches the elementwise oracle, same summation order
  const auto a = random_array({3, 4, 5}, rng);
  const auto b = random_array({3, 4, 5}, rng);
  const int r = loss_reconstruction(t, {t.constant(a)}, {t.constant(b)});
  double want = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    want += d * d;
  }
  want *= 1.0 / 3.0;
  CHECK(t.scalar(r) == want);

  CHECK_THROWS_AS(loss_reconstruction(t, {t.constant(a)}, {}), Error);
}

TEST_CASE("alignment loss hand value and private invariance") {
  const auto mask = build_two_region_masks(1, 1, 1);
  auto model = micro_model(mask, {2, 2}, 4, 5);
  const int64_t T = 4;

  Rng rng(7);
  DenseArray<double> z1 = random_array({1, T, 3}, rng);
  DenseArray<double> z2 = random_array({1, T, 3}, rng);
  for (int64_t tt = 0; tt < T; ++tt) {
    z1.data[static_cast<size_t>(tt * 3)] = 1.0;   // shared row of +1
    z2.data[static_cast<size_t>(tt * 3)] = -1.0;  // shared row of -1
  }
  Tape<double> t(&model.params());
  const std::vector<int> z{t.constant(z1), t.constant(z2)};
  const int fused = model.fuse_latents(t, z);
  const int l = loss_alignment(t, fused, z, mask);
  CHECK(t.scalar(l) == 2.0 * static_cast<double>(T));

  // perturbing private dimensions does not move the loss
  auto z1p = z1;
  auto z2p = z2;
  for (int64_t tt = 0; tt < T; ++tt) {
    z1p.data[static_cast<size_t>(tt * 3 + 1)] += 5.0;  // region-1 private
    z2p.data[static_cast<size_t>(tt * 3 + 2)] -= 3.0;  // region-2 private
  }
  Tape<double> t2(&model.params());
  const std::vector<int> zp{t2.constant(z1p), t2.constant(z2p)};
  const int l2 = loss_alignment(t2, model.fuse_latents(t2, zp), zp, mask);
  CHECK(t2.scalar(l2) == t.scalar(l));

  // identical encoder outputs align perfectly
  Tape<double> t3(&model.params());
  const std::vector<int> zeq{t3.constant(z1), t3.constant(z1)};
  const int l3 = loss_alignment(t3, model.fuse_latents(t3, zeq), zeq, mask);
  CHECK(t3.scalar(l3) == 0.0);
}

TEST_CASE("orthogonality loss values and symmetries") {
  Tape<double> t(nullptr);

  DenseArray<double> ones({1, 2, 2}, {1, 1, 1, 1});
  CHECK(t.scalar(loss_orthogonality(t, t.constant(ones))) == 2.0);

  // orthogonal columns
  DenseArray<double> orth({1, 2, 2}, {1, 1, 1, -1});
  CHECK(t.scalar(loss_orthogonality(t, t.constant(orth))) == 0.0);

  // single latent dimension has no off-diagonal entries
  DenseArray<double> one_dim({2, 3, 1}, {1, 2, 3, 4, 5, 6});
  CHECK(t.scalar(loss_orthogonality(t, t.constant(one_dim))) == 0.0);

  Rng rng(11);
  const auto z = random_array({2, 5, 4}, rng);
  const double base = t.scalar(loss_orthogonality(t, t.constant(z)));
  CHECK(base > 0.0);

  // permuting latent dimensions permutes G without changing the penalty
  DenseArray<double> zp = DenseArray<double>::zeros({2, 5, 4});
  const int perm[4] = {2, 0, 3, 1};
  for (int64_t i = 0; i < 2 * 5; ++i)
    for (int64_t d = 0; d < 4; ++d)
      zp.data[static_cast<size_t>(i * 4 + perm[d])] = z.data[static_cast<size_t>(i * 4 + d)];
  const double permuted = t.scalar(loss_orthogonality(t, t.constant(zp)));
  CHECK(permuted == doctest::Approx(base).epsilon(1e-12));

  // quartic scaling under z -> 2z, exact because 2 is a power of two
  auto z2 = z;
  for (auto& v : z2.data) v *= 2.0;
  CHECK(t.scalar(loss_orthogonality(t, t.constant(z2))) == 16.0 * base);
}

TEST_CASE("shared-only loss degenerate masks") {
  // all dimensions shared: identical to plain reconstruction
  {
    const auto mask = build_two_region_masks(3, 0, 0);
    auto model = micro_model(mask, {2, 3}, 3, 21);
    Rng rng(22);
    std::vector<DenseArray<double>> x{random_array({2, 3, 2}, rng),
                                      random_array({2, 3, 3}, rng)};
    Tape<double> t(&model.params());
    ForwardPlan plan;
    plan.shared_only = true;
    const auto f = model.forward(t, x, plan);
    for (int r = 0; r < 2; ++r)
      CHECK(bits_equal(t.value_copy(f.xhat[r]), t.value_copy(f.xhat_shared[r])));
    const int lr = loss_reconstruction(t, f.xhat, f.x);
    const int ls = loss_shared_only(t, f.xhat_shared, f.x);
    CHECK(t.scalar(lr) == t.scalar(ls));
  }
  // nothing shared: decoders see all-zero latents
  {
    const auto mask = build_two_region_masks(0, 2, 1);
    auto model = micro_model(mask, {2, 3}, 3, 23);
    Rng rng(24);
    std::vector<DenseArray<double>> x{random_array({2, 3, 2}, rng),
                                      random_array({2, 3, 3}, rng)};
    Tape<double> t(&model.params());
    ForwardPlan plan;
    plan.shared_only = true;
    const auto f = model.forward(t, x, plan);
    const auto zero_z = DenseArray<double>::zeros({2, 3, 3});
    for (int r = 0; r < 2; ++r) {
      const int from_zero = model.decode_region(t, r, t.constant(zero_z), mask.w[r]);
      CHECK(bits_equal(t.value_copy(f.xhat_shared[r]), t.value_copy(from_zero)));
    }
  }
}

TEST_CASE("shared-only loss matches the composition oracle") {
  const auto mask = build_two_region_masks(1, 1, 1);
  auto model = micro_model(mask, {2, 3}, 3, 31);
  Rng rng(32);
  std::vector<DenseArray<double>> x{random_array({2, 3, 2}, rng),
                                    random_array({2, 3, 3}, rng)};
  Tape<double> t(&model.params());
  ForwardPlan plan;
  plan.shared_only = true;
  const auto f = model.forward(t, x, plan);
  const int ls = loss_shared_only(t, f.xhat_shared, f.x);

  double want = 0;
  for (int r = 0; r < 2; ++r) {
    const auto xhat = t.value_copy(f.xhat_shared[r]);
    for (size_t i = 0; i < xhat.data.size(); ++i) {
      const double d = xhat.data[i] - x[static_cast<size_t>(r)].data[i];
      want += d * d;
    }
  }
  CHECK(t.scalar(ls) == doctest::Approx(want / 2.0).epsilon(1e-14));
}

TEST_CASE("total loss identity and ablation structure") {
  const auto mask = build_two_region_masks(1, 1, 1);
  auto model = micro_model(mask, {2, 3}, 3, 41);
  Rng rng(42);
  std::vector<DenseArray<double>> x{random_array({3, 3, 2}, rng),
                                    random_array({3, 3, 3}, rng)};

  LossWeights w;
  w.shared = 1.0;
  w.align = 0.5;
  w.orth = 0.01;
  w.warmup_epochs = 100;

  Tape<double> t(&model.params());
  ForwardPlan plan;
  plan.shared_only = true;
  const auto f = model.forward(t, x, plan);
  const auto n = total_loss(t, f, mask, w, 300);
  const auto rep = read_losses(t, n, w, 300);
  CHECK(rep.lambda_orth_eff == 0.01);
  CHECK(std::abs(rep.total - (rep.rec + w.shared * rep.shared + w.align * rep.align +
                              rep.lambda_orth_eff * rep.orth)) <= 1e-10);
  CHECK(rep.rec > 0.0);
  CHECK(rep.orth > 0.0);

  // during warm-up the orthogonality term is absent from the total
  Tape<double> t2(&model.params());
  const auto f2 = model.forward(t2, x, plan);
  const auto n2 = total_loss(t2, f2, mask, w, 50);
  const auto rep2 = read_losses(t2, n2, w, 50);
  CHECK(rep2.lambda_orth_eff == 0.0);
  CHECK(rep2.orth > 0.0);  // still computed and logged
  CHECK(std::abs(rep2.total - (rep2.rec + w.shared * rep2.shared +
                               w.align * rep2.align)) <= 1e-10);

  // all-zero weights: the total IS the reconstruction node
  LossWeights w0;
  Tape<double> t3(&model.params());
  const auto f3 = model.forward(t3, x);
  const auto n3 = total_loss(t3, f3, mask, w0, 7);
  CHECK(n3.total == n3.rec);
  CHECK(n3.shared == -1);
  const auto rep3 = read_losses(t3, n3, w0, 7);
  CHECK(rep3.shared == 0.0);
  CHECK(rep3.total == rep3.rec);

  // nonzero shared weight without the decode pass is a hard error
  Tape<double> t4(&model.params());
  const auto f4 = model.forward(t4, x);
  CHECK_THROWS_AS(total_loss(t4, f4, mask, w, 300), Error);

  // negative weights are rejected
  LossWeights bad;
  bad.align = -0.1;
  Tape<double> t5(&model.params());
  const auto f5 = model.forward(t5, x);
  CHECK_THROWS_AS(total_loss(t5, f5, mask, bad, 0), Error);
}

TEST_CASE("batch mean convention") {
  const auto mask = build_two_region_masks(1, 1, 1);
  auto model = micro_model(mask, {2, 3}, 3, 51);
  Rng rng(52);
  const auto x1 = random_array({1, 3, 2}, rng);
  const auto x2 = random_array({1, 3, 3}, rng);

  // duplicate the trial: the mean over the batch is unchanged
  auto dup = [](const DenseArray<double>& a) {
    DenseArray<double> d = DenseArray<double>::zeros({2, a.shape[1], a.shape[2]});
    std::copy(a.data.begin(), a.data.end(), d.data.begin());
    std::copy(a.data.begin(), a.data.end(), d.data.begin() + static_cast<int64_t>(a.data.size()));
    return d;
  };

  LossWeights w;
  w.shared = 1.0;
  w.align = 0.5;
  w.orth = 0.01;
  w.warmup_epochs = 1;

  ForwardPlan plan;
  plan.shared_only = true;
  Tape<double> ta(&model.params());
  const auto fa = model.forward(ta, {x1, x2}, plan);
  const auto ra = read_losses(ta, total_loss(ta, fa, mask, w, 5), w, 5);

  Tape<double> tb(&model.params());
  const auto fb = model.forward(tb, {dup(x1), dup(x2)}, plan);
  const auto rb = read_losses(tb, total_loss(tb, fb, mask, w, 5), w, 5);

  CHECK(rb.rec == doctest::Approx(ra.rec).epsilon(1e-13));
  CHECK(rb.shared == doctest::Approx(ra.shared).epsilon(1e-13));
  CHECK(rb.align == doctest::Approx(ra.align).epsilon(1e-13));
  CHECK(rb.orth == doctest::Approx(ra.orth).epsilon(1e-13));
  CHECK(rb.total == doctest::Approx(ra.total).epsilon(1e-13));
}

TEST_CASE("total loss gradients match finite differences") {
  const auto mask = build_two_region_masks(1, 1, 1);
  auto model = micro_model(mask, {2, 3}, 3, 61);
  Rng rng(62);
  std::vector<DenseArray<double>> x{random_array({2, 3, 2}, rng),
                                    random_array({2, 3, 3}, rng)};
  LossWeights w;
  w.shared = 1.0;
  w.align = 0.5;
  w.orth = 0.01;
  w.warmup_epochs = 1;  // epoch 5 is past warm-up: all four terms live

  const auto rep = grad_check(
      model.params(),
      [&](Tape<double>& t) {
        ForwardPlan plan;
        plan.shared_only = true;
        const auto f = model.forward(t, x, plan);
        return total_loss(t, f, mask, w, 5).total;
      },
      1e-4, 2, 9);
  CHECK(rep.checked > 0);
  CHECK(rep.max_rel_err <= 1e-4);
}

TEST_CASE("loss trajectories agree across fusion paths") {
  const auto mask = build_two_region_masks(2, 1, 1);
  auto a = micro_model(mask, {3, 4}, 5, 71, "two_region");
  auto b = micro_model(mask, {3, 4}, 5, 71, "general");
  Rng rng(72);
  std::vector<DenseArray<double>> x{random_array({4, 5, 3}, rng),
                                    random_array({4, 5, 4}, rng)};
  LossWeights w;
  w.shared = 2.0;
  w.align = 0.1;
  w.orth = 0.05;
  w.warmup_epochs = 1;

  ForwardPlan plan;
  plan.shared_only = true;
  for (int64_t epoch : {0, 1, 2, 3}) {
    Tape<double> ta(&a.params()), tb(&b.params());
    const auto na = total_loss(ta, a.forward(ta, x, plan), mask, w, epoch);
    const auto nb = total_loss(tb, b.forward(tb, x, plan), mask, w, epoch);
    const auto ra = read_losses(ta, na, w, epoch);
    const auto rb = read_losses(tb, nb, w, epoch);
    CHECK(ra.rec == rb.rec);
    CHECK(ra.shared == rb.shared);
    CHECK(ra.align == rb.align);
    CHECK(ra.orth == rb.orth);
    CHECK(ra.total == rb.total);
  }
}
