#include "datasets/synthetic.hpp"

#include <cmath>

#include "common/errors.hpp"
#include "diffcore/rng.hpp"

namespace ctae {

namespace detail {
void smooth_rows_inplace(double* data, int64_t rows, int64_t t_len, int64_t kernel);
}

namespace {

constexpr double kPi = 3.14159265358979323846;

void unit_rms(double* row, int64_t n) {
  double s = 0;
  for (int64_t i = 0; i < n; ++i) s += row[i] * row[i];
  const double rms = std::sqrt(s / static_cast<double>(n));
  if (rms < 1e-9)
    fail(ErrorKind::numeric, "degenerate planted latent row; try another seed");
  for (int64_t i = 0; i < n; ++i) row[i] /= rms;
}

void draw_smooth_row(double* row, int64_t t_len, int64_t kernel, Rng& rng) {
  for (int64_t i = 0; i < t_len; ++i) row[i] = rng.normal();
  detail::smooth_rows_inplace(row, 1, t_len, kernel);
  unit_rms(row, t_len);
}

// two-pass modified Gram-Schmidt over the D rows of one trial
void orthogonalize(double* rows, int64_t d, int64_t t_len) {
  for (int pass = 0; pass < 2; ++pass)
    for (int64_t i = 0; i < d; ++i) {
      double* ri = rows + i * t_len;
      for (int64_t j = 0; j < i; ++j) {
        const double* rj = rows + j * t_len;
        double dot = 0, nrm = 0;
        for (int64_t t = 0; t < t_len; ++t) {
          dot += ri[t] * rj[t];
          nrm += rj[t] * rj[t];
        }
        const double coef = dot / nrm;
        for (int64_t t = 0; t < t_len; ++t) ri[t] -= coef * rj[t];
      }
    }
  for (int64_t i = 0; i < d; ++i) unit_rms(rows + i * t_len, t_len);
}

}  // namespace

void SyntheticSpec::validate() const {
  if (regions < 2) fail(ErrorKind::config, "synthetic data needs at least 2 regions");
  if (subset_sizes.empty()) fail(ErrorKind::config, "synthetic data needs latent blocks");
  if (trials < 1) fail(ErrorKind::config, "synthetic data needs trials >= 1");
  if (t_len < 2) fail(ErrorKind::config, "synthetic data needs t_len >= 2");
  if (static_cast<int64_t>(channels.size()) != regions)
    fail(ErrorKind::config, "synthetic data needs one channel count per region");
  if (kernel < 1) fail(ErrorKind::config, "latent smoothness kernel must be >= 1");
  if (mixing != "linear" && mixing != "tanh")
    fail(ErrorKind::config, "mixing must be linear or tanh");
  if (noise_std < 0) fail(ErrorKind::config, "noise std must be non-negative");
  if (conditions < 1) fail(ErrorKind::config, "condition count must be >= 1");
  if (bin_ms <= 0) fail(ErrorKind::config, "bin width must be positive");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  MembershipMask mask = build_membership(spec.regions, spec.subset_sizes);
  const int64_t K = spec.trials, T = spec.t_len, D = mask.dim, R = spec.regions;
  if (D > T)
    fail(ErrorKind::config, std::to_string(D) + " latent rows cannot be mutually orthogonal over " +
                                std::to_string(T) + " time bins; need t_len >= total dims");

  std::vector<int64_t> region_dims(static_cast<size_t>(R), 0);
  for (int64_t r = 0; r < R; ++r) {
    for (size_t b = 0; b < mask.codes.size(); ++b)
      if (mask.claims(r, mask.codes[b])) region_dims[static_cast<size_t>(r)] += mask.block_sizes[b];
    if (region_dims[static_cast<size_t>(r)] < 1)
      fail(ErrorKind::config, "region " + std::to_string(r + 1) + " claims no latent dims");
    if (spec.channels[static_cast<size_t>(r)] < region_dims[static_cast<size_t>(r)])
      fail(ErrorKind::config, "region " + std::to_string(r + 1) + " has fewer channels (" +
                                  std::to_string(spec.channels[static_cast<size_t>(r)]) +
                                  ") than claimed latent dims (" +
                                  std::to_string(region_dims[static_cast<size_t>(r)]) + ")");
  }
  if (spec.conditions > 1 && mask.shared_dim() < 1)
    fail(ErrorKind::config, "condition offsets need at least one shared latent dimension");

  // indices of shared dims in canonical order; offsets target the first two
  std::vector<int64_t> shared_idx;
  for (int64_t d = 0; d < D; ++d)
    if (mask.s[static_cast<size_t>(d)] != 0.0) shared_idx.push_back(d);

  Rng rng(spec.seed);

  // fixed temporal profiles carrying the condition code
  std::vector<double> prof_u(static_cast<size_t>(T)), prof_v(static_cast<size_t>(T));
  draw_smooth_row(prof_u.data(), T, spec.kernel, rng);
  draw_smooth_row(prof_v.data(), T, spec.kernel, rng);

  GroundTruth truth;
  truth.mask = mask;
  truth.labels.resize(static_cast<size_t>(K));
  for (int64_t k = 0; k < K; ++k) truth.labels[static_cast<size_t>(k)] = k % spec.conditions;

  // mixing maps, drawn before trial latents so they depend on seed alone
  for (int64_t r = 0; r < R; ++r) {
    const int64_t d_r = region_dims[static_cast<size_t>(r)];
    const int64_t n_r = spec.channels[static_cast<size_t>(r)];
    if (spec.mixing == "linear") {
      DenseArray<double> w = DenseArray<double>::zeros({n_r, d_r});
      const double sc = 1.0 / std::sqrt(static_cast<double>(d_r));
      for (auto& v : w.data) v = rng.normal() * sc;
      truth.mix_w1.push_back(std::move(w));
      truth.mix_w2.emplace_back(DenseArray<double>::zeros({0}));
    } else {
      const int64_t h = 4 * d_r;
      DenseArray<double> w1 = DenseArray<double>::zeros({h, d_r});
      for (auto& v : w1.data) v = rng.normal();
      for (int64_t i = 0; i < h; ++i) {  // spherical rows
        double s = 0;
        for (int64_t j = 0; j < d_r; ++j) s += w1.data[static_cast<size_t>(i * d_r + j)] *
                                               w1.data[static_cast<size_t>(i * d_r + j)];
        const double nrm = std::sqrt(s);
        if (nrm < 1e-12) fail(ErrorKind::numeric, "degenerate mixing row");
        for (int64_t j = 0; j < d_r; ++j) w1.data[static_cast<size_t>(i * d_r + j)] /= nrm;
      }
      DenseArray<double> w2 = DenseArray<double>::zeros({n_r, h});
      const double sc = 1.0 / std::sqrt(static_cast<double>(h));
      for (auto& v : w2.data) v = rng.normal() * sc;
      truth.mix_w1.push_back(std::move(w1));
      truth.mix_w2.push_back(std::move(w2));
    }
  }

  // planted rows per trial
  truth.latents = DenseArray<double>::zeros({K, D, T});
  for (int64_t k = 0; k < K; ++k) {
    double* rows = truth.latents.data.data() + k * D * T;
    for (int64_t d = 0; d < D; ++d) draw_smooth_row(rows + d * T, T, spec.kernel, rng);
    if (spec.conditions > 1) {
      const double theta =
          2.0 * kPi * static_cast<double>(truth.labels[static_cast<size_t>(k)]) /
          static_cast<double>(spec.conditions);
      double* s0 = rows + shared_idx[0] * T;
      for (int64_t t = 0; t < T; ++t) s0[t] += std::cos(theta) * prof_u[static_cast<size_t>(t)];
      if (shared_idx.size() >= 2) {
        double* s1 = rows + shared_idx[1] * T;
        for (int64_t t = 0; t < T; ++t) s1[t] += std::sin(theta) * prof_v[static_cast<size_t>(t)];
      }
    }
    orthogonalize(rows, D, T);
  }

  // noiseless signals
  SyntheticData out;
  for (int64_t r = 0; r < R; ++r) {
    const int64_t d_r = region_dims[static_cast<size_t>(r)];
    const int64_t n_r = spec.channels[static_cast<size_t>(r)];
    RegionRecording rec;
    rec.region_id = r + 1;
    rec.trials = K;
    rec.channels = n_r;
    rec.t_len = T;
    rec.bin_ms = spec.bin_ms;
    rec.counts = false;
    rec.values = DenseArray<double>::zeros({K, n_r, T});
    rec.labels = truth.labels;

    std::vector<double> claimed(static_cast<size_t>(d_r * T));
    std::vector<double> hidden;
    for (int64_t k = 0; k < K; ++k) {
      const double* rows = truth.latents.data.data() + k * D * T;
      int64_t ci = 0;
      for (int64_t d = 0; d < D; ++d)
        if (mask.w[static_cast<size_t>(r)][static_cast<size_t>(d)] != 0.0) {
          std::copy_n(rows + d * T, T, claimed.data() + ci * T);
          ++ci;
        }
      double* x = rec.values.data.data() + k * n_r * T;
      if (spec.mixing == "linear") {
        const auto& w = truth.mix_w1[static_cast<size_t>(r)];
        for (int64_t n = 0; n < n_r; ++n)
          for (int64_t t = 0; t < T; ++t) {
            double acc = 0;
            for (int64_t d = 0; d < d_r; ++d)
              acc += w.data[static_cast<size_t>(n * d_r + d)] * claimed[static_cast<size_t>(d * T + t)];
            x[n * T + t] = acc;
          }
      } else {
        const auto& w1 = truth.mix_w1[static_cast<size_t>(r)];
        const auto& w2 = truth.mix_w2[static_cast<size_t>(r)];
        const int64_t h = 4 * d_r;
        hidden.assign(static_cast<size_t>(h * T), 0.0);
        for (int64_t i = 0; i < h; ++i)
          for (int64_t t = 0; t < T; ++t) {
            double acc = 0;
            for (int64_t d = 0; d < d_r; ++d)
              acc += w1.data[static_cast<size_t>(i * d_r + d)] * claimed[static_cast<size_t>(d * T + t)];
            hidden[static_cast<size_t>(i * T + t)] = std::tanh(acc);
          }
        for (int64_t n = 0; n < n_r; ++n)
          for (int64_t t = 0; t < T; ++t) {
            double acc = 0;
            for (int64_t i = 0; i < h; ++i)
              acc += w2.data[static_cast<size_t>(n * h + i)] * hidden[static_cast<size_t>(i * T + t)];
            x[n * T + t] = acc;
          }
      }
    }
    out.regions.push_back(std::move(rec));
  }

  // per-channel RMS normalization of the noiseless signal, then noise
  for (int64_t r = 0; r < R; ++r) {
    auto& rec = out.regions[static_cast<size_t>(r)];
    const int64_t n_r = rec.channels;
    std::vector<double> scale(static_cast<size_t>(n_r), 1.0);
    for (int64_t n = 0; n < n_r; ++n) {
      double s = 0;
      for (int64_t k = 0; k < K; ++k)
        for (int64_t t = 0; t < T; ++t) {
          const double v = rec.values.data[static_cast<size_t>((k * n_r + n) * T + t)];
          s += v * v;
        }
      const double rms = std::sqrt(s / static_cast<double>(K * T));
      if (rms > 1e-12) scale[static_cast<size_t>(n)] = 1.0 / rms;
    }
    for (int64_t k = 0; k < K; ++k)
      for (int64_t n = 0; n < n_r; ++n)
        for (int64_t t = 0; t < T; ++t)
          rec.values.data[static_cast<size_t>((k * n_r + n) * T + t)] *= scale[static_cast<size_t>(n)];
    truth.mix_scale.push_back(std::move(scale));
  }
  if (spec.noise_std > 0)
    for (int64_t r = 0; r < R; ++r) {
      auto& rec = out.regions[static_cast<size_t>(r)];
      for (auto& v : rec.values.data) v += spec.noise_std * rng.normal();
    }

  out.truth = std::move(truth);
  return out;
}

}  // namespace ctae
