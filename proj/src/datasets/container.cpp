#include "datasets/container.hpp"

#include "common/binio.hpp"
#include "common/errors.hpp"
#include "common/version.hpp"

namespace ctae {

namespace {

constexpr char kDataMagic[8] = {'C', 'T', 'A', 'E', 'D', 'A', 'T', 'A'};
constexpr char kTruthMagic[8] = {'C', 'T', 'A', 'E', 'G', 'T', '\0', '\0'};

using binio::checked_dim;
using binio::Reader;
using binio::Writer;

}  // namespace

void save_container(const std::string& path, const std::vector<RegionRecording>& regions) {
  if (regions.empty()) fail(ErrorKind::shape, "container needs at least one region");
  const int64_t K = regions[0].trials, T = regions[0].t_len;
  const double bin_ms = regions[0].bin_ms;
  const auto& labels = regions[0].labels;
  for (const auto& r : regions) {
    r.validate();
    if (r.trials != K || r.t_len != T)
      fail(ErrorKind::shape, "all regions must share trials and t_len");
    if (r.labels != labels) fail(ErrorKind::shape, "all regions must share labels");
  }

  Writer w;
  w.raw(kDataMagic, 8);
  w.put<uint32_t>(kContainerFormatVersion);
  w.put<uint32_t>(static_cast<uint32_t>(regions.size()));
  w.put<int64_t>(K);
  w.put<int64_t>(T);
  w.put<double>(bin_ms);
  w.put<uint8_t>(labels.empty() ? 0 : 1);
  for (const auto& r : regions) {
    w.put<int64_t>(r.region_id);
    w.put<int64_t>(r.channels);
    w.put<uint8_t>(r.counts ? 1 : 0);
    w.put<int64_t>(r.targets.data.empty() ? 0 : r.targets.shape[1]);
  }
  if (!labels.empty())
    for (const int64_t l : labels) w.put<int64_t>(l);
  for (const auto& r : regions) {
    w.put_f64s(r.values.data);
    if (!r.targets.data.empty()) w.put_f64s(r.targets.data);
  }
  w.finish(path);
}

std::vector<RegionRecording> load_container(const std::string& path) {
  Reader rd(path, kDataMagic);
  rd.check_version(rd.get<uint32_t>(), kContainerFormatVersion);
  const uint32_t n_regions = rd.get<uint32_t>();
  if (n_regions == 0 || n_regions > 64) fail(ErrorKind::io, "implausible region count in " + path);
  const int64_t K = checked_dim(rd.get<int64_t>(), "trial count", path);
  const int64_t T = checked_dim(rd.get<int64_t>(), "bin count", path);
  const double bin_ms = rd.get<double>();
  const bool has_labels = rd.get<uint8_t>() != 0;

  struct Head {
    int64_t id, channels, target_dims;
    bool counts;
  };
  std::vector<Head> heads;
  for (uint32_t i = 0; i < n_regions; ++i) {
    Head h;
    h.id = rd.get<int64_t>();
    h.channels = checked_dim(rd.get<int64_t>(), "channel count", path);
    h.counts = rd.get<uint8_t>() != 0;
    h.target_dims = checked_dim(rd.get<int64_t>(), "target dims", path);
    heads.push_back(h);
  }
  std::vector<int64_t> labels;
  if (has_labels) {
    labels.resize(static_cast<size_t>(K));
    rd.raw(labels.data(), static_cast<size_t>(K) * sizeof(int64_t));
  }
  std::vector<RegionRecording> out;
  for (const auto& h : heads) {
    RegionRecording r;
    r.region_id = h.id;
    r.trials = K;
    r.channels = h.channels;
    r.t_len = T;
    r.bin_ms = bin_ms;
    r.counts = h.counts;
    r.labels = labels;
    r.values = DenseArray<double>::zeros({K, h.channels, T});
    rd.get_f64s(r.values.data, r.values.data.size());
    if (h.target_dims > 0) {
      r.targets = DenseArray<double>::zeros({K, h.target_dims, T});
      rd.get_f64s(r.targets.data, r.targets.data.size());
    }
    r.validate();
    out.push_back(std::move(r));
  }
  rd.expect_end();
  return out;
}

void save_ground_truth(const std::string& path, const GroundTruth& truth) {
  const auto& m = truth.mask;
  if (m.dim <= 0) fail(ErrorKind::shape, "ground truth has an empty mask");
  if (truth.latents.shape.size() != 3)
    fail(ErrorKind::shape, "ground-truth latents must be [K,D,T]");
  Writer w;
  w.raw(kTruthMagic, 8);
  w.put<uint32_t>(kGroundTruthFormatVersion);
  w.put<uint32_t>(static_cast<uint32_t>(m.regions));
  w.put<int64_t>(truth.latents.shape[0]);
  w.put<int64_t>(m.dim);
  w.put<int64_t>(truth.latents.shape[2]);
  w.put<uint32_t>(static_cast<uint32_t>(m.codes.size()));
  for (size_t b = 0; b < m.codes.size(); ++b) {
    w.put<uint32_t>(m.codes[b]);
    w.put<int64_t>(m.block_sizes[b]);
  }
  w.put<uint8_t>(truth.labels.empty() ? 0 : 1);
  if (!truth.labels.empty())
    for (const int64_t l : truth.labels) w.put<int64_t>(l);
  w.put_f64s(truth.latents.data);
  w.put<uint32_t>(static_cast<uint32_t>(truth.mix_w1.size()));
  for (size_t r = 0; r < truth.mix_w1.size(); ++r) {
    const auto& w1 = truth.mix_w1[r];
    const bool has_w2 = r < truth.mix_w2.size() && !truth.mix_w2[r].data.empty();
    w.put<uint8_t>(has_w2 ? 1 : 0);
    w.put<int64_t>(w1.shape.size() == 2 ? w1.shape[0] : 0);
    w.put<int64_t>(w1.shape.size() == 2 ? w1.shape[1] : 0);
    w.put_f64s(w1.data);
    if (has_w2) {
      const auto& w2 = truth.mix_w2[r];
      w.put<int64_t>(w2.shape[0]);
      w.put<int64_t>(w2.shape[1]);
      w.put_f64s(w2.data);
    }
    const auto& sc = r < truth.mix_scale.size() ? truth.mix_scale[r] : std::vector<double>{};
    w.put<int64_t>(static_cast<int64_t>(sc.size()));
    w.put_f64s(sc);
  }
  w.finish(path);
}

GroundTruth load_ground_truth(const std::string& path) {
  Reader rd(path, kTruthMagic);
  rd.check_version(rd.get<uint32_t>(), kGroundTruthFormatVersion);
  const uint32_t regions = rd.get<uint32_t>();
  if (regions < 2 || regions > 30) fail(ErrorKind::io, "implausible region count in " + path);
  const int64_t K = checked_dim(rd.get<int64_t>(), "trial count", path);
  const int64_t D = checked_dim(rd.get<int64_t>(), "latent dim", path);
  const int64_t T = checked_dim(rd.get<int64_t>(), "bin count", path);
  const uint32_t n_blocks = rd.get<uint32_t>();
  if (n_blocks == 0 || n_blocks > 1024) fail(ErrorKind::io, "implausible block count in " + path);
  std::vector<std::pair<uint32_t, int64_t>> sizes;
  for (uint32_t b = 0; b < n_blocks; ++b) {
    const uint32_t code = rd.get<uint32_t>();
    const int64_t size = checked_dim(rd.get<int64_t>(), "block size", path);
    sizes.push_back({code, size});
  }
  GroundTruth truth;
  truth.mask = build_membership(regions, sizes);
  if (truth.mask.dim != D) fail(ErrorKind::io, "mask blocks do not sum to latent dim in " + path);
  if (rd.get<uint8_t>() != 0) {
    truth.labels.resize(static_cast<size_t>(K));
    rd.raw(truth.labels.data(), static_cast<size_t>(K) * sizeof(int64_t));
  }
  truth.latents = DenseArray<double>::zeros({K, D, T});
  rd.get_f64s(truth.latents.data, truth.latents.data.size());
  const uint32_t n_mix = rd.get<uint32_t>();
  if (n_mix != regions) fail(ErrorKind::io, "mixing map count mismatch in " + path);
  for (uint32_t r = 0; r < n_mix; ++r) {
    const bool has_w2 = rd.get<uint8_t>() != 0;
    const int64_t r1 = checked_dim(rd.get<int64_t>(), "mixing rows", path);
    const int64_t c1 = checked_dim(rd.get<int64_t>(), "mixing cols", path);
    DenseArray<double> w1 = DenseArray<double>::zeros({r1, c1});
    rd.get_f64s(w1.data, static_cast<size_t>(r1 * c1));
    truth.mix_w1.push_back(std::move(w1));
    if (has_w2) {
      const int64_t r2 = checked_dim(rd.get<int64_t>(), "mixing rows", path);
      const int64_t c2 = checked_dim(rd.get<int64_t>(), "mixing cols", path);
      DenseArray<double> w2 = DenseArray<double>::zeros({r2, c2});
      rd.get_f64s(w2.data, static_cast<size_t>(r2 * c2));
      truth.mix_w2.push_back(std::move(w2));
    } else {
      truth.mix_w2.emplace_back(DenseArray<double>::zeros({0}));
    }
    const int64_t ns = checked_dim(rd.get<int64_t>(), "scale size", path);
    std::vector<double> sc;
    rd.get_f64s(sc, static_cast<size_t>(ns));
    truth.mix_scale.push_back(std::move(sc));
  }
  rd.expect_end();
  return truth;
}

}  // namespace ctae
