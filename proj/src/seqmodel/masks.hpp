#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "common/errors.hpp"
#include "diffcore/array.hpp"

namespace ctae {

// Region-membership structure over the latent dimensions. Latent columns are
// grouped into contiguous blocks, one per region-subset code, in canonical
// order: descending popcount, then descending numeric value with region 1 as
// the most significant bit (R=2: 11, 10, 01; R=3: 111, 110, 101, 011, 100,
// 010, 001). Codes use that same bit convention.
struct MembershipMask {
  int64_t regions = 0;
  int64_t dim = 0;  // D

  std::vector<uint32_t> codes;        // per block
  std::vector<int64_t> block_sizes;   // per block, >= 0
  std::vector<int64_t> block_offsets; // first latent dim of each block

  std::vector<std::vector<double>> w;  // per region, [D] in {0,1}
  std::vector<double> s;               // [D], 1 iff claimed by >= 2 regions
  std::vector<double> colsum;          // [D], claim counts
  std::vector<double> recip;           // [D], 1 / colsum

  std::vector<std::vector<double>> w_shared;  // w_r ⊙ s
  std::vector<std::vector<double>> w_priv;    // w_r ⊙ (1 - s)

  bool claims(int64_t region, uint32_t code) const {
    return (code >> (regions - 1 - region)) & 1u;
  }

  int64_t shared_dim() const {
    int64_t n = 0;
    for (double v : s) n += v != 0.0;
    return n;
  }

  // exactly the Eq. 3 layout: blocks 11, 10, 01
  bool exact_two_region() const {
    return regions == 2 && codes.size() == 3 && codes[0] == 3 && codes[1] == 2 &&
           codes[2] == 1;
  }

  int block_of_code(uint32_t code) const {
    for (size_t b = 0; b < codes.size(); ++b)
      if (codes[b] == code) return static_cast<int>(b);
    fail(ErrorKind::config, "no latent block with code " + code_str(code, regions));
  }

  static std::string code_str(uint32_t code, int64_t regions) {
    std::string s;
    for (int64_t r = 0; r < regions; ++r)
      s += ((code >> (regions - 1 - r)) & 1u) ? '1' : '0';
    return s;
  }

  static uint32_t parse_code(const std::string& text, int64_t regions) {
    if (static_cast<int64_t>(text.size()) != regions)
      fail(ErrorKind::config, "subset code '" + text + "' must have exactly " +
                                  std::to_string(regions) + " bits");
    uint32_t c = 0;
    for (char ch : text) {
      if (ch != '0' && ch != '1')
        fail(ErrorKind::config, "subset code '" + text + "' must be binary");
      c = (c << 1) | static_cast<uint32_t>(ch - '0');
    }
    return c;
  }
};

inline MembershipMask build_membership(int64_t regions,
                                       std::vector<std::pair<uint32_t, int64_t>> subset_sizes) {
  if (regions < 2 || regions > 30)
    fail(ErrorKind::config, "membership needs 2..30 regions, got " + std::to_string(regions));
  const uint32_t limit = 1u << regions;
  for (auto& [code, size] : subset_sizes) {
    if (code == 0)
      fail(ErrorKind::config, "latent block code 0" +
                                  std::string(static_cast<size_t>(regions - 1), '0') +
                                  " claims no region");
    if (code >= limit)
      fail(ErrorKind::config, "subset code exceeds region count");
    if (size < 0) fail(ErrorKind::config, "latent block size must be >= 0");
  }
  std::sort(subset_sizes.begin(), subset_sizes.end(), [](const auto& a, const auto& b) {
    const int pa = __builtin_popcount(a.first), pb = __builtin_popcount(b.first);
    if (pa != pb) return pa > pb;
    return a.first > b.first;
  });
  for (size_t i = 1; i < subset_sizes.size(); ++i)
    if (subset_sizes[i].first == subset_sizes[i - 1].first)
      fail(ErrorKind::config, "duplicate subset code " +
                                  MembershipMask::code_str(subset_sizes[i].first, regions));

  MembershipMask m;
  m.regions = regions;
  int64_t off = 0;
  for (const auto& [code, size] : subset_sizes) {
    m.codes.push_back(code);
    m.block_sizes.push_back(size);
    m.block_offsets.push_back(off);
    off += size;
  }
  m.dim = off;
  if (m.dim <= 0) fail(ErrorKind::config, "latent dimension is zero");

  m.w.assign(static_cast<size_t>(regions), std::vector<double>(static_cast<size_t>(m.dim), 0.0));
  for (size_t b = 0; b < m.codes.size(); ++b)
    for (int64_t r = 0; r < regions; ++r)
      if (m.claims(r, m.codes[b]))
        for (int64_t d = 0; d < m.block_sizes[b]; ++d)
          m.w[static_cast<size_t>(r)][static_cast<size_t>(m.block_offsets[b] + d)] = 1.0;

  m.colsum.assign(static_cast<size_t>(m.dim), 0.0);
  for (int64_t r = 0; r < regions; ++r)
    for (int64_t d = 0; d < m.dim; ++d)
      m.colsum[static_cast<size_t>(d)] += m.w[static_cast<size_t>(r)][static_cast<size_t>(d)];
  m.s.resize(static_cast<size_t>(m.dim));
  m.recip.resize(static_cast<size_t>(m.dim));
  for (int64_t d = 0; d < m.dim; ++d) {
    if (m.colsum[static_cast<size_t>(d)] < 1.0)
      fail(ErrorKind::internal, "latent dimension with zero claimants");
    m.s[static_cast<size_t>(d)] = m.colsum[static_cast<size_t>(d)] >= 2.0 ? 1.0 : 0.0;
    m.recip[static_cast<size_t>(d)] = 1.0 / m.colsum[static_cast<size_t>(d)];
  }

  m.w_shared.assign(static_cast<size_t>(regions),
                    std::vector<double>(static_cast<size_t>(m.dim), 0.0));
  m.w_priv.assign(static_cast<size_t>(regions),
                  std::vector<double>(static_cast<size_t>(m.dim), 0.0));
  for (int64_t r = 0; r < regions; ++r)
    for (int64_t d = 0; d < m.dim; ++d) {
      const double wr = m.w[static_cast<size_t>(r)][static_cast<size_t>(d)];
      m.w_shared[static_cast<size_t>(r)][static_cast<size_t>(d)] =
          wr * m.s[static_cast<size_t>(d)];
      m.w_priv[static_cast<size_t>(r)][static_cast<size_t>(d)] =
          wr * (1.0 - m.s[static_cast<size_t>(d)]);
    }
  return m;
}

// Eq. 3: w_1 = [1_{d_s}, 1_{d_1}, 0_{d_2}], w_2 = [1_{d_s}, 0_{d_1}, 1_{d_2}].
inline MembershipMask build_two_region_masks(int64_t d_s, int64_t d_1, int64_t d_2) {
  return build_membership(2, {{3u, d_s}, {2u, d_1}, {1u, d_2}});
}

// Slices one block out of batched latents [K, T, D] -> [K, T, size].
template <class Real>
DenseArray<Real> extract_block(const DenseArray<Real>& z, const MembershipMask& m, int block) {
  if (z.shape.size() != 3 || z.shape[2] != m.dim)
    fail(ErrorKind::shape, "extract_block: latents must be [K,T," + std::to_string(m.dim) +
                               "], got " + shape_str(z.shape));
  const int64_t K = z.shape[0], T = z.shape[1], D = m.dim;
  const int64_t off = m.block_offsets[static_cast<size_t>(block)];
  const int64_t sz = m.block_sizes[static_cast<size_t>(block)];
  DenseArray<Real> out = DenseArray<Real>::zeros({K, T, sz});
  for (int64_t k = 0; k < K; ++k)
    for (int64_t t = 0; t < T; ++t)
      for (int64_t d = 0; d < sz; ++d)
        out.data[static_cast<size_t>((k * T + t) * sz + d)] =
            z.data[static_cast<size_t>((k * T + t) * D + off + d)];
  return out;
}

}  // namespace ctae
