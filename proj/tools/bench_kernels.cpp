// Quick throughput probe for the dense kernels across backends. Not a test;
// used to sanity-check that the SIMD paths actually pay off on a given box.
#include <chrono>
#include <cstdio>
#include <vector>

#include "diffcore/rng.hpp"
#include "kernels/kernels.hpp"

using namespace ctae;

namespace {

double bench_gemm(int64_t m, int64_t k, int64_t n, int reps) {
  Rng rng(7);
  std::vector<double> a(static_cast<size_t>(m * k)), b(static_cast<size_t>(k * n)),
      c(static_cast<size_t>(m * n));
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  const auto& K = kernels::table64();
  K.gemm_nn(m, k, n, a.data(), b.data(), c.data(), false);  // warm
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) K.gemm_nn(m, k, n, a.data(), b.data(), c.data(), false);
  const auto t1 = std::chrono::steady_clock::now();
  const double sec = std::chrono::duration<double>(t1 - t0).count();
  return 2.0 * double(m) * double(k) * double(n) * reps / sec / 1e9;
}

}  // namespace

int main() {
  for (kernels::Backend b : kernels::available_backends()) {
    kernels::set_backend(b);
    std::printf("backend %-6s  gemm 256x256x256: %6.2f GFLOP/s   gemm 960x64x64: %6.2f GFLOP/s\n",
                kernels::backend_name(b).c_str(), bench_gemm(256, 256, 256, 40),
                bench_gemm(960, 64, 64, 200));
  }
  return 0;
}
