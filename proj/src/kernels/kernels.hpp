#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ctae::kernels {

// Dense inner loops used by the autodiff engine. Every kernel has a scalar
// reference implementation and may have SIMD variants selected at runtime.
//
// Contract shared by all backends: each output element is formed by the same
// sequence of rounded operations as the scalar reference (reductions run in
// ascending index order, one rounding per step; SIMD lanes only span
// independent outputs). Backends are therefore bit-exact equivalents, which
// the kernel tests assert with exact comparisons.
template <class Real>
struct KernelTable {
  // C[m x n] = A[m x k] * B[k x n]; += when accumulate.
  void (*gemm_nn)(int64_t m, int64_t k, int64_t n, const Real* A, const Real* B,
                  Real* C, bool accumulate);
  // C[m x n] = A[k x m]^T * B[k x n]; += when accumulate.
  void (*gemm_tn)(int64_t m, int64_t k, int64_t n, const Real* A, const Real* B,
                  Real* C, bool accumulate);
  void (*add)(int64_t n, const Real* a, const Real* b, Real* c);
  void (*sub)(int64_t n, const Real* a, const Real* b, Real* c);
  void (*mul)(int64_t n, const Real* a, const Real* b, Real* c);
  void (*scale)(int64_t n, const Real* a, Real alpha, Real* c);
  // y += alpha * x
  void (*axpy)(int64_t n, Real alpha, const Real* x, Real* y);
  void (*relu_fwd)(int64_t n, const Real* x, Real* y);
  // dx += dy where x > 0
  void (*relu_bwd)(int64_t n, const Real* x, const Real* dy, Real* dx);
  // y[r,:] = x[r,:] op v  for r in [0, rows)
  void (*bcast_add)(int64_t rows, int64_t n, const Real* x, const Real* v, Real* y);
  void (*bcast_mul)(int64_t rows, int64_t n, const Real* x, const Real* v, Real* y);
  // acc[j] += sum_r x[r,j], r ascending
  void (*colsum_acc)(int64_t rows, int64_t n, const Real* x, Real* acc);
};

enum class Backend { scalar, avx2, neon };

std::string backend_name(Backend b);
std::vector<Backend> available_backends();
Backend active_backend();
// Throws ctae::Error if the backend is not available on this machine.
// Honors CTAE_KERNELS=scalar|avx2|neon for the initial default.
void set_backend(Backend b);

const KernelTable<double>& table64();
const KernelTable<float>& table32();

template <class Real>
const KernelTable<Real>& table();
template <>
inline const KernelTable<double>& table<double>() { return table64(); }
template <>
inline const KernelTable<float>& table<float>() { return table32(); }

// Full reduction with a pinned left-to-right order. All loss/statistics sums
// go through this; deliberately not SIMD-dispatched so the reduction order is
// the same no matter which backend is active.
template <class Real>
Real sum_strict(int64_t n, const Real* x) {
  Real s = 0;
  for (int64_t i = 0; i < n; ++i) s += x[i];
  return s;
}

// Pure permutation, exact on any path. At[n x m] = A[m x n]^T.
template <class Real>
void transpose(int64_t m, int64_t n, const Real* A, Real* At) {
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) At[j * m + i] = A[i * n + j];
}

}  // namespace ctae::kernels
