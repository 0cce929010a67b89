#pragma once

#include <cstdint>
#include <cstring>

namespace ctae::kernels::scalar {

// Reference semantics for every kernel. The loops below double as the
// rounding-order specification the SIMD variants must reproduce: an output
// element accumulates its k-contributions in ascending k, one rounded
// add per step, on top of either 0 or the prior value of C.
//
// The j loops are lane-parallel (no cross-j reduction), so compiler
// auto-vectorization cannot change results here.

template <class Real>
void gemm_nn(int64_t m, int64_t k, int64_t n, const Real* A, const Real* B,
             Real* C, bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    Real* c = C + i * n;
    if (!accumulate) std::memset(c, 0, sizeof(Real) * static_cast<size_t>(n));
    const Real* a = A + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const Real ap = a[p];
      const Real* b = B + p * n;
      for (int64_t j = 0; j < n; ++j) c[j] += ap * b[j];
    }
  }
}

template <class Real>
void gemm_tn(int64_t m, int64_t k, int64_t n, const Real* A, const Real* B,
             Real* C, bool accumulate) {
  if (!accumulate) std::memset(C, 0, sizeof(Real) * static_cast<size_t>(m * n));
  for (int64_t p = 0; p < k; ++p) {
    const Real* a = A + p * m;
    const Real* b = B + p * n;
    for (int64_t i = 0; i < m; ++i) {
      const Real ai = a[i];
      Real* c = C + i * n;
      for (int64_t j = 0; j < n; ++j) c[j] += ai * b[j];
    }
  }
}

template <class Real>
void add(int64_t n, const Real* a, const Real* b, Real* c) {
  for (int64_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

template <class Real>
void sub(int64_t n, const Real* a, const Real* b, Real* c) {
  for (int64_t i = 0; i < n; ++i) c[i] = a[i] - b[i];
}

template <class Real>
void mul(int64_t n, const Real* a, const Real* b, Real* c) {
  for (int64_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

template <class Real>
void scale(int64_t n, const Real* a, Real alpha, Real* c) {
  for (int64_t i = 0; i < n; ++i) c[i] = a[i] * alpha;
}

template <class Real>
void axpy(int64_t n, Real alpha, const Real* x, Real* y) {
  for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class Real>
void relu_fwd(int64_t n, const Real* x, Real* y) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > Real(0) ? x[i] : Real(0);
}

template <class Real>
void relu_bwd(int64_t n, const Real* x, const Real* dy, Real* dx) {
  for (int64_t i = 0; i < n; ++i)
    if (x[i] > Real(0)) dx[i] += dy[i];
}

template <class Real>
void bcast_add(int64_t rows, int64_t n, const Real* x, const Real* v, Real* y) {
  for (int64_t r = 0; r < rows; ++r) {
    const Real* xr = x + r * n;
    Real* yr = y + r * n;
    for (int64_t j = 0; j < n; ++j) yr[j] = xr[j] + v[j];
  }
}

template <class Real>
void bcast_mul(int64_t rows, int64_t n, const Real* x, const Real* v, Real* y) {
  for (int64_t r = 0; r < rows; ++r) {
    const Real* xr = x + r * n;
    Real* yr = y + r * n;
    for (int64_t j = 0; j < n; ++j) yr[j] = xr[j] * v[j];
  }
}

template <class Real>
void colsum_acc(int64_t rows, int64_t n, const Real* x, Real* acc) {
  for (int64_t r = 0; r < rows; ++r) {
    const Real* xr = x + r * n;
    for (int64_t j = 0; j < n; ++j) acc[j] += xr[j];
  }
}

}  // namespace ctae::kernels::scalar
