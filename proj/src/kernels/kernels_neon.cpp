// NEON variants (aarch64, where NEON is baseline). Same bit-exactness
// contract as the AVX2 unit: lanes span independent outputs only, no fused
// multiply-adds, reductions stay serial per output element.
#if defined(__aarch64__)

#include <arm_neon.h>

#include "kernels/kernels.hpp"

namespace ctae::kernels {
namespace {

template <class Real>
struct V;

template <>
struct V<double> {
  using reg = float64x2_t;
  using mask = uint64x2_t;
  static constexpr int64_t width = 2;
  static reg load(const double* p) { return vld1q_f64(p); }
  static void store(double* p, reg v) { vst1q_f64(p, v); }
  static reg bcast(double x) { return vdupq_n_f64(x); }
  static reg zero() { return vdupq_n_f64(0.0); }
  static reg add(reg a, reg b) { return vaddq_f64(a, b); }
  static reg sub(reg a, reg b) { return vsubq_f64(a, b); }
  static reg mul(reg a, reg b) { return vmulq_f64(a, b); }
  static mask gt_zero(reg a) { return vcgtq_f64(a, zero()); }
  static reg select(mask m, reg a, reg b) { return vbslq_f64(m, a, b); }
};

template <>
struct V<float> {
  using reg = float32x4_t;
  using mask = uint32x4_t;
  static constexpr int64_t width = 4;
  static reg load(const float* p) { return vld1q_f32(p); }
  static void store(float* p, reg v) { vst1q_f32(p, v); }
  static reg bcast(float x) { return vdupq_n_f32(x); }
  static reg zero() { return vdupq_n_f32(0.0f); }
  static reg add(reg a, reg b) { return vaddq_f32(a, b); }
  static reg sub(reg a, reg b) { return vsubq_f32(a, b); }
  static reg mul(reg a, reg b) { return vmulq_f32(a, b); }
  static mask gt_zero(reg a) { return vcgtq_f32(a, zero()); }
  static reg select(mask m, reg a, reg b) { return vbslq_f32(m, a, b); }
};

template <class Real>
constexpr int64_t kTile = 4 * V<Real>::width;

template <class Real, class AAt>
void gemm_row(int64_t k, int64_t n, AAt a_at, const Real* B, Real* c,
              bool accumulate) {
  using W = V<Real>;
  const int64_t w = W::width;
  int64_t j = 0;
  for (; j + kTile<Real> <= n; j += kTile<Real>) {
    typename W::reg a0, a1, a2, a3;
    if (accumulate) {
      a0 = W::load(c + j);
      a1 = W::load(c + j + w);
      a2 = W::load(c + j + 2 * w);
      a3 = W::load(c + j + 3 * w);
    } else {
      a0 = a1 = a2 = a3 = W::zero();
    }
    for (int64_t p = 0; p < k; ++p) {
      const typename W::reg ap = W::bcast(a_at(p));
      const Real* b = B + p * n + j;
      a0 = W::add(a0, W::mul(ap, W::load(b)));
      a1 = W::add(a1, W::mul(ap, W::load(b + w)));
      a2 = W::add(a2, W::mul(ap, W::load(b + 2 * w)));
      a3 = W::add(a3, W::mul(ap, W::load(b + 3 * w)));
    }
    W::store(c + j, a0);
    W::store(c + j + w, a1);
    W::store(c + j + 2 * w, a2);
    W::store(c + j + 3 * w, a3);
  }
  for (; j + W::width <= n; j += W::width) {
    typename W::reg a = accumulate ? W::load(c + j) : W::zero();
    for (int64_t p = 0; p < k; ++p)
      a = W::add(a, W::mul(W::bcast(a_at(p)), W::load(B + p * n + j)));
    W::store(c + j, a);
  }
  for (; j < n; ++j) {
    Real a = accumulate ? c[j] : Real(0);
    for (int64_t p = 0; p < k; ++p) a += a_at(p) * B[p * n + j];
    c[j] = a;
  }
}

template <class Real>
void gemm_nn(int64_t m, int64_t k, int64_t n, const Real* A, const Real* B,
             Real* C, bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    const Real* a = A + i * k;
    gemm_row<Real>(k, n, [a](int64_t p) { return a[p]; }, B, C + i * n,
                   accumulate);
  }
}

template <class Real>
void gemm_tn(int64_t m, int64_t k, int64_t n, const Real* A, const Real* B,
             Real* C, bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    gemm_row<Real>(k, n, [A, m, i](int64_t p) { return A[p * m + i]; }, B,
                   C + i * n, accumulate);
  }
}

template <class Real>
void add(int64_t n, const Real* a, const Real* b, Real* c) {
  using W = V<Real>;
  int64_t i = 0;
  for (; i + W::width <= n; i += W::width)
    W::store(c + i, W::add(W::load(a + i), W::load(b + i)));
  for (; i < n; ++i) c[i] = a[i] + b[i];
}

template <class Real>
void sub(int64_t n, const Real* a, const Real* b, Real* c) {
  using W = V<Real>;
  int64_t i = 0;
  for (; i + W::width <= n; i += W::width)
    W::store(c + i, W::sub(W::load(a + i), W::load(b + i)));
  for (; i < n; ++i) c[i] = a[i] - b[i];
}

template <class Real>
void mul(int64_t n, const Real* a, const Real* b, Real* c) {
  using W = V<Real>;
  int64_t i = 0;
  for (; i + W::width <= n; i += W::width)
    W::store(c + i, W::mul(W::load(a + i), W::load(b + i)));
  for (; i < n; ++i) c[i] = a[i] * b[i];
}

template <class Real>
void scale(int64_t n, const Real* a, Real alpha, Real* c) {
  using W = V<Real>;
  const typename W::reg va = W::bcast(alpha);
  int64_t i = 0;
  for (; i + W::width <= n; i += W::width) W::store(c + i, W::mul(W::load(a + i), va));
  for (; i < n; ++i) c[i] = a[i] * alpha;
}

template <class Real>
void axpy(int64_t n, Real alpha, const Real* x, Real* y) {
  using W = V<Real>;
  const typename W::reg va = W::bcast(alpha);
  int64_t i = 0;
  for (; i + W::width <= n; i += W::width)
    W::store(y + i, W::add(W::load(y + i), W::mul(va, W::load(x + i))));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <class Real>
void relu_fwd(int64_t n, const Real* x, Real* y) {
  using W = V<Real>;
  int64_t i = 0;
  for (; i + W::width <= n; i += W::width) {
    const typename W::reg v = W::load(x + i);
    W::store(y + i, W::select(W::gt_zero(v), v, W::zero()));
  }
  for (; i < n; ++i) y[i] = x[i] > Real(0) ? x[i] : Real(0);
}

template <class Real>
void relu_bwd(int64_t n, const Real* x, const Real* dy, Real* dx) {
  using W = V<Real>;
  int64_t i = 0;
  for (; i + W::width <= n; i += W::width) {
    const typename W::reg old = W::load(dx + i);
    const typename W::reg updated = W::add(old, W::load(dy + i));
    W::store(dx + i, W::select(W::gt_zero(W::load(x + i)), updated, old));
  }
  for (; i < n; ++i)
    if (x[i] > Real(0)) dx[i] += dy[i];
}

template <class Real>
void bcast_add(int64_t rows, int64_t n, const Real* x, const Real* v, Real* y) {
  for (int64_t r = 0; r < rows; ++r) add<Real>(n, x + r * n, v, y + r * n);
}

template <class Real>
void bcast_mul(int64_t rows, int64_t n, const Real* x, const Real* v, Real* y) {
  for (int64_t r = 0; r < rows; ++r) mul<Real>(n, x + r * n, v, y + r * n);
}

template <class Real>
void colsum_acc(int64_t rows, int64_t n, const Real* x, Real* acc) {
  using W = V<Real>;
  int64_t j = 0;
  for (; j + W::width <= n; j += W::width) {
    typename W::reg a = W::load(acc + j);
    for (int64_t r = 0; r < rows; ++r) a = W::add(a, W::load(x + r * n + j));
    W::store(acc + j, a);
  }
  for (; j < n; ++j) {
    Real a = acc[j];
    for (int64_t r = 0; r < rows; ++r) a += x[r * n + j];
    acc[j] = a;
  }
}

template <class Real>
void fill(KernelTable<Real>& t) {
  t.gemm_nn = &gemm_nn<Real>;
  t.gemm_tn = &gemm_tn<Real>;
  t.add = &add<Real>;
  t.sub = &sub<Real>;
  t.mul = &mul<Real>;
  t.scale = &scale<Real>;
  t.axpy = &axpy<Real>;
  t.relu_fwd = &relu_fwd<Real>;
  t.relu_bwd = &relu_bwd<Real>;
  t.bcast_add = &bcast_add<Real>;
  t.bcast_mul = &bcast_mul<Real>;
  t.colsum_acc = &colsum_acc<Real>;
}

}  // namespace

void fill_neon_table(KernelTable<double>& t) { fill(t); }
void fill_neon_table(KernelTable<float>& t) { fill(t); }

}  // namespace ctae::kernels

#endif  // __aarch64__
