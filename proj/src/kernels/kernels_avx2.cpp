// AVX2 variants. Compiled with -mavx2 (no FMA: a fused multiply-add rounds
// once, the scalar reference rounds twice, and the two paths must round
// identically). Vector lanes always span independent output columns; the
// k-reduction for any single element stays serial and ascending, so results
// are bit-exact matches of the scalar kernels.
#if defined(__x86_64__)

#include <immintrin.h>

#include <cstring>

#include "kernels/kernels.hpp"
#include "kernels/scalar_kernels.hpp"

namespace ctae::kernels {
namespace {

template <class Real>
struct V;

template <>
struct V<double> {
  using reg = __m256d;
  static constexpr int64_t width = 4;
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg bcast(double x) { return _mm256_set1_pd(x); }
  static reg zero() { return _mm256_setzero_pd(); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static reg gt_zero(reg a) { return _mm256_cmp_pd(a, zero(), _CMP_GT_OQ); }
  static reg and_(reg a, reg b) { return _mm256_and_pd(a, b); }
  static reg blendv(reg a, reg b, reg mask) { return _mm256_blendv_pd(a, b, mask); }
};

template <>
struct V<float> {
  using reg = __m256;
  static constexpr int64_t width = 8;
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg bcast(float x) { return _mm256_set1_ps(x); }
  static reg zero() { return _mm256_setzero_ps(); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_ps(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static reg gt_zero(reg a) { return _mm256_cmp_ps(a, zero(), _CMP_GT_OQ); }
  static reg and_(reg a, reg b) { return _mm256_and_ps(a, b); }
  static reg blendv(reg a, reg b, reg mask) { return _mm256_blendv_ps(a, b, mask); }
};

// Accumulator register block: 4 vectors = 16 doubles / 32 floats of C per tile.
template <class Real>
constexpr int64_t kTile = 4 * V<Real>::width;

// Shared inner body for both gemm variants: C[i, j0:j0+w) over all k, where
// a_at(p) yields A's (i, p) element for the given output row i.
template <class Real, class AAt>
void gemm_row_tile(int64_t k, int64_t n, AAt a_at, const Real* B, Real* c,
                   int64_t j0, bool accumulate) {
  using W = V<Real>;
  const int64_t w = W::width;
  typename W::reg acc0, acc1, acc2, acc3;
  if (accumulate) {
    acc0 = W::load(c + j0);
    acc1 = W::load(c + j0 + w);
    acc2 = W::load(c + j0 + 2 * w);
    acc3 = W::load(c + j0 + 3 * w);
  } else {
    acc0 = acc1 = acc2 = acc3 = W::zero();
  }
  for (int64_t p = 0; p < k; ++p) {
    const typename W::reg ap = W::bcast(a_at(p));
    const Real* b = B + p * n + j0;
    acc0 = W::add(acc0, W::mul(ap, W::load(b)));
    acc1 = W::add(acc1, W::mul(ap, W::load(b + w)));
    acc2 = W::add(acc2, W::mul(ap, W::load(b + 2 * w)));
    acc3 = W::add(acc3, W::mul(ap, W::load(b + 3 * w)));
  }
  W::store(c + j0, acc0);
  W::store(c + j0 + w, acc1);
  W::store(c + j0 + 2 * w, acc2);
  W::store(c + j0 + 3 * w, acc3);
}

template <class Real, class AAt>
void gemm_row_vec(int64_t k, int64_t n, AAt a_at, const Real* B, Real* c,
                  int64_t j0, bool accumulate) {
  using W = V<Real>;
  typename W::reg acc = accumulate ? W::load(c + j0) : W::zero();
  for (int64_t p = 0; p < k; ++p)
    acc = W::add(acc, W::mul(W::bcast(a_at(p)), W::load(B + p * n + j0)));
  W::store(c + j0, acc);
}

template <class Real, class AAt>
void gemm_row_tail(int64_t k, int64_t n, AAt a_at, const Real* B, Real* c,
                   int64_t j, bool accumulate) {
  Real acc = accumulate ? c[j] : Real(0);
  for (int64_t p = 0; p < k; ++p) acc += a_at(p) * B[p * n + j];
  c[j] = acc;
}

template <class Real, class AAt>
void gemm_row(int64_t k, int64_t n, AAt a_at, const Real* B, Real* c,
              bool accumulate) {
  int64_t j = 0;
  for (; j + kTile<Real> <= n; j += kTile<Real>)
    gemm_row_tile<Real>(k, n, a_at, B, c, j, accumulate);
  for (; j + V<Real>::width <= n; j += V<Real>::width)
    gemm_row_vec<Real>(k, n, a_at, B, c, j, accumulate);
  for (; j < n; ++j) gemm_row_tail<Real>(k, n, a_at, B, c, j, accumulate);
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

template <class Real, class Op>
void ew_loop(int64_t n, Op op, Real* out, const Real* a, const Real* b) {
  using W = V<Real>;
  int64_t i = 0;
  for (; i + W::width <= n; i += W::width)
    W::store(out + i, op.vec(W::load(a + i), W::load(b + i)));
  for (; i < n; ++i) out[i] = op.one(a[i], b[i]);
}

template <class Real>
void add(int64_t n, const Real* a, const Real* b, Real* c) {
  using W = V<Real>;
  struct {
    typename W::reg vec(typename W::reg x, typename W::reg y) const { return W::add(x, y); }
    Real one(Real x, Real y) const { return x + y; }
  } op;
  ew_loop<Real>(n, op, c, a, b);
}

template <class Real>
void sub(int64_t n, const Real* a, const Real* b, Real* c) {
  using W = V<Real>;
  struct {
    typename W::reg vec(typename W::reg x, typename W::reg y) const { return W::sub(x, y); }
    Real one(Real x, Real y) const { return x - y; }
  } op;
  ew_loop<Real>(n, op, c, a, b);
}

template <class Real>
void mul(int64_t n, const Real* a, const Real* b, Real* c) {
  using W = V<Real>;
  struct {
    typename W::reg vec(typename W::reg x, typename W::reg y) const { return W::mul(x, y); }
    Real one(Real x, Real y) const { return x * y; }
  } op;
  ew_loop<Real>(n, op, c, a, b);
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
    W::store(y + i, W::and_(W::gt_zero(v), v));
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
    // blendv keeps the old bits (not old + 0) where x <= 0, matching the
    // scalar branch that skips the store entirely.
    W::store(dx + i, W::blendv(old, updated, W::gt_zero(W::load(x + i))));
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

void fill_avx2_table(KernelTable<double>& t) { fill(t); }
void fill_avx2_table(KernelTable<float>& t) { fill(t); }

}  // namespace ctae::kernels

#endif  // __x86_64__
