#pragma once

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "diffcore/tape.hpp"
#include "kernels/kernels.hpp"

// Tape operations. Forward work runs on the dispatched kernel backend.
// Reductions that cross lanes (softmax, layer_norm, sum_all) are written as
// fixed-order scalar loops here so results do not depend on the backend.
namespace ctae::ops {

namespace detail {

inline int64_t leading(const std::vector<int64_t>& shape, size_t keep_last) {
  int64_t n = 1;
  for (size_t i = 0; i + keep_last < shape.size(); ++i) n *= shape[i];
  return n;
}

template <class Real>
void require_same_shape(Tape<Real>& t, int a, int b, const char* op) {
  if (t.shape(a) != t.shape(b))
    fail(ErrorKind::shape, std::string(op) + ": shape mismatch " + shape_str(t.shape(a)) +
                               " vs " + shape_str(t.shape(b)));
}

}  // namespace detail

template <class Real>
int add(Tape<Real>& t, int a, int b) {
  detail::require_same_shape(t, a, b, "add");
  const auto& K = kernels::table<Real>();
  const int64_t n = numel(t.shape(a));
  const int out = t.new_node(t.shape(a), t.requires_grad(a) || t.requires_grad(b));
  K.add(n, t.data(a), t.data(b), t.data(out));
  if (t.requires_grad(out))
    t.set_backward(out, [tp = &t, a, b, out, n] {
      const auto& Kb = kernels::table<Real>();
      if (tp->requires_grad(a)) Kb.axpy(n, Real(1), tp->grad(out), tp->grad(a));
      if (tp->requires_grad(b)) Kb.axpy(n, Real(1), tp->grad(out), tp->grad(b));
    });
  return out;
}

template <class Real>
int sub(Tape<Real>& t, int a, int b) {
  detail::require_same_shape(t, a, b, "sub");
  const auto& K = kernels::table<Real>();
  const int64_t n = numel(t.shape(a));
  const int out = t.new_node(t.shape(a), t.requires_grad(a) || t.requires_grad(b));
  K.sub(n, t.data(a), t.data(b), t.data(out));
  if (t.requires_grad(out))
    t.set_backward(out, [tp = &t, a, b, out, n] {
      const auto& Kb = kernels::table<Real>();
      if (tp->requires_grad(a)) Kb.axpy(n, Real(1), tp->grad(out), tp->grad(a));
      if (tp->requires_grad(b)) Kb.axpy(n, Real(-1), tp->grad(out), tp->grad(b));
    });
  return out;
}

template <class Real>
int mul(Tape<Real>& t, int a, int b) {
  detail::require_same_shape(t, a, b, "mul");
  const auto& K = kernels::table<Real>();
  const int64_t n = numel(t.shape(a));
  const int out = t.new_node(t.shape(a), t.requires_grad(a) || t.requires_grad(b));
  K.mul(n, t.data(a), t.data(b), t.data(out));
  if (t.requires_grad(out))
    t.set_backward(out, [tp = &t, a, b, out, n] {
      const auto& Kb = kernels::table<Real>();
      std::vector<Real> tmp(static_cast<size_t>(n));
      if (tp->requires_grad(a)) {
        Kb.mul(n, tp->grad(out), tp->data(b), tmp.data());
        Kb.axpy(n, Real(1), tmp.data(), tp->grad(a));
      }
      if (tp->requires_grad(b)) {
        Kb.mul(n, tp->grad(out), tp->data(a), tmp.data());
        Kb.axpy(n, Real(1), tmp.data(), tp->grad(b));
      }
    });
  return out;
}

template <class Real>
int square(Tape<Real>& t, int a) {
  const auto& K = kernels::table<Real>();
  const int64_t n = numel(t.shape(a));
  const int out = t.new_node(t.shape(a), t.requires_grad(a));
  K.mul(n, t.data(a), t.data(a), t.data(out));
  if (t.requires_grad(out))
    t.set_backward(out, [tp = &t, a, out, n] {
      const auto& Kb = kernels::table<Real>();
      std::vector<Real> tmp(static_cast<size_t>(n));
      Kb.mul(n, tp->grad(out), tp->data(a), tmp.data());
      Kb.axpy(n, Real(2), tmp.data(), tp->grad(a));
    });
  return out;
}

template <class Real>
int scale(Tape<Real>& t, int a, Real alpha) {
  const auto& K = kernels::table<Real>();
  const int64_t n = numel(t.shape(a));
  const int out = t.new_node(t.shape(a), t.requires_grad(a));
  K.scale(n, t.data(a), alpha, t.data(out));
  if (t.requires_grad(out))
    t.set_backward(out, [tp = &t, a, out, n, alpha] {
      kernels::table<Real>().axpy(n, alpha, tp->grad(out), tp->grad(a));
    });
  return out;
}

// y[r,:] = a[r,:] + v, where v's shape is a suffix of a's shape.
template <class Real>
int add_bcast(Tape<Real>& t, int a, int v) {
  if (!is_suffix_shape(t.shape(v), t.shape(a)))
    fail(ErrorKind::shape, "add_bcast: " + shape_str(t.shape(v)) + " is not a suffix of " +
                               shape_str(t.shape(a)));
  const auto& K = kernels::table<Real>();
  const int64_t n = numel(t.shape(v));
  const int64_t rows = numel(t.shape(a)) / n;
  const int out = t.new_node(t.shape(a), t.requires_grad(a) || t.requires_grad(v));
  K.bcast_add(rows, n, t.data(a), t.data(v), t.data(out));
  if (t.requires_grad(out))
    t.set_backward(out, [tp = &t, a, v, out, rows, n] {
      const auto& Kb = kernels::table<Real>();
      if (tp->requires_grad(a)) Kb.axpy(rows * n, Real(1), tp->grad(out), tp->grad(a));
      if (tp->requires_grad(v)) Kb.colsum_acc(rows, n, tp->grad(out), tp->grad(v));
    });
  return out;
}

// y[r,:] = a[r,:] * v elementwise, v a suffix of a.
template <class Real>
int mul_bcast(Tape<Real>& t, int a, int v) {
  if (!is_suffix_shape(t.shape(v), t.shape(a)))
    fail(ErrorKind::shape, "mul_bcast: " + shape_str(t.shape(v)) + " is not a suffix of " +
                               shape_str(t.shape(a)));
  const auto& K = kernels::table<Real>();
  const int64_t n = numel(t.shape(v));
  const int64_t rows = numel(t.shape(a)) / n;
  const int out = t.new_node(t.shape(a), t.requires_grad(a) || t.requires_grad(v));
  K.bcast_mul(rows, n, t.data(a), t.data(v), t.data(out));
  if (t.requires_grad(out))
    t.set_backward(out, [tp = &t, a, v, out, rows, n] {
      const auto& Kb = kernels::table<Real>();
      if (tp->requires_grad(a)) {
        std::vector<Real> tmp(static_cast<size_t>(rows * n));
        Kb.bcast_mul(rows, n, tp->grad(out), tp->data(v), tmp.data());
        Kb.axpy(rows * n, Real(1), tmp.data(), tp->grad(a));
      }
      if (tp->requires_grad(v)) {
        std::vector<Real> tmp(static_cast<size_t>(rows * n));
        Kb.mul(rows * n, tp->grad(out), tp->data(a), tmp.data());
        Kb.colsum_acc(rows, n, tmp.data(), tp->grad(v));
      }
    });
  return out;
}

template <class Real>
int relu(Tape<Real>& t, int a) {
  const auto& K = kernels::table<Real>();
  const int64_t n = numel(t.shape(a));
  const int out = t.new_node(t.shape(a), t.requires_grad(a));
  K.relu_fwd(n, t.data(a), t.data(out));
  if (t.requires_grad(out))
    t.set_backward(out, [tp = &t, a, out, n] {
      kernels::table<Real>().relu_bwd(n, tp->data(a), tp->grad(out), tp->grad(a));
    });
  return out;
}

// x[..., k] @ w[k, n] with leading dims of x flattened; w is shared across
// all rows (a dense-layer weight).
template <class Real>
int matmul(Tape<Real>& t, int x, int w) {
  const auto& xs = t.shape(x);
  const auto& ws = t.shape(w);
  if (ws.size() != 2 || xs.empty() || xs.back() != ws[0])
    fail(ErrorKind::shape,
         "matmul: " + shape_str(xs) + " @ " + shape_str(ws) + " is not composable");
  const int64_t k = ws[0], n = ws[1];
  const int64_t m = detail::leading(xs, 1);
  std::vector<int64_t> out_shape(xs);
  out_shape.back() = n;
  const int out = t.new_node(std::move(out_shape), t.requires_grad(x) || t.requires_grad(w));
  kernels::table<Real>().gemm_nn(m, k, n, t.data(x), t.data(w), t.data(out), false);
  if (t.requires_grad(out))
    t.set_backward(out, [tp = &t, x, w, out, m, k, n] {
      const auto& Kb = kernels::table<Real>();
      if (tp->requires_grad(x)) {
        std::vector<Real> wt(static_cast<size_t>(k * n));
        kernels::transpose(k, n, tp->data(w), wt.data());
        Kb.gemm_nn(m, n, k, tp->grad(out), wt.data(), tp->grad(x), true);
      }
      if (tp->requires_grad(w))
        Kb.gemm_tn(k, m, n, tp->data(x), tp->grad(out), tp->grad(w), true);
    });
  return out;
}

namespace detail {

template <class Real>
int64_t check_bmm(Tape<Real>& t, int a, int b, const char* op) {
  const auto& as = t.shape(a);
  const auto& bs = t.shape(b);
  if (as.size() < 2 || as.size() != bs.size())
    fail(ErrorKind::shape, std::string(op) + ": rank mismatch " + shape_str(as) + " vs " +
                               shape_str(bs));
  for (size_t i = 0; i + 2 < as.size(); ++i)
    if (as[i] != bs[i])
      fail(ErrorKind::shape, std::string(op) + ": batch dims differ " + shape_str(as) +
                                 " vs " + shape_str(bs));
  return leading(as, 2);
}

inline std::vector<int64_t> bmm_out_shape(const std::vector<int64_t>& as, int64_t m, int64_t n) {
  std::vector<int64_t> s(as.begin(), as.end() - 2);
  s.push_back(m);
  s.push_back(n);
  return s;
}

}  // namespace detail

// [.., m, k] @ [.., k, n] -> [.., m, n]
template <class Real>
int bmm_nn(Tape<Real>& t, int a, int b) {
  const int64_t batch = detail::check_bmm(t, a, b, "bmm_nn");
  const auto& as = t.shape(a);
  const auto& bs = t.shape(b);
  const int64_t m = as[as.size() - 2], k = as.back(), n = bs.back();
  if (bs[bs.size() - 2] != k)
    fail(ErrorKind::shape, "bmm_nn: inner dims differ " + shape_str(as) + " vs " + shape_str(bs));
  const int out =
      t.new_node(detail::bmm_out_shape(as, m, n), t.requires_grad(a) || t.requires_grad(b));
  const auto& K = kernels::table<Real>();
  for (int64_t i = 0; i < batch; ++i)
    K.gemm_nn(m, k, n, t.data(a) + i * m * k, t.data(b) + i * k * n, t.data(out) + i * m * n,
              false);
  if (t.requires_grad(out))
    t.set_backward(out, [tp = &t, a, b, out, batch, m, k, n] {
      const auto& Kb = kernels::table<Real>();
      std::vector<Real> bt;
      if (tp->requires_grad(a)) bt.resize(static_cast<size_t>(k * n));
      for (int64_t i = 0; i < batch; ++i) {
        const Real* dc = tp->grad(out) + i * m * n;
        if (tp->requires_grad(a)) {
          kernels::transpose(k, n, tp->data(b) + i * k * n, bt.data());
          Kb.gemm_nn(m, n, k, dc, bt.data(), tp->grad(a) + i * m * k, true);
        }
        if (tp->requires_grad(b))
          Kb.gemm_tn(k, m, n, tp->data(a) + i * m * k, dc, tp->grad(b) + i * k * n, true);
      }
    });
  return out;
}

// [.., m, k] @ [.., n, k]^T -> [.., m, n]
template <class Real>
int bmm_nt(Tape<Real>& t, int a, int b) {
  const int64_t batch = detail::check_bmm(t, a, b, "bmm_nt");
  const auto& as = t.shape(a);
  const auto& bs = t.shape(b);
  const int64_t m = as[as.size() - 2], k = as.back(), n = bs[bs.size() - 2];
  if (bs.back() != k)
    fail(ErrorKind::shape, "bmm_nt: inner dims differ " + shape_str(as) + " vs " + shape_str(bs));
  const int out =
      t.new_node(detail::bmm_out_shape(as, m, n), t.requires_grad(a) || t.requires_grad(b));
  const auto& K = kernels::table<Real>();
  {
    std::vector<Real> bt(static_cast<size_t>(k * n));
    for (int64_t i = 0; i < batch; ++i) {
      kernels::transpose(n, k, t.data(b) + i * n * k, bt.data());
      K.gemm_nn(m, k, n, t.data(a) + i * m * k, bt.data(), t.data(out) + i * m * n, false);
    }
  }
  if (t.requires_grad(out))
    t.set_backward(out, [tp = &t, a, b, out, batch, m, k, n] {
      const auto& Kb = kernels::table<Real>();
      for (int64_t i = 0; i < batch; ++i) {
        const Real* dc = tp->grad(out) + i * m * n;
        if (tp->requires_grad(a))
          Kb.gemm_nn(m, n, k, dc, tp->data(b) + i * n * k, tp->grad(a) + i * m * k, true);
        if (tp->requires_grad(b))
          Kb.gemm_tn(n, m, k, dc, tp->data(a) + i * m * k, tp->grad(b) + i * n * k, true);
      }
    });
  return out;
}

// [.., k, m]^T @ [.., k, n] -> [.., m, n]
template <class Real>
int bmm_tn(Tape<Real>& t, int a, int b) {
  const int64_t batch = detail::check_bmm(t, a, b, "bmm_tn");
  const auto& as = t.shape(a);
  const auto& bs = t.shape(b);
  const int64_t k = as[as.size() - 2], m = as.back(), n = bs.back();
  if (bs[bs.size() - 2] != k)
    fail(ErrorKind::shape, "bmm_tn: inner dims differ " + shape_str(as) + " vs " + shape_str(bs));
  const int out =
      t.new_node(detail::bmm_out_shape(as, m, n), t.requires_grad(a) || t.requires_grad(b));
  const auto& K = kernels::table<Real>();
  for (int64_t i = 0; i < batch; ++i)
    K.gemm_tn(m, k, n, t.data(a) + i * k * m, t.data(b) + i * k * n, t.data(out) + i * m * n,
              false);
  if (t.requires_grad(out))
    t.set_backward(out, [tp = &t, a, b, out, batch, m, k, n] {
      const auto& Kb = kernels::table<Real>();
      std::vector<Real> dct;
      if (tp->requires_grad(a)) dct.resize(static_cast<size_t>(m * n));
      for (int64_t i = 0; i < batch; ++i) {
        const Real* dc = tp->grad(out) + i * m * n;
        if (tp->requires_grad(a)) {
          kernels::transpose(m, n, dc, dct.data());
          Kb.gemm_nn(k, n, m, tp->data(b) + i * k * n, dct.data(), tp->grad(a) + i * k * m, true);
        }
        if (tp->requires_grad(b))
          Kb.gemm_nn(k, m, n, tp->data(a) + i * k * m, dc, tp->grad(b) + i * k * n, true);
      }
    });
  return out;
}

// Numerically stable softmax over the last dim. Rows whose max is -inf (fully
// masked) are an error. Fixed scalar evaluation order regardless of backend.
template <class Real>
int softmax_lastdim(Tape<Real>& t, int a) {
  const auto& as = t.shape(a);
  if (as.empty()) fail(ErrorKind::shape, "softmax_lastdim: scalar input");
  const int64_t n = as.back();
  const int64_t rows = detail::leading(as, 1);
  const int out = t.new_node(as, t.requires_grad(a));
  const Real* x = t.data(a);
  Real* y = t.data(out);
  constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();
  for (int64_t r = 0; r < rows; ++r) {
    const Real* xr = x + r * n;
    Real* yr = y + r * n;
    Real mx = xr[0];
    for (int64_t j = 1; j < n; ++j)
      if (xr[j] > mx) mx = xr[j];
    if (mx == kNegInf)
      fail(ErrorKind::numeric, "softmax row is fully masked (all -inf)");
    Real s = 0;
    for (int64_t j = 0; j < n; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      s += yr[j];
    }
    for (int64_t j = 0; j < n; ++j) yr[j] /= s;
  }
  if (t.requires_grad(out))
    t.set_backward(out, [tp = &t, a, out, rows, n] {
      const Real* yv = tp->data(out);
      const Real* dy = tp->grad(out);
      Real* dx = tp->grad(a);
      for (int64_t r = 0; r < rows; ++r) {
        const Real* yr = yv + r * n;
        const Real* dyr = dy + r * n;
        Real* dxr = dx + r * n;
        Real dot = 0;
        for (int64_t j = 0; j < n; ++j) dot += dyr[j] * yr[j];
        for (int64_t j = 0; j < n; ++j) dxr[j] += yr[j] * (dyr[j] - dot);
      }
    });
  return out;
}

// Layer norm over the last dim with population variance and epsilon inside
// the sqrt. gamma/beta are [n] nodes. Backward recomputes the row statistics
// from the still-live input instead of caching them.
template <class Real>
int layer_norm(Tape<Real>& t, int a, int gamma, int beta, Real eps) {
  const auto& as = t.shape(a);
  if (as.empty()) fail(ErrorKind::shape, "layer_norm: scalar input");
  const int64_t n = as.back();
  if (t.shape(gamma) != std::vector<int64_t>{n} || t.shape(beta) != std::vector<int64_t>{n})
    fail(ErrorKind::shape, "layer_norm: gamma/beta must be [" + std::to_string(n) + "]");
  const int64_t rows = detail::leading(as, 1);
  const bool rg = t.requires_grad(a) || t.requires_grad(gamma) || t.requires_grad(beta);
  const int out = t.new_node(as, rg);
  {
    const Real* x = t.data(a);
    const Real* g = t.data(gamma);
    const Real* b = t.data(beta);
    Real* y = t.data(out);
    for (int64_t r = 0; r < rows; ++r) {
      const Real* xr = x + r * n;
      Real* yr = y + r * n;
      Real mu = 0;
      for (int64_t j = 0; j < n; ++j) mu += xr[j];
      mu /= Real(n);
      Real var = 0;
      for (int64_t j = 0; j < n; ++j) {
        const Real d = xr[j] - mu;
        var += d * d;
      }
      var /= Real(n);
      const Real inv = Real(1) / std::sqrt(var + eps);
      for (int64_t j = 0; j < n; ++j) yr[j] = (xr[j] - mu) * inv * g[j] + b[j];
    }
  }
  if (rg)
    t.set_backward(out, [tp = &t, a, gamma, beta, out, rows, n, eps] {
      const Real* x = tp->data(a);
      const Real* g = tp->data(gamma);
      const Real* dy = tp->grad(out);
      Real* dx = tp->requires_grad(a) ? tp->grad(a) : nullptr;
      Real* dg = tp->requires_grad(gamma) ? tp->grad(gamma) : nullptr;
      Real* db = tp->requires_grad(beta) ? tp->grad(beta) : nullptr;
      std::vector<Real> xh(static_cast<size_t>(n)), dxh(static_cast<size_t>(n));
      for (int64_t r = 0; r < rows; ++r) {
        const Real* xr = x + r * n;
        const Real* dyr = dy + r * n;
        Real mu = 0;
        for (int64_t j = 0; j < n; ++j) mu += xr[j];
        mu /= Real(n);
        Real var = 0;
        for (int64_t j = 0; j < n; ++j) {
          const Real d = xr[j] - mu;
          var += d * d;
        }
        var /= Real(n);
        const Real inv = Real(1) / std::sqrt(var + eps);
        for (int64_t j = 0; j < n; ++j) xh[static_cast<size_t>(j)] = (xr[j] - mu) * inv;
        if (dg)
          for (int64_t j = 0; j < n; ++j) dg[j] += dyr[j] * xh[static_cast<size_t>(j)];
        if (db)
          for (int64_t j = 0; j < n; ++j) db[j] += dyr[j];
        if (dx) {
          Real m1 = 0, m2 = 0;
          for (int64_t j = 0; j < n; ++j) {
            dxh[static_cast<size_t>(j)] = dyr[j] * g[j];
            m1 += dxh[static_cast<size_t>(j)];
            m2 += dxh[static_cast<size_t>(j)] * xh[static_cast<size_t>(j)];
          }
          m1 /= Real(n);
          m2 /= Real(n);
          Real* dxr = dx + r * n;
          for (int64_t j = 0; j < n; ++j)
            dxr[j] += inv * (dxh[static_cast<size_t>(j)] - m1 -
                             xh[static_cast<size_t>(j)] * m2);
        }
      }
    });
  return out;
}

// [K, T, H*dh] -> [K*H, T, dh]
template <class Real>
int split_heads(Tape<Real>& t, int a, int64_t heads) {
  const auto& as = t.shape(a);
  if (as.size() != 3 || as[2] % heads != 0)
    fail(ErrorKind::shape, "split_heads: need [K,T,dm] with heads | dm, got " + shape_str(as) +
                               " heads=" + std::to_string(heads));
  const int64_t Kb = as[0], T = as[1], dm = as[2], dh = dm / heads;
  const int out = t.new_node({Kb * heads, T, dh}, t.requires_grad(a));
  const Real* x = t.data(a);
  Real* y = t.data(out);
  for (int64_t b = 0; b < Kb; ++b)
    for (int64_t h = 0; h < heads; ++h)
      for (int64_t s = 0; s < T; ++s)
        std::memcpy(y + (((b * heads + h) * T) + s) * dh, x + (b * T + s) * dm + h * dh,
                    sizeof(Real) * static_cast<size_t>(dh));
  if (t.requires_grad(out))
    t.set_backward(out, [tp = &t, a, out, Kb, T, dh, heads] {
      const auto& Kt = kernels::table<Real>();
      const Real* dy = tp->grad(out);
      Real* dx = tp->grad(a);
      const int64_t dm = heads * dh;
      for (int64_t b = 0; b < Kb; ++b)
        for (int64_t h = 0; h < heads; ++h)
          for (int64_t s = 0; s < T; ++s)
            Kt.axpy(dh, Real(1), dy + (((b * heads + h) * T) + s) * dh,
                    dx + (b * T + s) * dm + h * dh);
    });
  return out;
}

// [K*H, T, dh] -> [K, T, H*dh]
template <class Real>
int merge_heads(Tape<Real>& t, int a, int64_t heads) {
  const auto& as = t.shape(a);
  if (as.size() != 3 || as[0] % heads != 0)
    fail(ErrorKind::shape, "merge_heads: need [K*H,T,dh], got " + shape_str(as) +
                               " heads=" + std::to_string(heads));
  const int64_t Kb = as[0] / heads, T = as[1], dh = as[2], dm = heads * dh;
  const int out = t.new_node({Kb, T, dm}, t.requires_grad(a));
  const Real* x = t.data(a);
  Real* y = t.data(out);
  for (int64_t b = 0; b < Kb; ++b)
    for (int64_t h = 0; h < heads; ++h)
      for (int64_t s = 0; s < T; ++s)
        std::memcpy(y + (b * T + s) * dm + h * dh, x + (((b * heads + h) * T) + s) * dh,
                    sizeof(Real) * static_cast<size_t>(dh));
  if (t.requires_grad(out))
    t.set_backward(out, [tp = &t, a, out, Kb, T, dh, heads, dm] {
      const auto& Kt = kernels::table<Real>();
      const Real* dy = tp->grad(out);
      Real* dx = tp->grad(a);
      for (int64_t b = 0; b < Kb; ++b)
        for (int64_t h = 0; h < heads; ++h)
          for (int64_t s = 0; s < T; ++s)
            Kt.axpy(dh, Real(1), dy + (b * T + s) * dm + h * dh,
                    dx + (((b * heads + h) * T) + s) * dh);
    });
  return out;
}

// a[shape] -> [K, shape]; backward sums over the new leading dim.
template <class Real>
int expand_batch(Tape<Real>& t, int a, int64_t batch) {
  const int64_t n = numel(t.shape(a));
  std::vector<int64_t> out_shape;
  out_shape.push_back(batch);
  for (int64_t d : t.shape(a)) out_shape.push_back(d);
  const int out = t.new_node(std::move(out_shape), t.requires_grad(a));
  const Real* x = t.data(a);
  Real* y = t.data(out);
  for (int64_t b = 0; b < batch; ++b)
    std::memcpy(y + b * n, x, sizeof(Real) * static_cast<size_t>(n));
  if (t.requires_grad(out))
    t.set_backward(out, [tp = &t, a, out, batch, n] {
      kernels::table<Real>().colsum_acc(batch, n, tp->grad(out), tp->grad(a));
    });
  return out;
}

// Full reduction to a scalar with pinned left-to-right order.
template <class Real>
int sum_all(Tape<Real>& t, int a) {
  const int64_t n = numel(t.shape(a));
  const int out = t.new_node({1}, t.requires_grad(a));
  t.data(out)[0] = kernels::sum_strict(n, t.data(a));
  if (t.requires_grad(out))
    t.set_backward(out, [tp = &t, a, out, n] {
      const Real g = tp->grad(out)[0];
      Real* dx = tp->grad(a);
      for (int64_t i = 0; i < n; ++i) dx[i] += g;
    });
  return out;
}

template <class Real>
int reshape(Tape<Real>& t, int a, std::vector<int64_t> shape) {
  if (numel(shape) != numel(t.shape(a)))
    fail(ErrorKind::shape,
         "reshape: " + shape_str(t.shape(a)) + " -> " + shape_str(shape) + " changes size");
  const int64_t n = numel(shape);
  const int out = t.new_node(std::move(shape), t.requires_grad(a));
  std::memcpy(t.data(out), t.data(a), sizeof(Real) * static_cast<size_t>(n));
  if (t.requires_grad(out))
    t.set_backward(out, [tp = &t, a, out, n] {
      kernels::table<Real>().axpy(n, Real(1), tp->grad(out), tp->grad(a));
    });
  return out;
}

}  // namespace ctae::ops
