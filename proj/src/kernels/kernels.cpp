#include "kernels/kernels.hpp"

#include <cstdlib>

#include "common/errors.hpp"
#include "kernels/scalar_kernels.hpp"

namespace ctae::kernels {

#if defined(__x86_64__)
void fill_avx2_table(KernelTable<double>& t);
void fill_avx2_table(KernelTable<float>& t);
#endif
#if defined(__aarch64__)
void fill_neon_table(KernelTable<double>& t);
void fill_neon_table(KernelTable<float>& t);
#endif

namespace {

template <class Real>
void fill_scalar(KernelTable<Real>& t) {
  t.gemm_nn = &scalar::gemm_nn<Real>;
  t.gemm_tn = &scalar::gemm_tn<Real>;
  t.add = &scalar::add<Real>;
  t.sub = &scalar::sub<Real>;
  t.mul = &scalar::mul<Real>;
  t.scale = &scalar::scale<Real>;
  t.axpy = &scalar::axpy<Real>;
  t.relu_fwd = &scalar::relu_fwd<Real>;
  t.relu_bwd = &scalar::relu_bwd<Real>;
  t.bcast_add = &scalar::bcast_add<Real>;
  t.bcast_mul = &scalar::bcast_mul<Real>;
  t.colsum_acc = &scalar::colsum_acc<Real>;
}

bool backend_available(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(__x86_64__)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Backend::neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

struct Dispatch {
  Backend backend = Backend::scalar;
  KernelTable<double> t64;
  KernelTable<float> t32;

  void select(Backend b) {
    backend = b;
    switch (b) {
      case Backend::scalar:
        fill_scalar(t64);
        fill_scalar(t32);
        break;
      case Backend::avx2:
#if defined(__x86_64__)
        fill_avx2_table(t64);
        fill_avx2_table(t32);
#endif
        break;
      case Backend::neon:
#if defined(__aarch64__)
        fill_neon_table(t64);
        fill_neon_table(t32);
#endif
        break;
    }
  }

  Dispatch() {
    Backend b = Backend::scalar;
    if (backend_available(Backend::avx2)) b = Backend::avx2;
    if (backend_available(Backend::neon)) b = Backend::neon;
    if (const char* env = std::getenv("CTAE_KERNELS")) {
      const std::string want(env);
      if (want == "scalar")
        b = Backend::scalar;
      else if (want == "avx2")
        b = Backend::avx2;
      else if (want == "neon")
        b = Backend::neon;
      else
        fail(ErrorKind::config, "CTAE_KERNELS must be scalar, avx2 or neon, got '" + want + "'");
      if (!backend_available(b))
        fail(ErrorKind::config, "CTAE_KERNELS requests unavailable backend '" + want + "'");
    }
    select(b);
  }
};

Dispatch& dispatch() {
  static Dispatch d;
  return d;
}

}  // namespace

std::string backend_name(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "?";
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon})
    if (backend_available(b)) out.push_back(b);
  return out;
}

Backend active_backend() { return dispatch().backend; }

void set_backend(Backend b) {
  if (!backend_available(b))
    fail(ErrorKind::config, "kernel backend '" + backend_name(b) + "' is not available on this cpu");
  dispatch().select(b);
}

const KernelTable<double>& table64() { return dispatch().t64; }
const KernelTable<float>& table32() { return dispatch().t32; }

}  // namespace ctae::kernels
