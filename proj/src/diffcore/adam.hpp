#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "common/errors.hpp"
#include "diffcore/param_set.hpp"
#include "kernels/kernels.hpp"

namespace ctae {

// Adam with bias correction. Moment buffers are kept in the parameter's
// insertion order and walked with fixed scalar loops, so a step is a pure
// function of (state, grads) independent of the kernel backend.
template <class Real>
class Adam {
 public:
  struct Config {
    Real lr = Real(1e-3);
    Real beta1 = Real(0.9);
    Real beta2 = Real(0.999);
    Real eps = Real(1e-8);
    // <= 0 disables clipping
    Real clip_norm = Real(5);
  };

  Adam(ParameterSet<Real>& params, Config cfg) : params_(&params), cfg_(cfg) {
    m_.resize(static_cast<size_t>(params.count()));
    v_.resize(static_cast<size_t>(params.count()));
    for (int i = 0; i < params.count(); ++i) {
      m_[static_cast<size_t>(i)].assign(params.at(i).value.size(), Real(0));
      v_[static_cast<size_t>(i)].assign(params.at(i).value.size(), Real(0));
    }
  }

  // Global gradient norm over all parameters, insertion order, strict sums.
  Real grad_norm() const {
    Real sq = 0;
    for (int i = 0; i < params_->count(); ++i)
      for (const Real g : params_->at(i).grad) sq += g * g;
    return std::sqrt(sq);
  }

  // Applies one update; returns the pre-clip gradient norm.
  Real step() {
    ++t_;
    const Real norm = grad_norm();
    Real scale = Real(1);
    if (cfg_.clip_norm > Real(0) && norm > cfg_.clip_norm) scale = cfg_.clip_norm / norm;
    const Real bc1 = Real(1) - std::pow(cfg_.beta1, Real(t_));
    const Real bc2 = Real(1) - std::pow(cfg_.beta2, Real(t_));
    for (int i = 0; i < params_->count(); ++i) {
      auto& p = params_->at(i);
      auto& m = m_[static_cast<size_t>(i)];
      auto& v = v_[static_cast<size_t>(i)];
      for (size_t j = 0; j < p.value.size(); ++j) {
        const Real g = p.grad[j] * scale;
        m[j] = cfg_.beta1 * m[j] + (Real(1) - cfg_.beta1) * g;
        v[j] = cfg_.beta2 * v[j] + (Real(1) - cfg_.beta2) * (g * g);
        const Real mhat = m[j] / bc1;
        const Real vhat = v[j] / bc2;
        p.value[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
    return norm;
  }

  int64_t step_count() const { return t_; }
  const Config& config() const { return cfg_; }
  void set_lr(Real lr) { cfg_.lr = lr; }

  // Optimizer state for checkpointing: step count plus flat m/v in parameter
  // insertion order.
  struct State {
    int64_t t = 0;
    std::vector<Real> m;
    std::vector<Real> v;
  };

  State export_state() const {
    State s;
    s.t = t_;
    for (const auto& m : m_) s.m.insert(s.m.end(), m.begin(), m.end());
    for (const auto& v : v_) s.v.insert(s.v.end(), v.begin(), v.end());
    return s;
  }

  void import_state(const State& s) {
    size_t need = 0;
    for (const auto& m : m_) need += m.size();
    if (s.m.size() != need || s.v.size() != need)
      fail(ErrorKind::io, "optimizer state size mismatch");
    t_ = s.t;
    size_t off = 0;
    for (size_t i = 0; i < m_.size(); ++i) {
      std::copy(s.m.begin() + static_cast<long>(off),
                s.m.begin() + static_cast<long>(off + m_[i].size()), m_[i].begin());
      std::copy(s.v.begin() + static_cast<long>(off),
                s.v.begin() + static_cast<long>(off + v_[i].size()), v_[i].begin());
      off += m_[i].size();
    }
  }

 private:
  ParameterSet<Real>* params_;
  Config cfg_;
  int64_t t_ = 0;
  std::vector<std::vector<Real>> m_;
  std::vector<std::vector<Real>> v_;
};

}  // namespace ctae
