#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "diffcore/rng.hpp"
#include "diffcore/tape.hpp"

namespace ctae {

// Central-difference verification of reverse-mode gradients. The builder must
// construct the full graph on the given tape (reading parameter values via
// Tape::leaf) and return a scalar root node. Double precision only: the
// f32 build is validated against the f64 path separately, not against finite
// differences.
struct GradCheckReport {
  double max_rel_err = 0;
  double max_abs_err = 0;
  std::string worst_param;
  int64_t worst_index = -1;
  int64_t checked = 0;
};

// checks_per_param <= 0 means every coordinate. With a positive budget, the
// coordinates are a deterministic seeded sample. Coordinates where both the
// analytic and the numeric value sit below abs_floor are treated as agreeing:
// for a near-dead direction the central difference is pure rounding noise
// (~eps * |loss| / delta), so a relative comparison there measures nothing.
inline GradCheckReport grad_check(ParameterSet<double>& params,
                                  const std::function<int(Tape<double>&)>& build,
                                  double delta = 1e-4, int64_t checks_per_param = -1,
                                  uint64_t sample_seed = 0, double abs_floor = 1e-8) {
  params.zero_grad();
  {
    Tape<double> t(&params);
    const int root = build(t);
    t.backward(root);
  }
  GradCheckReport rep;
  Rng pick(sample_seed);
  for (int pi = 0; pi < params.count(); ++pi) {
    auto& p = params.at(pi);
    const int64_t n = static_cast<int64_t>(p.value.size());
    std::vector<int64_t> idx;
    if (checks_per_param <= 0 || checks_per_param >= n) {
      idx.resize(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    } else {
      for (int64_t c = 0; c < checks_per_param; ++c)
        idx.push_back(static_cast<int64_t>(pick.uniform_int(static_cast<uint64_t>(n))));
    }
    for (const int64_t i : idx) {
      const double saved = p.value[static_cast<size_t>(i)];
      p.value[static_cast<size_t>(i)] = saved + delta;
      double up;
      {
        Tape<double> t(&params);
        up = t.data(build(t))[0];
      }
      p.value[static_cast<size_t>(i)] = saved - delta;
      double dn;
      {
        Tape<double> t(&params);
        dn = t.data(build(t))[0];
      }
      p.value[static_cast<size_t>(i)] = saved;
      const double fd = (up - dn) / (2.0 * delta);
      const double an = p.grad[static_cast<size_t>(i)];
      ++rep.checked;
      if (std::abs(an) < abs_floor && std::abs(fd) < abs_floor) continue;
      const double abs_err = std::abs(an - fd);
      const double rel = abs_err / (std::abs(an) + std::abs(fd) + 1e-12);
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.max_abs_err = abs_err;
        rep.worst_param = p.name;
        rep.worst_index = i;
      }
    }
  }
  return rep;
}

}  // namespace ctae
