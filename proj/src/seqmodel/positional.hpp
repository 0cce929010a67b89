#pragma once

#include <cmath>
#include <cstdint>

#include "common/errors.hpp"
#include "diffcore/array.hpp"

namespace ctae {

// Sinusoidal table, [T, d_model]:
//   PE(t, 2i)   = sin(t / 10000^{2i/d_model})
//   PE(t, 2i+1) = cos(t / 10000^{2i/d_model})
template <class Real>
DenseArray<Real> positional_encoding(int64_t t_len, int64_t d_model) {
  if (t_len <= 0) fail(ErrorKind::config, "positional encoding needs T >= 1");
  if (d_model <= 0 || d_model % 2 != 0)
    fail(ErrorKind::config, "positional encoding needs even d_model, got " +
                                std::to_string(d_model));
  DenseArray<Real> pe = DenseArray<Real>::zeros({t_len, d_model});
  for (int64_t t = 0; t < t_len; ++t)
    for (int64_t i = 0; i < d_model / 2; ++i) {
      const double rate =
          std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
      const double arg = static_cast<double>(t) / rate;
      pe.data[static_cast<size_t>(t * d_model + 2 * i)] = static_cast<Real>(std::sin(arg));
      pe.data[static_cast<size_t>(t * d_model + 2 * i + 1)] = static_cast<Real>(std::cos(arg));
    }
  return pe;
}

// Additive causal attention mask, [T, T]: 0 where key <= query, -inf above
// the diagonal.
template <class Real>
DenseArray<Real> causal_mask(int64_t t_len) {
  DenseArray<Real> m = DenseArray<Real>::zeros({t_len, t_len});
  const Real ninf = -std::numeric_limits<Real>::infinity();
  for (int64_t q = 0; q < t_len; ++q)
    for (int64_t k = q + 1; k < t_len; ++k)
      m.data[static_cast<size_t>(q * t_len + k)] = ninf;
  return m;
}

}  // namespace ctae
