#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "common/errors.hpp"
#include "diffcore/array.hpp"

namespace ctae {

template <class Real>
struct Parameter {
  std::string name;
  std::vector<int64_t> shape;
  std::vector<Real> value;
  std::vector<Real> grad;
};

// Registry of trainable tensors. Insertion order is part of the contract: the
// optimizer walks parameters in this order (grad-norm reduction order), and
// checkpoints store them in this order.
template <class Real>
class ParameterSet {
 public:
  int add(const std::string& name, std::vector<int64_t> shape) {
    if (index_.count(name))
      fail(ErrorKind::internal, "duplicate parameter name '" + name + "'");
    Parameter<Real> p;
    p.name = name;
    const auto n = static_cast<size_t>(numel(shape));
    p.shape = std::move(shape);
    p.value.assign(n, Real(0));
    p.grad.assign(n, Real(0));
    params_.push_back(std::move(p));
    const int id = static_cast<int>(params_.size()) - 1;
    index_[name] = id;
    return id;
  }

  int count() const { return static_cast<int>(params_.size()); }

  Parameter<Real>& at(int id) { return params_.at(static_cast<size_t>(id)); }
  const Parameter<Real>& at(int id) const { return params_.at(static_cast<size_t>(id)); }

  int id_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
      fail(ErrorKind::internal, "unknown parameter '" + name + "'");
    return it->second;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  void zero_grad() {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), Real(0));
  }

  int64_t total_size() const {
    int64_t n = 0;
    for (const auto& p : params_) n += static_cast<int64_t>(p.value.size());
    return n;
  }

 private:
  std::vector<Parameter<Real>> params_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace ctae
