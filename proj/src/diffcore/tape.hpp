#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "common/errors.hpp"
#include "diffcore/array.hpp"
#include "diffcore/param_set.hpp"
#include "kernels/kernels.hpp"

namespace ctae {

// Reverse-mode tape. Node ids are indices into the creation-ordered node
// vector; operations append nodes and register backward closures. backward()
// runs the closures in reverse creation order and releases each node's value
// and gradient buffers as soon as its closure has run, so peak memory stays
// near the forward-pass footprint. A tape supports exactly one backward pass;
// read any values you need (losses, latents) before calling it.
template <class Real>
class Tape {
 public:
  explicit Tape(ParameterSet<Real>* params = nullptr) : params_(params) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  int constant(DenseArray<Real> v) {
    const int id = new_node(std::move(v.shape), false);
    nodes_[static_cast<size_t>(id)].value = std::move(v.data);
    return id;
  }

  // Leaf holding a copy of the parameter's current value; gradients flow back
  // into ParameterSet::grad during backward().
  int leaf(int param_id) {
    if (!params_) fail(ErrorKind::internal, "tape has no parameter set");
    auto& p = params_->at(param_id);
    const int id = new_node(p.shape, true);
    nodes_[static_cast<size_t>(id)].value = p.value;
    nodes_[static_cast<size_t>(id)].param_id = param_id;
    return id;
  }

  // Raw node for ops: value buffer sized to shape, zero-filled.
  int new_node(std::vector<int64_t> shape, bool requires_grad) {
    Node n;
    n.value.assign(static_cast<size_t>(numel(shape)), Real(0));
    n.shape = std::move(shape);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  void set_backward(int id, std::function<void()> fn) {
    nodes_[static_cast<size_t>(id)].bwd = std::move(fn);
  }

  const std::vector<int64_t>& shape(int id) const {
    return nodes_[static_cast<size_t>(id)].shape;
  }

  bool requires_grad(int id) const {
    return nodes_[static_cast<size_t>(id)].requires_grad;
  }

  Real* data(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.freed) fail(ErrorKind::internal, "node value used after backward released it");
    return n.value.data();
  }

  const Real* cdata(int id) { return data(id); }

  // Gradient buffer, allocated (zeroed) on first touch.
  Real* grad(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.freed) fail(ErrorKind::internal, "node grad used after backward released it");
    if (n.grad.empty()) n.grad.assign(n.value.size(), Real(0));
    return n.grad.data();
  }

  bool grad_allocated(int id) const {
    return !nodes_[static_cast<size_t>(id)].grad.empty();
  }

  Real scalar(int id) {
    if (numel(shape(id)) != 1)
      fail(ErrorKind::internal, "scalar() on non-scalar node " + shape_str(shape(id)));
    return data(id)[0];
  }

  DenseArray<Real> value_copy(int id) {
    return DenseArray<Real>(shape(id), {data(id), data(id) + numel(shape(id))});
  }

  int node_count() const { return static_cast<int>(nodes_.size()); }

  // Seeds d(root)/d(root) = 1 and sweeps the tape in reverse creation order.
  // Parameter-leaf gradients are accumulated into the ParameterSet. All node
  // buffers are released during the sweep.
  void backward(int root) {
    if (backward_done_)
      fail(ErrorKind::internal, "backward called twice on one tape");
    if (numel(shape(root)) != 1)
      fail(ErrorKind::internal, "backward root must be scalar, got " + shape_str(shape(root)));
    if (!nodes_[static_cast<size_t>(root)].requires_grad)
      fail(ErrorKind::internal, "backward root does not depend on any parameter");
    backward_done_ = true;
    grad(root)[0] = Real(1);

    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (i <= root && n.requires_grad && !n.grad.empty()) {
        if (n.bwd) n.bwd();
        if (n.param_id >= 0) {
          auto& p = params_->at(n.param_id);
          kernels::table<Real>().axpy(static_cast<int64_t>(p.grad.size()), Real(1),
                                      n.grad.data(), p.grad.data());
        }
      }
      n.free_buffers();
    }
  }

 private:
  struct Node {
    std::vector<int64_t> shape;
    std::vector<Real> value;
    std::vector<Real> grad;
    std::function<void()> bwd;
    bool requires_grad = false;
    bool freed = false;
    int param_id = -1;

    void free_buffers() {
      std::vector<Real>().swap(value);
      std::vector<Real>().swap(grad);
      bwd = nullptr;
      freed = true;
    }
  };

  std::vector<Node> nodes_;
  ParameterSet<Real>* params_;
  bool backward_done_ = false;
};

}  // namespace ctae
