#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "stereonet/tensor.hpp"

namespace stereonet {

/// Learnable weight with a gradient slot of identical shape.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  Param(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(T{0}); }

  template <typename U>
  Param<U> cast() const {
    Param<U> p(name, value.template cast<U>());
    p.grad = grad.template cast<U>();
    return p;
  }
};

namespace detail {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::function<void(const Tensor<T>&)> backward;

  Tensor<T>& grad_slot() {
    if (grad.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

}  // namespace detail

/// Handle to a value produced inside (or fed into) a Tape.
template <typename T>
class Var {
 public:
  Var() = default;

  const Tensor<T>& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool valid() const { return static_cast<bool>(node_); }

  /// Gradient accumulated by the last backward pass (zeros if none flowed).
  Tensor<T> grad() const {
    return node_->grad.empty() ? Tensor<T>(node_->value.shape())
                               : node_->grad;
  }

  /// Adds `g` into this variable's gradient; used by backward closures.
  void accumulate(const Tensor<T>& g) const {
    if (!node_->requires_grad) return;
    auto& slot = node_->grad_slot();
    auto dst = slot.data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }

  /// Direct access for kernels that scatter into the gradient in place.
  Tensor<T>* grad_buffer() const {
    return node_->requires_grad ? &node_->grad_slot() : nullptr;
  }

 private:
  template <typename>
  friend class Tape;
  explicit Var(std::shared_ptr<detail::Node<T>> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node<T>> node_;
};

/// Ordered record of operations. backward() replays the record in exact
/// reverse order; parameter gradients accumulate across calls.
template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// A value that never receives a gradient.
  Var<T> constant(Tensor<T> value) {
    auto n = std::make_shared<detail::Node<T>>();
    n->value = std::move(value);
    return Var<T>(std::move(n));
  }

  /// A leaf that collects a gradient but is not tied to a Param.
  Var<T> input(Tensor<T> value) {
    auto n = std::make_shared<detail::Node<T>>();
    n->value = std::move(value);
    n->requires_grad = recording_;
    if (recording_) nodes_.push_back(n);
    return Var<T>(std::move(n));
  }

  /// A leaf bound to a Param; its gradient is added into `p.grad`.
  Var<T> param(Param<T>& p) {
    auto n = std::make_shared<detail::Node<T>>();
    n->value = p.value;
    if (recording_) {
      n->requires_grad = true;
      Param<T>* target = &p;
      n->backward = [target](const Tensor<T>& g) {
        auto dst = target->grad.data();
        auto src = g.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      };
      nodes_.push_back(n);
    }
    return Var<T>(std::move(n));
  }

  /// Records an op output. `make_backward` is only invoked when some input
  /// needs a gradient; it receives the output node's Var and returns the
  /// closure mapping the output gradient onto the inputs.
  template <typename MakeBackward>
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs,
                MakeBackward&& make_backward) {
    auto n = std::make_shared<detail::Node<T>>();
    n->value = std::move(value);
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (recording_ && any) {
      n->requires_grad = true;
      n->backward = make_backward();
      nodes_.push_back(n);
    }
    return Var<T>(std::move(n));
  }

  void backward(const Var<T>& loss) {
    if (loss.value().size() != 1) {
      throw ShapeError("backward: loss must be a scalar, got shape " +
                       to_string(loss.shape()));
    }
    if (nodes_.empty()) throw Error("backward: tape is empty");
    if (!loss.requires_grad()) {
      throw Error("backward: loss does not depend on any recorded value");
    }
    for (auto& n : nodes_) {
      if (!n->grad.empty()) n->grad.fill(T{0});
    }
    loss.node_->grad_slot()[0] = T{1};
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      auto& n = **it;
      if (n.backward && !n.grad.empty()) n.backward(n.grad);
    }
  }

  void clear() { nodes_.clear(); }

 private:
  bool recording_;
  std::vector<std::shared_ptr<detail::Node<T>>> nodes_;
};

}  // namespace stereonet
