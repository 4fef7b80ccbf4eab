#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "stereo/common.hpp"
#include "stereo/rng.hpp"

namespace stereo {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

template <class T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward;

  T* grad_acc() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    return grad.data();
  }
};

}  // namespace detail

// Graph recording is on by default; inference paths disable it via the guard.
bool grad_enabled();

struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Dense row-major N-d tensor with reverse-mode differentiation. A TensorT is
/// a cheap handle onto a graph node; ops build fresh nodes, backward() walks
/// the recorded graph. Values are immutable after construction by convention;
/// the exceptions are leaf tensors mutated by the optimizer and grad buffers.
template <class T>
class TensorT {
 public:
  using Scalar = T;
  using Node = detail::TensorNode<T>;

  TensorT() = default;

  static TensorT zeros(Shape shape);
  static TensorT full(Shape shape, T v);
  static TensorT from(Shape shape, std::vector<T> data);
  static TensorT scalar(T v) { return full({1}, v); }
  /// 1-d tensor [n] with values 0, 1, ..., n-1.
  static TensorT arange(std::size_t n);
  static TensorT uniform(Shape shape, Rng& rng, T lo, T hi);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t ndim() const { return node_->shape.size(); }
  std::size_t extent(std::size_t axis) const { return node_->shape[axis]; }
  std::size_t numel() const { return node_->value.size(); }

  const T* data() const { return node_->value.data(); }
  T* data() { return node_->value.data(); }
  const std::vector<T>& values() const { return node_->value; }

  /// Value of a single-element tensor.
  T item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  /// Marks a leaf as trainable. Calling this on an op result is a misuse.
  TensorT& set_requires_grad(bool v);

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  const std::vector<T>& grad() const { return node_->grad; }
  std::vector<T>& grad_mutable() {
    node_->grad_acc();
    return node_->grad;
  }
  void zero_grad() {
    if (node_) node_->grad.assign(node_->value.size(), T(0));
  }

  /// Reverse-mode sweep from a scalar. Grad accumulation is additive, so a
  /// second backward over a fresh graph adds into existing grads.
  void backward();

  /// Same values, fresh leaf, no graph history.
  TensorT detach() const;
  TensorT clone() const { return detach(); }

  std::shared_ptr<Node>& node() { return node_; }
  const std::shared_ptr<Node>& node() const { return node_; }

  /// Op-construction hook: fresh node with uninitialised storage.
  static TensorT make_uninit(Shape shape);

 private:
  std::shared_ptr<Node> node_;
};

/// Records graph edges on `out` when grads are enabled and some input needs
/// them. `bw` receives the output node; it must accumulate (+=) into each
/// parent's grad via grad_acc().
template <class T>
void autograd_attach(TensorT<T>& out, std::initializer_list<TensorT<T>> inputs,
                     std::function<void(detail::TensorNode<T>&)> bw);

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

}  // namespace stereo
