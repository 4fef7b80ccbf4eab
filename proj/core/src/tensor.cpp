#include "stereo/tensor.hpp"

#include <unordered_set>

namespace stereo {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

template <class T>
TensorT<T> TensorT<T>::make_uninit(Shape shape) {
  for (std::size_t e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
  TensorT<T> t;
  t.node_ = std::make_shared<Node>();
  t.node_->shape = std::move(shape);
  t.node_->value.resize(shape_numel(t.node_->shape));
  return t;
}

template <class T>
TensorT<T> TensorT<T>::zeros(Shape shape) {
  return full(std::move(shape), T(0));
}

template <class T>
TensorT<T> TensorT<T>::full(Shape shape, T v) {
  TensorT t = make_uninit(std::move(shape));
  std::fill(t.node_->value.begin(), t.node_->value.end(), v);
  return t;
}

template <class T>
TensorT<T> TensorT<T>::from(Shape shape, std::vector<T> data) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                     shape_str(shape));
  }
  TensorT t;
  t.node_ = std::make_shared<Node>();
  t.node_->shape = std::move(shape);
  t.node_->value = std::move(data);
  return t;
}

template <class T>
TensorT<T> TensorT<T>::arange(std::size_t n) {
  TensorT t = make_uninit({n});
  for (std::size_t i = 0; i < n; ++i) t.node_->value[i] = static_cast<T>(i);
  return t;
}

template <class T>
TensorT<T> TensorT<T>::uniform(Shape shape, Rng& rng, T lo, T hi) {
  TensorT t = make_uninit(std::move(shape));
  for (auto& v : t.node_->value) v = static_cast<T>(rng.uniform(double(lo), double(hi)));
  return t;
}

template <class T>
T TensorT<T>::item() const {
  if (!node_ || node_->value.size() != 1) {
    throw ContractError("item(): tensor is not a single element, shape " +
                        (node_ ? shape_str(node_->shape) : std::string("<undefined>")));
  }
  return node_->value[0];
}

template <class T>
TensorT<T>& TensorT<T>::set_requires_grad(bool v) {
  if (v && node_->backward) {
    throw ContractError("set_requires_grad: only leaf tensors can be marked trainable");
  }
  node_->requires_grad = v;
  return *this;
}

template <class T>
TensorT<T> TensorT<T>::detach() const {
  TensorT t;
  t.node_ = std::make_shared<Node>();
  t.node_->shape = node_->shape;
  t.node_->value = node_->value;
  return t;
}

template <class T>
void TensorT<T>::backward() {
  if (numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " + shape_str(shape()));
  }
  Node* root = node_.get();
  if (!root->requires_grad) return;

  // Iterative post-order DFS over grad-requiring ancestors.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* n;
    std::size_t next;
  };
  std::vector<Frame> stack;
  stack.push_back({root, 0});
  visited.insert(root);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      Node* p = f.n->parents[f.next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }

  root->grad_acc()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) {
      n->grad_acc();
      n->backward(*n);
    }
  }
}

template <class T>
void autograd_attach(TensorT<T>& out, std::initializer_list<TensorT<T>> inputs,
                     std::function<void(detail::TensorNode<T>&)> bw) {
  if (!grad_enabled()) return;
  bool need = false;
  for (const auto& in : inputs) need = need || in.requires_grad();
  if (!need) return;
  auto& n = *out.node();
  n.requires_grad = true;
  n.parents.reserve(inputs.size());
  for (const auto& in : inputs) n.parents.push_back(in.node());
  n.backward = std::move(bw);
}

template class TensorT<float>;
template class TensorT<double>;
template void autograd_attach<float>(TensorT<float>&, std::initializer_list<TensorT<float>>,
                                     std::function<void(detail::TensorNode<float>&)>);
template void autograd_attach<double>(TensorT<double>&, std::initializer_list<TensorT<double>>,
                                      std::function<void(detail::TensorNode<double>&)>);

}  // namespace stereo
