#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "depthpose/kernels.hpp"
#include "depthpose/tensor.hpp"

namespace depthpose {

// One vertex of the recorded computation. Gradients accumulate into `grad`
// until explicitly zeroed, so repeated backward() calls add up.
template <typename T>
struct Node {
  TensorT<T> value;
  TensorT<T> grad;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;
  bool needs_grad = true;

  void ensure_grad() {
    if (grad.empty()) grad = TensorT<T>(value.shape, T(0));
  }
};

template <typename T>
using Value = std::shared_ptr<Node<T>>;

template <typename T>
Value<T> make_leaf(TensorT<T> v, bool needs_grad = true) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(v);
  n->needs_grad = needs_grad;
  return n;
}

// Leaf that does not receive gradients (inputs, targets).
template <typename T>
Value<T> constant(TensorT<T> v) {
  return make_leaf(std::move(v), false);
}

template <typename T>
bool any_needs_grad(const std::vector<Value<T>>& xs) {
  for (const auto& x : xs)
    if (x->needs_grad) return true;
  return false;
}

// Named trainable leaf with its SGD momentum buffer.
template <typename T>
struct ParameterT {
  std::string name;
  Value<T> node;
  TensorT<T> momentum;

  ParameterT() = default;
  ParameterT(std::string name_, TensorT<T> v) : name(std::move(name_)) {
    node = make_leaf(std::move(v));
    node->ensure_grad();
    momentum = TensorT<T>(node->value.shape, T(0));
  }

  TensorT<T>& value() { return node->value; }
  const TensorT<T>& value() const { return node->value; }
  TensorT<T>& grad() { return node->grad; }
  const TensorT<T>& grad() const { return node->grad; }
};

using Parameter = ParameterT<float>;

namespace detail {

// Reverse postorder of the DAG rooted at `root`: consumers come before
// producers, so each node's grad is complete when its backward_fn runs.
template <typename T>
std::vector<Node<T>*> topo_order(const Value<T>& root) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  struct Frame {
    Node<T>* node;
    size_t next_input;
  };
  std::vector<Frame> stack;
  if (seen.insert(root.get()).second) stack.push_back({root.get(), 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_input < f.node->inputs.size()) {
      Node<T>* in = f.node->inputs[f.next_input++].get();
      if (seen.insert(in).second) stack.push_back({in, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

}  // namespace detail

// Accumulates d(loss)/d(node) into every node reachable from `loss`.
template <typename T>
void backward(const Value<T>& loss) {
  check(loss && loss->value.numel() == 1,
        "backward: loss must be a scalar (1-element) node");
  std::vector<Node<T>*> order = detail::topo_order(loss);
  for (Node<T>* n : order)
    if (n->needs_grad) n->ensure_grad();
  if (!loss->needs_grad) return;
  loss->grad.data[0] += T(1);
  for (Node<T>* n : order)
    if (n->backward_fn && n->needs_grad) n->backward_fn(*n);
}

template <typename T>
void zero_grad(std::vector<ParameterT<T>>& params) {
  for (auto& p : params) p.grad().fill(T(0));
}

// v <- momentum * v + grad; value <- value - lr * v; grads are then zeroed.
template <typename T>
void sgd_step(std::vector<ParameterT<T>>& params, T lr, T momentum) {
  check(lr > T(0), "sgd_step: lr must be positive");
  check(momentum >= T(0) && momentum < T(1),
        "sgd_step: momentum must be in [0,1)");
  for (auto& p : params) {
    TensorT<T>& v = p.momentum;
    TensorT<T>& g = p.grad();
    TensorT<T>& w = p.value();
    for (size_t i = 0; i < w.data.size(); ++i) {
      v.data[i] = momentum * v.data[i] + g.data[i];
      w.data[i] -= lr * v.data[i];
      g.data[i] = T(0);
    }
  }
}

// ---- Graph-building operations ----

template <typename T>
Value<T> conv2d(const Value<T>& x, const Value<T>& w, const Value<T>& b,
                int padding) {
  auto n = std::make_shared<Node<T>>();
  n->value = conv2d_fwd(x->value, w->value, b->value, padding);
  n->inputs = {x, w, b};
  n->needs_grad = any_needs_grad(n->inputs);
  n->backward_fn = [padding](Node<T>& self) {
    auto& x_ = self.inputs[0];
    auto& w_ = self.inputs[1];
    auto& b_ = self.inputs[2];
    if (x_->needs_grad) x_->ensure_grad();
    if (w_->needs_grad) w_->ensure_grad();
    if (b_->needs_grad) b_->ensure_grad();
    conv2d_bwd(x_->value, w_->value, padding, self.grad,
               x_->needs_grad ? &x_->grad : nullptr,
               w_->needs_grad ? &w_->grad : nullptr,
               b_->needs_grad ? &b_->grad : nullptr);
  };
  return n;
}

template <typename T>
Value<T> relu(const Value<T>& x) {
  auto n = std::make_shared<Node<T>>();
  n->value = relu_fwd(x->value);
  n->inputs = {x};
  n->needs_grad = x->needs_grad;
  n->backward_fn = [](Node<T>& self) {
    auto& x_ = self.inputs[0];
    x_->ensure_grad();
    relu_bwd(x_->value, self.grad, x_->grad);
  };
  return n;
}

template <typename T>
Value<T> maxpool2(const Value<T>& x) {
  auto n = std::make_shared<Node<T>>();
  auto argmax = std::make_shared<std::vector<int64_t>>();
  n->value = maxpool2_fwd(x->value, argmax.get());
  n->inputs = {x};
  n->needs_grad = x->needs_grad;
  n->backward_fn = [argmax](Node<T>& self) {
    auto& x_ = self.inputs[0];
    x_->ensure_grad();
    maxpool2_bwd(*argmax, self.grad, x_->grad);
  };
  return n;
}

template <typename T>
Value<T> avgpool(const Value<T>& x, int r) {
  auto n = std::make_shared<Node<T>>();
  n->value = avgpool_fwd(x->value, r);
  n->inputs = {x};
  n->needs_grad = x->needs_grad;
  n->backward_fn = [r](Node<T>& self) {
    auto& x_ = self.inputs[0];
    x_->ensure_grad();
    avgpool_bwd(self.grad, r, x_->grad);
  };
  return n;
}

template <typename T>
Value<T> pixel_shuffle(const Value<T>& x, int r) {
  auto n = std::make_shared<Node<T>>();
  n->value = pixel_shuffle_fwd(x->value, r);
  n->inputs = {x};
  n->needs_grad = x->needs_grad;
  n->backward_fn = [r](Node<T>& self) {
    auto& x_ = self.inputs[0];
    x_->ensure_grad();
    // Gradient of a permutation is the inverse permutation.
    TensorT<T> g = pixel_unshuffle_fwd(self.grad, r);
    for (size_t i = 0; i < g.data.size(); ++i)
      x_->grad.data[i] += g.data[i];
  };
  return n;
}

template <typename T>
Value<T> concat_channels(const std::vector<Value<T>>& xs) {
  auto n = std::make_shared<Node<T>>();
  std::vector<const TensorT<T>*> views;
  views.reserve(xs.size());
  for (const auto& x : xs) views.push_back(&x->value);
  n->value = concat_channels_fwd(views);
  n->inputs = xs;
  n->needs_grad = any_needs_grad(n->inputs);
  n->backward_fn = [](Node<T>& self) {
    int64_t off = 0;
    for (auto& x_ : self.inputs) {
      const int64_t cnt = x_->value.numel();
      if (x_->needs_grad) {
        x_->ensure_grad();
        for (int64_t i = 0; i < cnt; ++i)
          x_->grad.data[size_t(i)] += self.grad.data[size_t(off + i)];
      }
      off += cnt;
    }
  };
  return n;
}

template <typename T>
Value<T> mse_loss(const Value<T>& pred, const Value<T>& target) {
  auto n = std::make_shared<Node<T>>();
  n->value = TensorT<T>({1});
  n->value.data[0] = mse_fwd(pred->value, target->value);
  n->inputs = {pred, target};
  n->needs_grad = any_needs_grad(n->inputs);
  n->backward_fn = [](Node<T>& self) {
    auto& p = self.inputs[0];
    auto& t = self.inputs[1];
    if (p->needs_grad) p->ensure_grad();
    if (t->needs_grad) t->ensure_grad();
    mse_bwd(p->value, t->value, self.grad.data[0],
            p->needs_grad ? &p->grad : nullptr,
            t->needs_grad ? &t->grad : nullptr);
  };
  return n;
}

template <typename T>
Value<T> add(const Value<T>& a, const Value<T>& b) {
  check(a->value.same_shape(b->value),
        strf("add: shape mismatch %s vs %s", shape_str(a->value).c_str(),
             shape_str(b->value).c_str()));
  auto n = std::make_shared<Node<T>>();
  n->value = a->value;
  for (size_t i = 0; i < n->value.data.size(); ++i)
    n->value.data[i] += b->value.data[i];
  n->inputs = {a, b};
  n->needs_grad = any_needs_grad(n->inputs);
  n->backward_fn = [](Node<T>& self) {
    for (auto& in : self.inputs) {
      if (!in->needs_grad) continue;
      in->ensure_grad();
      for (size_t i = 0; i < self.grad.data.size(); ++i)
        in->grad.data[i] += self.grad.data[i];
    }
  };
  return n;
}

template <typename T>
Value<T> scale(const Value<T>& x, T factor) {
  auto n = std::make_shared<Node<T>>();
  n->value = x->value;
  for (T& v : n->value.data) v *= factor;
  n->inputs = {x};
  n->needs_grad = x->needs_grad;
  n->backward_fn = [factor](Node<T>& self) {
    auto& x_ = self.inputs[0];
    x_->ensure_grad();
    for (size_t i = 0; i < self.grad.data.size(); ++i)
      x_->grad.data[i] += factor * self.grad.data[i];
  };
  return n;
}

}  // namespace depthpose
