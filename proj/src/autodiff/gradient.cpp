#include "metava/autodiff/gradient.hpp"

#include <unordered_map>
#include <unordered_set>

#include "metava/autodiff/ops.hpp"

namespace metava::ad {

namespace {

// Post-order over everything `root` depends on through recorded nodes.
std::vector<Tensor> topological_order(const Tensor& root) {
  std::vector<Tensor> order;
  std::unordered_set<const TensorImpl*> visited;
  struct Frame {
    Tensor tensor;
    std::size_t next_input;
  };
  std::vector<Frame> stack;
  stack.push_back({root, 0});
  visited.insert(root.id());
  while (!stack.empty()) {
    Frame& top = stack.back();
    const auto& node = top.tensor.grad_fn();
    if (node && top.next_input < node->inputs.size()) {
      const Tensor& input = node->inputs[top.next_input++];
      if (input.requires_grad() && visited.insert(input.id()).second) stack.push_back({input, 0});
      continue;
    }
    order.push_back(top.tensor);
    stack.pop_back();
  }
  return order;
}

}  // namespace

std::vector<Tensor> gradient(const Tensor& loss, std::span<const Tensor> wrt, bool create_graph) {
  if (loss.numel() != 1) throw ShapeError("gradient", {loss.shape()}, "loss must be scalar");

  std::vector<Tensor> result;
  result.reserve(wrt.size());
  if (!loss.requires_grad()) {
    for (const auto& t : wrt) result.push_back(Tensor::zeros(t.shape(), t.precision()));
    return result;
  }

  std::unordered_set<const TensorImpl*> targets;
  for (const auto& t : wrt) targets.insert(t.id());

  const auto order = topological_order(loss);
  // A tensor is worth visiting only if some target lies at or below it.
  std::unordered_set<const TensorImpl*> needed;
  for (const auto& t : order) {
    bool need = targets.count(t.id()) > 0;
    if (!need && t.grad_fn())
      for (const auto& input : t.grad_fn()->inputs)
        if (needed.count(input.id())) {
          need = true;
          break;
        }
    if (need) needed.insert(t.id());
  }

  GradModeGuard mode(create_graph);
  std::unordered_map<const TensorImpl*, Tensor> grads;
  grads.emplace(loss.id(), Tensor::ones(loss.shape(), loss.precision()));
  std::unordered_map<const TensorImpl*, Tensor> captured;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Tensor& t = *it;
    if (!needed.count(t.id())) continue;
    auto found = grads.find(t.id());
    if (found == grads.end()) continue;
    Tensor g = std::move(found->second);
    grads.erase(found);
    if (targets.count(t.id())) captured.emplace(t.id(), g);
    const auto& node = t.grad_fn();
    if (!node) continue;
    auto input_grads = node->backward(g);
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      const Tensor& input = node->inputs[i];
      if (i >= input_grads.size() || !input_grads[i].defined()) continue;
      if (!input.requires_grad() || !needed.count(input.id())) continue;
      auto slot = grads.find(input.id());
      if (slot == grads.end())
        grads.emplace(input.id(), std::move(input_grads[i]));
      else
        slot->second = add(slot->second, input_grads[i]);
    }
  }

  for (const auto& t : wrt) {
    auto found = captured.find(t.id());
    result.push_back(found != captured.end() ? found->second
                                             : Tensor::zeros(t.shape(), t.precision()));
  }
  return result;
}

ParamSet gradient(const Tensor& loss, const ParamSet& wrt, bool create_graph) {
  std::vector<Tensor> tensors;
  tensors.reserve(wrt.size());
  for (const auto& e : wrt) tensors.push_back(e.value);
  auto grads = gradient(loss, tensors, create_graph);
  ParamSet out;
  std::size_t i = 0;
  for (const auto& e : wrt) {
    Tensor g = e.trainable ? std::move(grads[i])
                           : Tensor::zeros(e.value.shape(), e.value.precision());
    out.add(e.name, std::move(g), e.trainable);
    ++i;
  }
  return out;
}

ParamSet finite_difference_gradient(const ScalarFunction& f, const ParamSet& at, double eps) {
  NoGradGuard guard;
  ParamSet out;
  ParamSet probe = at.clone();
  for (const auto& e : at) {
    std::vector<double> grad(e.value.numel(), 0.0);
    if (e.trainable) {
      std::vector<double> base(e.value.values().begin(), e.value.values().end());
      for (std::size_t i = 0; i < base.size(); ++i) {
        auto plus = base;
        plus[i] += eps;
        probe.set(e.name, Tensor::from_values(e.value.shape(), plus, e.value.precision()));
        const double fp = f(probe);
        auto minus = base;
        minus[i] -= eps;
        probe.set(e.name, Tensor::from_values(e.value.shape(), minus, e.value.precision()));
        const double fm = f(probe);
        grad[i] = (fp - fm) / (2.0 * eps);
      }
      probe.set(e.name, e.value.detach());
    }
    out.add(e.name, Tensor::from_values(e.value.shape(), std::move(grad), e.value.precision()),
            e.trainable);
  }
  return out;
}

}  // namespace metava::ad
