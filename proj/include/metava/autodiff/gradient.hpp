#pragma once

#include <functional>
#include <span>
#include <vector>

#include "metava/autodiff/param_set.hpp"
#include "metava/autodiff/tensor.hpp"

namespace metava::ad {

// Reverse-mode gradient of a single-element `loss` with respect to each tensor
// in `wrt` (leaves or intermediates). Tensors the loss does not depend on get
// zeros. With create_graph the returned gradients are themselves recorded and
// can be differentiated again.
std::vector<Tensor> gradient(const Tensor& loss, std::span<const Tensor> wrt,
                             bool create_graph = false);

// Gradient for every entry of `wrt`; non-trainable entries get zeros.
ParamSet gradient(const Tensor& loss, const ParamSet& wrt, bool create_graph = false);

using ScalarFunction = std::function<double(const ParamSet&)>;

// Central differences (f(p + eps e_i) - f(p - eps e_i)) / (2 eps) for every
// trainable coordinate.
ParamSet finite_difference_gradient(const ScalarFunction& f, const ParamSet& at, double eps);

}  // namespace metava::ad
