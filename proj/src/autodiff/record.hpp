#pragma once

#include <vector>

#include "metava/autodiff/tensor.hpp"

namespace metava::ad::detail {

// Builds a primitive's result and, when recording is on and an operand needs
// a gradient, links it to a graph node.
Tensor record(Shape shape, std::vector<double> values, Precision precision, const char* name,
              std::vector<Tensor> inputs, BackwardFn backward);

}  // namespace metava::ad::detail
