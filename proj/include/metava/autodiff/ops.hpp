#pragma once

// Differentiable primitives. Every primitive records itself when recording is
// enabled and at least one operand requires a gradient; results are plain
// values otherwise.

#include <cstddef>
#include <memory>
#include <vector>

#include "metava/autodiff/tensor.hpp"

namespace metava::ad {

// Elementwise arithmetic with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, double b);
Tensor mul(const Tensor& a, double b);

Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor pow(const Tensor& x, double exponent);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& x) { return neg(x); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, double b) { return add(a, -b); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, b); }
inline Tensor operator*(double a, const Tensor& b) { return mul(b, a); }

// Shape of broadcasting a against b; throws ShapeError naming `primitive`.
Shape broadcast_shape(const Shape& a, const Shape& b, const char* primitive);

// Reductions.
Tensor sum(const Tensor& x);   // -> shape (1)
Tensor mean(const Tensor& x);  // -> shape (1)
// Sums broadcast dimensions away so the result has `shape`.
Tensor sum_to(const Tensor& x, const Shape& shape);
Tensor broadcast_to(const Tensor& x, const Shape& shape);

Tensor reshape(const Tensor& x, const Shape& shape);
Tensor transpose(const Tensor& x);  // 2-D only
Tensor matmul(const Tensor& a, const Tensor& b);  // (m,k) x (k,n)

// Flat-index selection: out[i] = x.flat[indices[i]].
using IndexList = std::shared_ptr<const std::vector<std::size_t>>;
Tensor gather(const Tensor& x, IndexList indices, const Shape& out_shape);
// Adjoint of gather: out.flat[indices[i]] += x[i], zero elsewhere.
Tensor scatter_add(const Tensor& x, IndexList indices, const Shape& out_shape);

// Row-wise log-softmax of a (rows, classes) tensor.
Tensor log_softmax(const Tensor& x);

struct Conv1dSpec {
  std::size_t stride = 1;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;
  std::size_t groups = 1;
};

// Padding that keeps length ceil(L / stride), split with the extra sample on
// the right when the total is odd.
Conv1dSpec same_padding(std::size_t length, std::size_t kernel, std::size_t stride,
                        std::size_t groups = 1);

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, const Conv1dSpec& spec);

// x: (batch, in_channels, length), w: (out_channels, in_channels/groups, kernel).
Tensor conv1d(const Tensor& x, const Tensor& w, const Conv1dSpec& spec);
// Adjoint of conv1d with respect to x.
Tensor conv1d_input_grad(const Tensor& grad_out, const Tensor& w, const Conv1dSpec& spec,
                         std::size_t in_length);
// Adjoint of conv1d with respect to w.
Tensor conv1d_weight_grad(const Tensor& x, const Tensor& grad_out, const Conv1dSpec& spec,
                          std::size_t kernel);

// Composite operations built from the primitives above.
Tensor max_pool1d(const Tensor& x, std::size_t kernel, std::size_t stride);
Tensor mean_last_axis(const Tensor& x);  // (n, c, l) -> (n, c)
// Zero-pads the channel axis of (n, c, l) to (n, before + c + after, l).
Tensor pad_channels(const Tensor& x, std::size_t before, std::size_t after);
// Mean softmax cross-entropy of (rows, classes) logits against class labels.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace metava::ad
