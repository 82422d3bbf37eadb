// Grouped 1-D convolution and its two adjoints. The three operations are
// closed under differentiation: each one's backward pass is expressed with
// the other two, which makes gradients of any order available.

#include <algorithm>
#include <string>

#include "metava/autodiff/ops.hpp"
#include "record.hpp"

namespace metava::ad {

namespace {

struct ConvDims {
  std::size_t batch, in_ch, out_ch, in_len, out_len, kernel, in_per_group, out_per_group;
};

ConvDims check_dims(const char* primitive, const Shape& x, const Shape& w, std::size_t in_len,
                    std::size_t out_len, const Conv1dSpec& spec) {
  if (w.size() != 3 || spec.groups == 0 || spec.stride == 0)
    throw ShapeError(primitive, {x, w}, "weight must be (out, in/groups, kernel)");
  ConvDims d{};
  d.out_ch = w[0];
  d.in_per_group = w[1];
  d.kernel = w[2];
  d.in_ch = d.in_per_group * spec.groups;
  d.in_len = in_len;
  d.out_len = out_len;
  if (d.out_ch % spec.groups != 0)
    throw ShapeError(primitive, {x, w}, "out channels not divisible by groups");
  d.out_per_group = d.out_ch / spec.groups;
  if (in_len + spec.pad_left + spec.pad_right < d.kernel)
    throw ShapeError(primitive, {x, w}, "input shorter than kernel");
  if (conv1d_output_length(in_len, d.kernel, spec) != out_len)
    throw ShapeError(primitive, {x, w}, "output length mismatch");
  return d;
}

// Valid output positions t (in [lo, hi)) for tap k: 0 <= t*stride + k - pad < in_len.
void tap_range(const ConvDims& d, const Conv1dSpec& spec, std::size_t k, std::size_t& lo,
               std::size_t& hi) {
  const long s = static_cast<long>(spec.stride);
  const long shift = static_cast<long>(k) - static_cast<long>(spec.pad_left);
  long first = 0;
  if (shift < 0) first = (-shift + s - 1) / s;
  long last = (static_cast<long>(d.in_len) - 1 - shift);
  long end = last < 0 ? 0 : last / s + 1;
  end = std::min<long>(end, static_cast<long>(d.out_len));
  lo = static_cast<std::size_t>(std::min(first, end));
  hi = static_cast<std::size_t>(end);
}

std::vector<double> conv_forward(const ConvDims& d, const Conv1dSpec& spec,
                                 std::span<const double> x, std::span<const double> w) {
  std::vector<double> y(d.batch * d.out_ch * d.out_len, 0.0);
  for (std::size_t n = 0; n < d.batch; ++n)
    for (std::size_t co = 0; co < d.out_ch; ++co) {
      const std::size_t g = co / d.out_per_group;
      double* yrow = y.data() + (n * d.out_ch + co) * d.out_len;
      for (std::size_t cig = 0; cig < d.in_per_group; ++cig) {
        const double* xrow = x.data() + (n * d.in_ch + g * d.in_per_group + cig) * d.in_len;
        const double* wrow = w.data() + (co * d.in_per_group + cig) * d.kernel;
        for (std::size_t k = 0; k < d.kernel; ++k) {
          const double wv = wrow[k];
          if (wv == 0.0) continue;
          std::size_t lo, hi;
          tap_range(d, spec, k, lo, hi);
          const long shift = static_cast<long>(k) - static_cast<long>(spec.pad_left);
          for (std::size_t t = lo; t < hi; ++t)
            yrow[t] += wv * xrow[static_cast<long>(t * spec.stride) + shift];
        }
      }
    }
  return y;
}

std::vector<double> conv_input_adjoint(const ConvDims& d, const Conv1dSpec& spec,
                                       std::span<const double> gy, std::span<const double> w) {
  std::vector<double> gx(d.batch * d.in_ch * d.in_len, 0.0);
  for (std::size_t n = 0; n < d.batch; ++n)
    for (std::size_t co = 0; co < d.out_ch; ++co) {
      const std::size_t g = co / d.out_per_group;
      const double* grow = gy.data() + (n * d.out_ch + co) * d.out_len;
      for (std::size_t cig = 0; cig < d.in_per_group; ++cig) {
        double* xrow = gx.data() + (n * d.in_ch + g * d.in_per_group + cig) * d.in_len;
        const double* wrow = w.data() + (co * d.in_per_group + cig) * d.kernel;
        for (std::size_t k = 0; k < d.kernel; ++k) {
          const double wv = wrow[k];
          if (wv == 0.0) continue;
          std::size_t lo, hi;
          tap_range(d, spec, k, lo, hi);
          const long shift = static_cast<long>(k) - static_cast<long>(spec.pad_left);
          for (std::size_t t = lo; t < hi; ++t)
            xrow[static_cast<long>(t * spec.stride) + shift] += wv * grow[t];
        }
      }
    }
  return gx;
}

std::vector<double> conv_weight_adjoint(const ConvDims& d, const Conv1dSpec& spec,
                                        std::span<const double> x, std::span<const double> gy) {
  std::vector<double> gw(d.out_ch * d.in_per_group * d.kernel, 0.0);
  for (std::size_t n = 0; n < d.batch; ++n)
    for (std::size_t co = 0; co < d.out_ch; ++co) {
      const std::size_t g = co / d.out_per_group;
      const double* grow = gy.data() + (n * d.out_ch + co) * d.out_len;
      for (std::size_t cig = 0; cig < d.in_per_group; ++cig) {
        const double* xrow = x.data() + (n * d.in_ch + g * d.in_per_group + cig) * d.in_len;
        double* wrow = gw.data() + (co * d.in_per_group + cig) * d.kernel;
        for (std::size_t k = 0; k < d.kernel; ++k) {
          std::size_t lo, hi;
          tap_range(d, spec, k, lo, hi);
          const long shift = static_cast<long>(k) - static_cast<long>(spec.pad_left);
          double acc = 0.0;
          for (std::size_t t = lo; t < hi; ++t)
            acc += grow[t] * xrow[static_cast<long>(t * spec.stride) + shift];
          wrow[k] += acc;
        }
      }
    }
  return gw;
}

}  // namespace

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, const Conv1dSpec& spec) {
  const std::size_t padded = length + spec.pad_left + spec.pad_right;
  if (padded < kernel || spec.stride == 0) return 0;
  return (padded - kernel) / spec.stride + 1;
}

Conv1dSpec same_padding(std::size_t length, std::size_t kernel, std::size_t stride,
                        std::size_t groups) {
  const std::size_t out = (length + stride - 1) / stride;
  const long needed = static_cast<long>((out - 1) * stride + kernel) - static_cast<long>(length);
  const std::size_t total = needed > 0 ? static_cast<std::size_t>(needed) : 0;
  Conv1dSpec spec;
  spec.stride = stride;
  spec.groups = groups;
  spec.pad_left = total / 2;
  spec.pad_right = total - spec.pad_left;
  return spec;
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Conv1dSpec& spec) {
  if (x.dim() != 3) throw ShapeError("conv1d", {x.shape(), w.shape()}, "input must be 3-D");
  const std::size_t in_len = x.shape()[2];
  const std::size_t kernel = w.dim() == 3 ? w.shape()[2] : 0;
  ConvDims d = check_dims("conv1d", x.shape(), w.shape(), in_len,
                          conv1d_output_length(in_len, kernel, spec), spec);
  d.batch = x.shape()[0];
  if (x.shape()[1] != d.in_ch)
    throw ShapeError("conv1d", {x.shape(), w.shape()}, "channel mismatch");
  auto y = conv_forward(d, spec, x.values(), w.values());
  return detail::record({d.batch, d.out_ch, d.out_len}, std::move(y),
                promote(x.precision(), w.precision()), "conv1d", {x, w},
                [x, w, spec, in_len, kernel](const Tensor& g) {
                  return std::vector<Tensor>{conv1d_input_grad(g, w, spec, in_len),
                                             conv1d_weight_grad(x, g, spec, kernel)};
                });
}

Tensor conv1d_input_grad(const Tensor& grad_out, const Tensor& w, const Conv1dSpec& spec,
                         std::size_t in_length) {
  if (grad_out.dim() != 3)
    throw ShapeError("conv1d_input_grad", {grad_out.shape(), w.shape()}, "grad must be 3-D");
  ConvDims d = check_dims("conv1d_input_grad", grad_out.shape(), w.shape(), in_length,
                          grad_out.shape()[2], spec);
  d.batch = grad_out.shape()[0];
  if (grad_out.shape()[1] != d.out_ch)
    throw ShapeError("conv1d_input_grad", {grad_out.shape(), w.shape()}, "channel mismatch");
  auto gx = conv_input_adjoint(d, spec, grad_out.values(), w.values());
  const std::size_t kernel = d.kernel;
  return detail::record({d.batch, d.in_ch, in_length}, std::move(gx),
                promote(grad_out.precision(), w.precision()), "conv1d_input_grad", {grad_out, w},
                [grad_out, w, spec, kernel](const Tensor& g) {
                  return std::vector<Tensor>{conv1d(g, w, spec),
                                             conv1d_weight_grad(g, grad_out, spec, kernel)};
                });
}

Tensor conv1d_weight_grad(const Tensor& x, const Tensor& grad_out, const Conv1dSpec& spec,
                          std::size_t kernel) {
  if (x.dim() != 3 || grad_out.dim() != 3 || x.shape()[0] != grad_out.shape()[0])
    throw ShapeError("conv1d_weight_grad", {x.shape(), grad_out.shape()});
  if (spec.groups == 0 || x.shape()[1] % spec.groups != 0)
    throw ShapeError("conv1d_weight_grad", {x.shape(), grad_out.shape()},
                     "in channels not divisible by groups");
  const Shape w_shape{grad_out.shape()[1], x.shape()[1] / spec.groups, kernel};
  ConvDims d = check_dims("conv1d_weight_grad", x.shape(), w_shape, x.shape()[2],
                          grad_out.shape()[2], spec);
  d.batch = x.shape()[0];
  auto gw = conv_weight_adjoint(d, spec, x.values(), grad_out.values());
  const std::size_t in_len = x.shape()[2];
  return detail::record(w_shape, std::move(gw), promote(x.precision(), grad_out.precision()),
                "conv1d_weight_grad", {x, grad_out},
                [x, grad_out, spec, in_len](const Tensor& g) {
                  return std::vector<Tensor>{conv1d_input_grad(grad_out, g, spec, in_len),
                                             conv1d(x, g, spec)};
                });
}

}  // namespace metava::ad
