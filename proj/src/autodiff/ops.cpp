#include "metava/autodiff/ops.hpp"

#include "record.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace metava::ad {

Tensor detail::record(Shape shape, std::vector<double> values, Precision precision,
                      const char* name, std::vector<Tensor> inputs, BackwardFn backward) {
  Tensor out = Tensor::make(std::move(shape), std::move(values), precision);
  if (!grad_enabled()) return out;
  bool needs = std::any_of(inputs.begin(), inputs.end(),
                           [](const Tensor& t) { return t.requires_grad(); });
  if (!needs) return out;
  auto node = std::make_shared<Node>();
  node->name = name;
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);
  out.attach(std::move(node));
  return out;
}

namespace {

// Per-dimension strides of `in` aligned to the rank of `out`, zero where `in`
// is broadcast.
std::vector<std::size_t> aligned_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t offset = out.size() - in.size();
  std::size_t stride = 1;
  for (std::size_t d = in.size(); d-- > 0;) {
    strides[d + offset] = in[d] == 1 ? 0 : stride;
    stride *= in[d];
  }
  return strides;
}

template <class F>
std::vector<double> broadcast_apply(const Tensor& a, const Tensor& b, const Shape& out, F f) {
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t n = numel(out);
  std::vector<double> result(n);
  if (a.shape() == out && b.shape() == out) {
    for (std::size_t i = 0; i < n; ++i) result[i] = f(av[i], bv[i]);
    return result;
  }
  if (a.shape() == out && b.numel() == 1) {
    const double s = bv[0];
    for (std::size_t i = 0; i < n; ++i) result[i] = f(av[i], s);
    return result;
  }
  if (b.shape() == out && a.numel() == 1) {
    const double s = av[0];
    for (std::size_t i = 0; i < n; ++i) result[i] = f(s, bv[i]);
    return result;
  }
  const auto sa = aligned_strides(a.shape(), out);
  const auto sb = aligned_strides(b.shape(), out);
  const std::size_t rank = out.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t i = 0; i < n; ++i) {
    result[i] = f(av[oa], bv[ob]);
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      oa += sa[d];
      ob += sb[d];
      if (idx[d] < out[d]) break;
      oa -= sa[d] * out[d];
      ob -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
  return result;
}

template <class F>
Tensor unary(const Tensor& x, const char* name, F f, BackwardFn backward) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return detail::record(x.shape(), std::move(out), x.precision(), name, {x}, std::move(backward));
}

double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b, const char* primitive) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) throw ShapeError(primitive, {a, b}, "not broadcastable");
    out[i] = std::max(da, db);
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  Shape out = broadcast_shape(a.shape(), b.shape(), "add");
  auto values = broadcast_apply(a, b, out, [](double x, double y) { return x + y; });
  return detail::record(out, std::move(values), promote(a.precision(), b.precision()), "add", {a, b},
                [sa = a.shape(), sb = b.shape()](const Tensor& g) {
                  return std::vector<Tensor>{sum_to(g, sa), sum_to(g, sb)};
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Shape out = broadcast_shape(a.shape(), b.shape(), "sub");
  auto values = broadcast_apply(a, b, out, [](double x, double y) { return x - y; });
  return detail::record(out, std::move(values), promote(a.precision(), b.precision()), "sub", {a, b},
                [sa = a.shape(), sb = b.shape()](const Tensor& g) {
                  return std::vector<Tensor>{sum_to(g, sa), sum_to(neg(g), sb)};
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Shape out = broadcast_shape(a.shape(), b.shape(), "mul");
  auto values = broadcast_apply(a, b, out, [](double x, double y) { return x * y; });
  return detail::record(out, std::move(values), promote(a.precision(), b.precision()), "mul", {a, b},
                [a, b](const Tensor& g) {
                  return std::vector<Tensor>{sum_to(mul(g, b), a.shape()),
                                             sum_to(mul(g, a), b.shape())};
                });
}

Tensor div(const Tensor& a, const Tensor& b) {
  Shape out = broadcast_shape(a.shape(), b.shape(), "div");
  auto values = broadcast_apply(a, b, out, [](double x, double y) { return x / y; });
  return detail::record(out, std::move(values), promote(a.precision(), b.precision()), "div", {a, b},
                [a, b](const Tensor& g) {
                  Tensor ga = div(g, b);
                  Tensor gb = neg(div(mul(ga, a), b));
                  return std::vector<Tensor>{sum_to(ga, a.shape()), sum_to(gb, b.shape())};
                });
}

Tensor add(const Tensor& a, double b) {
  return unary(a, "add_scalar", [b](double v) { return v + b; },
               [](const Tensor& g) { return std::vector<Tensor>{g}; });
}

Tensor mul(const Tensor& a, double b) {
  return unary(a, "mul_scalar", [b](double v) { return v * b; },
               [b](const Tensor& g) { return std::vector<Tensor>{mul(g, b)}; });
}

Tensor neg(const Tensor& x) {
  return unary(x, "neg", [](double v) { return -v; },
               [](const Tensor& g) { return std::vector<Tensor>{neg(g)}; });
}

Tensor exp(const Tensor& x) {
  return unary(x, "exp", [](double v) { return std::exp(v); },
               [x](const Tensor& g) { return std::vector<Tensor>{mul(g, exp(x))}; });
}

Tensor log(const Tensor& x) {
  return unary(x, "log", [](double v) { return std::log(v); },
               [x](const Tensor& g) { return std::vector<Tensor>{div(g, x)}; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, "sigmoid", stable_sigmoid, [x](const Tensor& g) {
    Tensor s = sigmoid(x);
    return std::vector<Tensor>{mul(g, sub(s, mul(s, s)))};
  });
}

Tensor pow(const Tensor& x, double exponent) {
  return unary(x, "pow", [exponent](double v) { return std::pow(v, exponent); },
               [x, exponent](const Tensor& g) {
                 if (exponent == 1.0) return std::vector<Tensor>{g};
                 return std::vector<Tensor>{mul(g, mul(pow(x, exponent - 1.0), exponent))};
               });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return detail::record({1}, {total}, x.precision(), "sum", {x}, [shape = x.shape()](const Tensor& g) {
    return std::vector<Tensor>{broadcast_to(g, shape)};
  });
}

Tensor mean(const Tensor& x) { return mul(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum_to(const Tensor& x, const Shape& shape) {
  if (x.shape() == shape) return x;
  const Shape& in = x.shape();
  if (shape.size() > in.size()) throw ShapeError("sum_to", {in, shape}, "target rank too large");
  const std::size_t offset = in.size() - shape.size();
  for (std::size_t d = 0; d < shape.size(); ++d)
    if (shape[d] != 1 && shape[d] != in[d + offset])
      throw ShapeError("sum_to", {in, shape}, "target not broadcast-compatible");
  std::vector<double> out(numel(shape), 0.0);
  const auto xv = x.values();
  if (numel(shape) == 1) {
    double total = 0.0;
    for (double v : xv) total += v;
    out[0] = total;
  } else {
    const auto so = aligned_strides(shape, in);
    const std::size_t rank = in.size();
    std::vector<std::size_t> idx(rank, 0);
    std::size_t o = 0;
    for (std::size_t i = 0; i < xv.size(); ++i) {
      out[o] += xv[i];
      for (std::size_t d = rank; d-- > 0;) {
        ++idx[d];
        o += so[d];
        if (idx[d] < in[d]) break;
        o -= so[d] * in[d];
        idx[d] = 0;
      }
    }
  }
  return detail::record(shape, std::move(out), x.precision(), "sum_to", {x},
                [in](const Tensor& g) { return std::vector<Tensor>{broadcast_to(g, in)}; });
}

Tensor broadcast_to(const Tensor& x, const Shape& shape) {
  if (x.shape() == shape) return x;
  if (broadcast_shape(x.shape(), shape, "broadcast_to") != shape)
    throw ShapeError("broadcast_to", {x.shape(), shape}, "cannot expand to target");
  Tensor zero_dummy = Tensor::make({1}, {0.0}, x.precision());
  auto values = broadcast_apply(x, zero_dummy, shape, [](double v, double) { return v; });
  return detail::record(shape, std::move(values), x.precision(), "broadcast_to", {x},
                [in = x.shape()](const Tensor& g) { return std::vector<Tensor>{sum_to(g, in)}; });
}

Tensor reshape(const Tensor& x, const Shape& shape) {
  if (numel(shape) != x.numel()) throw ShapeError("reshape", {x.shape(), shape});
  if (x.shape() == shape) return x;
  std::vector<double> values(x.values().begin(), x.values().end());
  return detail::record(shape, std::move(values), x.precision(), "reshape", {x},
                [in = x.shape()](const Tensor& g) { return std::vector<Tensor>{reshape(g, in)}; });
}

Tensor transpose(const Tensor& x) {
  if (x.dim() != 2) throw ShapeError("transpose", {x.shape()}, "expected 2-D");
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  const auto xv = x.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xv[i * c + j];
  return detail::record({c, r}, std::move(out), x.precision(), "transpose", {x},
                [](const Tensor& g) { return std::vector<Tensor>{transpose(g)}; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dim() != 2 || b.dim() != 2 || a.shape()[1] != b.shape()[0])
    throw ShapeError("matmul", {a.shape(), b.shape()});
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  return detail::record({m, n}, std::move(out), promote(a.precision(), b.precision()), "matmul", {a, b},
                [a, b](const Tensor& g) {
                  return std::vector<Tensor>{matmul(g, transpose(b)), matmul(transpose(a), g)};
                });
}

Tensor gather(const Tensor& x, IndexList indices, const Shape& out_shape) {
  if (numel(out_shape) != indices->size())
    throw ShapeError("gather", {x.shape(), out_shape}, "index count mismatch");
  const auto xv = x.values();
  std::vector<double> out(indices->size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t src = (*indices)[i];
    if (src >= xv.size()) throw ShapeError("gather", {x.shape()}, "index out of range");
    out[i] = xv[src];
  }
  return detail::record(out_shape, std::move(out), x.precision(), "gather", {x},
                [indices, in = x.shape()](const Tensor& g) {
                  return std::vector<Tensor>{scatter_add(g, indices, in)};
                });
}

Tensor scatter_add(const Tensor& x, IndexList indices, const Shape& out_shape) {
  if (x.numel() != indices->size())
    throw ShapeError("scatter_add", {x.shape(), out_shape}, "index count mismatch");
  const auto xv = x.values();
  std::vector<double> out(numel(out_shape), 0.0);
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const std::size_t dst = (*indices)[i];
    if (dst >= out.size()) throw ShapeError("scatter_add", {out_shape}, "index out of range");
    out[dst] += xv[i];
  }
  return detail::record(out_shape, std::move(out), x.precision(), "scatter_add", {x},
                [indices, in = x.shape()](const Tensor& g) {
                  return std::vector<Tensor>{gather(g, indices, in)};
                });
}

Tensor log_softmax(const Tensor& x) {
  if (x.dim() != 2) throw ShapeError("log_softmax", {x.shape()}, "expected (rows, classes)");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * cols;
    double mx = row[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(row[c] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = row[c] - lse;
  }
  return detail::record(x.shape(), std::move(out), x.precision(), "log_softmax", {x},
                [x, rows](const Tensor& g) {
                  Tensor probs = exp(log_softmax(x));
                  return std::vector<Tensor>{sub(g, mul(probs, sum_to(g, {rows, 1})))};
                });
}

Tensor max_pool1d(const Tensor& x, std::size_t kernel, std::size_t stride) {
  if (x.dim() != 3 || kernel == 0 || stride == 0 || x.shape()[2] < kernel)
    throw ShapeError("max_pool1d", {x.shape()}, "kernel " + std::to_string(kernel));
  const std::size_t n = x.shape()[0], c = x.shape()[1], l = x.shape()[2];
  const std::size_t lo = (l - kernel) / stride + 1;
  const auto xv = x.values();
  auto idx = std::make_shared<std::vector<std::size_t>>(n * c * lo);
  for (std::size_t row = 0; row < n * c; ++row)
    for (std::size_t t = 0; t < lo; ++t) {
      std::size_t best = row * l + t * stride;
      for (std::size_t k = 1; k < kernel; ++k) {
        const std::size_t cand = row * l + t * stride + k;
        if (xv[cand] > xv[best]) best = cand;
      }
      (*idx)[row * lo + t] = best;
    }
  return gather(x, std::move(idx), {n, c, lo});
}

Tensor mean_last_axis(const Tensor& x) {
  if (x.dim() != 3) throw ShapeError("mean_last_axis", {x.shape()}, "expected 3-D");
  const std::size_t n = x.shape()[0], c = x.shape()[1], l = x.shape()[2];
  return mul(reshape(sum_to(x, {n, c, 1}), {n, c}), 1.0 / static_cast<double>(l));
}

Tensor pad_channels(const Tensor& x, std::size_t before, std::size_t after) {
  if (x.dim() != 3) throw ShapeError("pad_channels", {x.shape()}, "expected 3-D");
  if (before == 0 && after == 0) return x;
  const std::size_t n = x.shape()[0], c = x.shape()[1], l = x.shape()[2];
  const std::size_t co = before + c + after;
  auto idx = std::make_shared<std::vector<std::size_t>>(x.numel());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t t = 0; t < l; ++t)
        (*idx)[(b * c + ch) * l + t] = (b * co + ch + before) * l + t;
  return scatter_add(x, std::move(idx), {n, co, l});
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.dim() != 2 || logits.shape()[0] != labels.size())
    throw ShapeError("cross_entropy", {logits.shape(), Shape{labels.size()}});
  const std::size_t rows = logits.shape()[0], cols = logits.shape()[1];
  auto idx = std::make_shared<std::vector<std::size_t>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= cols)
      throw ShapeError("cross_entropy", {logits.shape()}, "label out of range");
    (*idx)[r] = r * cols + static_cast<std::size_t>(labels[r]);
  }
  return neg(mean(gather(log_softmax(logits), std::move(idx), {rows})));
}

}  // namespace metava::ad
