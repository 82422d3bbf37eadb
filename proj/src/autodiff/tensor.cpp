#include "metava/autodiff/tensor.hpp"

#include <sstream>

namespace metava::ad {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

const char* to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Precision promote(Precision a, Precision b) {
  return (a == Precision::f64 || b == Precision::f64) ? Precision::f64 : Precision::f32;
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {
std::string shape_message(const std::string& primitive, const std::vector<Shape>& shapes,
                          const std::string& detail) {
  std::ostringstream os;
  os << primitive << ": incompatible shapes";
  for (const auto& s : shapes) os << ' ' << to_string(s);
  if (!detail.empty()) os << " (" << detail << ')';
  return os.str();
}
}  // namespace

ShapeError::ShapeError(std::string primitive, std::vector<Shape> shapes,
                       const std::string& detail)
    : std::invalid_argument(shape_message(primitive, shapes, detail)),
      primitive_(std::move(primitive)),
      shapes_(std::move(shapes)) {}

void round_to_precision(std::vector<double>& values, Precision precision) {
  if (precision != Precision::f32) return;
  for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
}

Tensor Tensor::make(Shape shape, std::vector<double> values, Precision precision) {
  if (ad::numel(shape) != values.size())
    throw ShapeError("tensor", {shape}, "element count " + std::to_string(values.size()));
  for (auto e : shape)
    if (e == 0) throw ShapeError("tensor", {shape}, "extents must be positive");
  round_to_precision(values, precision);
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->precision = precision;
  return Tensor(std::move(impl));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, Precision precision) {
  return make(std::move(shape), std::move(values), precision);
}

Tensor Tensor::full(Shape shape, double value, Precision precision) {
  auto n = ad::numel(shape);
  return make(std::move(shape), std::vector<double>(n, value), precision);
}

Tensor Tensor::zeros(Shape shape, Precision precision) { return full(std::move(shape), 0.0, precision); }
Tensor Tensor::ones(Shape shape, Precision precision) { return full(std::move(shape), 1.0, precision); }
Tensor Tensor::scalar(double value, Precision precision) { return full({1}, value, precision); }

const TensorImpl& Tensor::impl() const {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }
std::size_t Tensor::numel() const { return impl().data.size(); }
Precision Tensor::precision() const { return impl().precision; }
std::span<const double> Tensor::values() const { return impl().data; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item", {shape()}, "expected a single element");
  return impl().data[0];
}

bool Tensor::requires_grad() const { return impl().requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  if (!is_leaf()) throw std::logic_error("set_requires_grad on a non-leaf tensor");
  impl_->requires_grad = flag;
  return *this;
}

bool Tensor::is_leaf() const { return impl().grad_fn == nullptr; }
const std::shared_ptr<Node>& Tensor::grad_fn() const { return impl().grad_fn; }

Tensor Tensor::detach() const { return make(shape(), impl().data, precision()); }

Tensor Tensor::to(Precision p) const { return make(shape(), impl().data, p); }

void Tensor::attach(std::shared_ptr<Node> node) {
  impl_->grad_fn = std::move(node);
  impl_->requires_grad = true;
}

bool grad_enabled() noexcept { return g_grad_enabled; }

GradModeGuard::GradModeGuard(bool enabled) : previous_(g_grad_enabled) { g_grad_enabled = enabled; }
GradModeGuard::~GradModeGuard() { g_grad_enabled = previous_; }

}  // namespace metava::ad
