#pragma once

// Dense tensors that can record the operations applied to them so that
// gradients (and gradients of gradients) can be taken later.
//
// Storage is always double; a tensor tagged Precision::f32 has every element
// rounded to the nearest float after each primitive, which reproduces
// single-precision storage semantics while keeping one code path.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace metava::ad {

enum class Precision { f32, f64 };

const char* to_string(Precision p);
Precision promote(Precision a, Precision b);

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Raised by primitives when operand shapes are incompatible.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(std::string primitive, std::vector<Shape> shapes,
             const std::string& detail = {});

  const std::string& primitive() const noexcept { return primitive_; }
  const std::vector<Shape>& shapes() const noexcept { return shapes_; }

 private:
  std::string primitive_;
  std::vector<Shape> shapes_;
};

struct TensorImpl;
struct Node;

class Tensor {
 public:
  Tensor() = default;

  static Tensor from_values(Shape shape, std::vector<double> values,
                            Precision precision = Precision::f32);
  static Tensor full(Shape shape, double value,
                     Precision precision = Precision::f32);
  static Tensor zeros(Shape shape, Precision precision = Precision::f32);
  static Tensor ones(Shape shape, Precision precision = Precision::f32);
  static Tensor scalar(double value, Precision precision = Precision::f32);

  bool defined() const noexcept { return impl_ != nullptr; }

  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t numel() const;
  Precision precision() const;

  std::span<const double> values() const;
  double operator[](std::size_t flat_index) const { return values()[flat_index]; }
  // Value of a single-element tensor.
  double item() const;

  bool requires_grad() const;
  // Only valid on leaves (tensors not produced by a recorded primitive).
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const;
  const std::shared_ptr<Node>& grad_fn() const;

  // Copy of the values with no graph history and requires_grad unset.
  Tensor detach() const;
  // Same values converted to another storage precision (detached).
  Tensor to(Precision precision) const;

  // Identity of the underlying storage node.
  const TensorImpl* id() const noexcept { return impl_.get(); }
  bool same(const Tensor& other) const noexcept { return impl_ == other.impl_; }

  // Used by primitives to assemble results.
  static Tensor make(Shape shape, std::vector<double> values, Precision precision);
  void attach(std::shared_ptr<Node> node);

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  const TensorImpl& impl() const;

  std::shared_ptr<TensorImpl> impl_;
};

using BackwardFn = std::function<std::vector<Tensor>(const Tensor& grad_output)>;

// Recorded primitive application. Backward functions are written in terms of
// the public primitives, so running them with recording enabled produces a
// differentiable gradient.
struct Node {
  std::string name;
  std::vector<Tensor> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  Precision precision = Precision::f32;
  bool requires_grad = false;
  std::shared_ptr<Node> grad_fn;
};

// Recording switch, per thread. Independent graphs may be built on
// different threads at the same time.
bool grad_enabled() noexcept;

class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled);
  ~GradModeGuard();
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool previous_;
};

class NoGradGuard : public GradModeGuard {
 public:
  NoGradGuard() : GradModeGuard(false) {}
};

// Rounds every value to float when precision is f32.
void round_to_precision(std::vector<double>& values, Precision precision);

}  // namespace metava::ad
