#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "metava/autodiff/tensor.hpp"

namespace metava::ad {

// Named, ordered collection of parameter tensors. Entries flagged as not
// trainable (batch-norm running statistics) are carried along but never
// receive updates or gradients.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    bool trainable = true;
  };

  void add(std::string name, Tensor value, bool trainable = true);

  bool contains(std::string_view name) const;
  const Tensor& operator[](std::string_view name) const;
  const Entry& entry(std::string_view name) const;
  // Replaces the value of an existing entry; the shape must not change.
  void set(std::string_view name, Tensor value);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  std::size_t parameter_count(bool trainable_only = true) const;

  // Value-equal copy with no graph history.
  ParamSet clone() const;
  // Value-equal copy whose trainable entries are fresh leaves requiring grad.
  ParamSet as_leaves() const;
  ParamSet to(Precision precision) const;

  // p - lr * g for every trainable entry, as recorded primitives; entries that
  // are not trainable are carried over unchanged.
  ParamSet updated(const ParamSet& grads, double lr) const;
  // Same update computed on detached values.
  ParamSet updated_values(const ParamSet& grads, double lr) const;

  ParamSet plus(const ParamSet& other) const;  // trainable entries only
  ParamSet scaled(double factor) const;        // trainable entries only

  std::vector<Tensor> trainable_tensors() const;

  bool value_equal(const ParamSet& other) const;
  bool all_finite() const;

 private:
  std::size_t index_of(std::string_view name) const;

  std::vector<Entry> entries_;
};

// Largest |a - b| / max(|a|, |b|, floor) over every trainable coordinate.
double max_relative_error(const ParamSet& a, const ParamSet& b, double floor = 1e-8);

}  // namespace metava::ad
