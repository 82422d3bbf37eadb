#include "metava/autodiff/param_set.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "metava/autodiff/ops.hpp"

namespace metava::ad {

void ParamSet::add(std::string name, Tensor value, bool trainable) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  entries_.push_back({std::move(name), std::move(value), trainable});
}

std::size_t ParamSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  return entries_.size();
}

bool ParamSet::contains(std::string_view name) const { return index_of(name) < entries_.size(); }

const ParamSet::Entry& ParamSet::entry(std::string_view name) const {
  const auto i = index_of(name);
  if (i == entries_.size()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return entries_[i];
}

const Tensor& ParamSet::operator[](std::string_view name) const { return entry(name).value; }

void ParamSet::set(std::string_view name, Tensor value) {
  const auto i = index_of(name);
  if (i == entries_.size()) throw std::out_of_range("unknown parameter: " + std::string(name));
  if (entries_[i].value.shape() != value.shape())
    throw ShapeError("ParamSet::set", {entries_[i].value.shape(), value.shape()});
  entries_[i].value = std::move(value);
}

std::size_t ParamSet::parameter_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.trainable || !trainable_only) n += e.value.numel();
  return n;
}

ParamSet ParamSet::clone() const {
  ParamSet out;
  for (const auto& e : entries_) out.entries_.push_back({e.name, e.value.detach(), e.trainable});
  return out;
}

ParamSet ParamSet::as_leaves() const {
  ParamSet out = clone();
  for (auto& e : out.entries_)
    if (e.trainable) e.value.set_requires_grad(true);
  return out;
}

ParamSet ParamSet::to(Precision precision) const {
  ParamSet out;
  for (const auto& e : entries_) out.entries_.push_back({e.name, e.value.to(precision), e.trainable});
  return out;
}

namespace {
void check_compatible(const ParamSet& a, const ParamSet& b, const char* what) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": size mismatch");
  auto ia = a.begin();
  auto ib = b.begin();
  for (; ia != a.end(); ++ia, ++ib)
    if (ia->name != ib->name || ia->value.shape() != ib->value.shape())
      throw ShapeError(what, {ia->value.shape(), ib->value.shape()}, ia->name + " vs " + ib->name);
}
}  // namespace

ParamSet ParamSet::updated(const ParamSet& grads, double lr) const {
  check_compatible(*this, grads, "ParamSet::updated");
  ParamSet out;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    Tensor v = e.trainable ? sub(e.value, mul(grads.entries_[i].value, lr)) : e.value;
    out.entries_.push_back({e.name, std::move(v), e.trainable});
  }
  return out;
}

ParamSet ParamSet::updated_values(const ParamSet& grads, double lr) const {
  NoGradGuard guard;
  return updated(grads, lr);
}

ParamSet ParamSet::plus(const ParamSet& other) const {
  check_compatible(*this, other, "ParamSet::plus");
  ParamSet out;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    Tensor v = e.trainable ? ad::add(e.value, other.entries_[i].value) : e.value;
    out.entries_.push_back({e.name, std::move(v), e.trainable});
  }
  return out;
}

ParamSet ParamSet::scaled(double factor) const {
  ParamSet out;
  for (const auto& e : entries_)
    out.entries_.push_back(Entry{e.name, e.trainable ? mul(e.value, factor) : e.value, e.trainable});
  return out;
}

std::vector<Tensor> ParamSet::trainable_tensors() const {
  std::vector<Tensor> out;
  for (const auto& e : entries_)
    if (e.trainable) out.push_back(e.value);
  return out;
}

bool ParamSet::value_equal(const ParamSet& other) const {
  if (size() != other.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.trainable != b.trainable || a.value.shape() != b.value.shape())
      return false;
    const auto av = a.value.values();
    const auto bv = b.value.values();
    if (!std::equal(av.begin(), av.end(), bv.begin())) return false;
  }
  return true;
}

bool ParamSet::all_finite() const {
  for (const auto& e : entries_)
    for (double v : e.value.values())
      if (!std::isfinite(v)) return false;
  return true;
}

double max_relative_error(const ParamSet& a, const ParamSet& b, double floor) {
  check_compatible(a, b, "max_relative_error");
  double worst = 0.0;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (!ia->trainable) continue;
    const auto av = ia->value.values();
    const auto bv = ib->value.values();
    for (std::size_t i = 0; i < av.size(); ++i) {
      const double scale = std::max({std::abs(av[i]), std::abs(bv[i]), floor});
      worst = std::max(worst, std::abs(av[i] - bv[i]) / scale);
    }
  }
  return worst;
}

}  // namespace metava::ad
