#include "crossgen/tensor/param_store.hpp"

#include <cmath>

#include "crossgen/simd/kernels.hpp"
#include "crossgen/util/errors.hpp"

namespace crossgen::tensor {

Var& ParamStore::add(const std::string& name, Tensor init) {
  if (index_.contains(name)) throw Error("parameter already registered: " + name);
  index_.emplace(name, entries_.size());
  Tensor m(init.shape()), v(init.shape());
  entries_.push_back(Entry{name, Var::parameter(std::move(init)), std::move(m), std::move(v)});
  return entries_.back().var;
}

Tensor& ParamStore::add_buffer(const std::string& name, Tensor init) {
  for (const auto& b : buffers_)
    if (b.name == name) throw Error("buffer already registered: " + name);
  buffers_.push_back({name, std::move(init)});
  return buffers_.back().value;
}

Var& ParamStore::param(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter: " + name);
  return entries_[it->second].var;
}

Tensor& ParamStore::buffer(const std::string& name) {
  for (auto& b : buffers_)
    if (b.name == name) return b.value;
  throw Error("unknown buffer: " + name);
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.var.value().size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

StoreState ParamStore::export_state() const {
  StoreState s;
  s.step_count = step_count_;
  for (const auto& e : entries_) {
    s.params.push_back({e.name, e.var.value()});
    s.moments_m.push_back({e.name, e.adam_m});
    s.moments_v.push_back({e.name, e.adam_v});
  }
  s.buffers.assign(buffers_.begin(), buffers_.end());
  return s;
}

void ParamStore::import_state(const StoreState& state) {
  if (state.params.size() != entries_.size() || state.moments_m.size() != entries_.size() ||
      state.moments_v.size() != entries_.size() || state.buffers.size() != buffers_.size())
    throw Error("parameter store layout mismatch");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& e = entries_[i];
    for (const auto* t : {&state.params[i], &state.moments_m[i], &state.moments_v[i]})
      if (t->name != e.name || t->value.shape() != e.var.value().shape())
        throw Error("parameter mismatch at " + e.name + " (found " + t->name + " " + to_string(t->value.shape()) + ")");
  }
  for (std::size_t i = 0; i < buffers_.size(); ++i)
    if (state.buffers[i].name != buffers_[i].name || state.buffers[i].value.shape() != buffers_[i].value.shape())
      throw Error("buffer mismatch at " + buffers_[i].name);

  for (std::size_t i = 0; i < entries_.size(); ++i) {
    entries_[i].var.mutable_value() = state.params[i].value;
    entries_[i].var.clear_grad();
    entries_[i].adam_m = state.moments_m[i].value;
    entries_[i].adam_v = state.moments_v[i].value;
  }
  for (std::size_t i = 0; i < buffers_.size(); ++i) buffers_[i].value = state.buffers[i].value;
  step_count_ = state.step_count;
}

struct AdamAccess {
  static std::uint64_t& steps(ParamStore& s) { return s.step_count_; }
};

void adam_step(ParamStore& store, const AdamOptions& options) {
  for (const auto& e : store.entries())
    if (!e.var.has_grad()) throw Error("adam_step: parameter has no gradient: " + e.name);

  const std::uint64_t t = AdamAccess::steps(store) + 1;
  const simd::AdamCoefficients coeff{
      static_cast<float>(options.lr),
      static_cast<float>(options.beta1),
      static_cast<float>(options.beta2),
      static_cast<float>(options.eps),
      static_cast<float>(1.0 - std::pow(options.beta1, static_cast<double>(t))),
      static_cast<float>(1.0 - std::pow(options.beta2, static_cast<double>(t))),
  };
  const auto& kernels = simd::active();
  for (auto& e : store.entries()) {
    auto& value = e.var.mutable_value();
    kernels.adam_update(value.size(), value.data().data(), e.adam_m.data().data(), e.adam_v.data().data(),
                        e.var.grad().data().data(), coeff);
    e.var.clear_grad();
  }
  AdamAccess::steps(store) = t;
}

}  // namespace crossgen::tensor
