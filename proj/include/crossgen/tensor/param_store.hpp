#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "crossgen/tensor/autodiff.hpp"

namespace crossgen::tensor {

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Serializable image of a ParamStore.
struct StoreState {
  std::uint64_t step_count = 0;
  std::vector<NamedTensor> params;
  std::vector<NamedTensor> moments_m;
  std::vector<NamedTensor> moments_v;
  std::vector<NamedTensor> buffers;
};

// Named trainable parameters (insertion-ordered) with their Adam moment
// buffers, plus non-trainable buffers such as batch-norm running
// statistics.
class ParamStore {
 public:
  Var& add(const std::string& name, Tensor init);
  Tensor& add_buffer(const std::string& name, Tensor init);

  Var& param(const std::string& name);
  Tensor& buffer(const std::string& name);

  std::size_t size() const { return entries_.size(); }
  std::size_t parameter_count() const;

  struct Entry {
    std::string name;
    Var var;
    Tensor adam_m;
    Tensor adam_v;
  };
  std::deque<Entry>& entries() { return entries_; }
  const std::deque<Entry>& entries() const { return entries_; }

  // Allocates (or resets) every parameter gradient to zero.
  void zero_grad();

  std::uint64_t step_count() const { return step_count_; }

  StoreState export_state() const;
  // Names and shapes must match this store exactly.
  void import_state(const StoreState& state);

 private:
  friend struct AdamAccess;
  std::deque<Entry> entries_;
  std::map<std::string, std::size_t> index_;
  std::deque<NamedTensor> buffers_;  // stable references for models
  std::uint64_t step_count_ = 0;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update over every parameter. Each parameter must
// hold a gradient (NumericError/Error otherwise); gradients are released
// afterwards and step_count advances by one.
void adam_step(ParamStore& store, const AdamOptions& options);

}  // namespace crossgen::tensor
