#pragma once

#include "imt/math/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace imt {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;  // first moment
  Tensor v;  // second moment
};

/// Named trainable tensors with gradient accumulators and Adam moments.
///
/// Parameters keep their insertion order; index lookups are stable across
/// copies, so owners may cache indices instead of pointers.
class ParamStore {
 public:
  std::size_t add(std::string name, std::vector<std::size_t> shape);

  Parameter& at(std::size_t index) { return params_.at(index); }
  const Parameter& at(std::size_t index) const { return params_.at(index); }
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  bool contains(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t value_count() const;

  std::int64_t step() const { return step_; }
  void advance_step() { ++step_; }

  void zero_grad();
  void reset_optimizer();
  void init_uniform(double range, std::uint64_t seed);
  double grad_norm() const;
  void scale_grad(double factor);
  bool all_finite() const;

  /// True when names, shapes and values match exactly (optimizer state ignored).
  bool same_values(const ParamStore& other) const;

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
  std::int64_t step_ = 0;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update over every parameter, then zeroes gradients.
///
/// When `only` is given, parameters outside that list keep their values and
/// moments; their gradients are still cleared.
void adam_step(ParamStore& store, double learning_rate, const AdamOptions& options = {},
               const std::vector<std::string>* only = nullptr);

// Binary checkpoint: magic, version, metadata blob (JSON text chosen by the
// caller), step counter, then (name, shape, value, m, v) per parameter.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store,
                     const std::string& metadata);
ParamStore load_checkpoint(const std::filesystem::path& path, std::string* metadata = nullptr);

}  // namespace imt
