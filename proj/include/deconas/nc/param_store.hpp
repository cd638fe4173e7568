#pragma once

// Named parameter tensors with per-parameter Adam state.

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "deconas/nc/tensor.hpp"
#include "deconas/rng.hpp"

namespace deconas::nc {

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step = 0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Parameter name -> gradient values; only touched parameters appear.
using GradientMap = std::map<std::string, std::vector<double>>;

class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor param;
    AdamState adam;
  };

  /// Throws ValidationError on a duplicate name or a size mismatch.
  const Tensor& add(const std::string& name, Shape shape, std::vector<double> values);

  [[nodiscard]] bool contains(const std::string& name) const;
  /// Throws std::out_of_range for unknown names.
  [[nodiscard]] const Tensor& get(const std::string& name) const;
  [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }
  [[nodiscard]] std::vector<Entry>& entries() { return entries_; }
  [[nodiscard]] Entry& entry(const std::string& name);
  [[nodiscard]] const Entry& entry(const std::string& name) const;
  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] std::size_t total_values() const;

  /// Snapshot of accumulated gradients of parameters that received one.
  [[nodiscard]] GradientMap gradients() const;
  void zero_grad();

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Bias-corrected Adam on the parameters named in `gradients`; others keep
/// their values, moments and step counts. Throws GradientError for unknown
/// names or mismatched sizes.
void adam_step(ParamStore& store, const GradientMap& gradients, const AdamConfig& config);

/// Like adam_step, but every parameter of the store must have a gradient.
void adam_step_all(ParamStore& store, const GradientMap& gradients, const AdamConfig& config);

/// Elementwise a += factor * b over matching names; names missing in `a`
/// are inserted.
void accumulate(GradientMap& a, const GradientMap& b, double factor = 1.0);

/// Normal values with std sqrt(scale / fan_in).
std::vector<double> variance_scaled(Rng& rng, std::size_t count, int fan_in, double scale);

}  // namespace deconas::nc
