#include "deconas/nc/param_store.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "deconas/errors.hpp"

namespace deconas::nc {

const Tensor& ParamStore::add(const std::string& name, Shape shape, std::vector<double> values) {
  if (index_.count(name)) throw ValidationError("duplicate parameter '" + name + "'");
  if (shape_numel(shape) != values.size()) throw ValidationError("parameter '" + name + "' size mismatch");
  const std::size_t n = values.size();
  index_.emplace(name, entries_.size());
  entries_.push_back({name, Tensor::parameter(std::move(shape), std::move(values)),
                      {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}});
  return entries_.back().param;
}

bool ParamStore::contains(const std::string& name) const { return index_.count(name) > 0; }

const Tensor& ParamStore::get(const std::string& name) const { return entry(name).param; }

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return entries_[it->second];
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return entries_[it->second];
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.param.numel();
  return n;
}

GradientMap ParamStore::gradients() const {
  GradientMap out;
  for (const auto& e : entries_) {
    if (e.param.has_grad()) out.emplace(e.name, std::vector<double>(e.param.grad().begin(), e.param.grad().end()));
  }
  return out;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.param.zero_grad();
}

void adam_step(ParamStore& store, const GradientMap& gradients, const AdamConfig& config) {
  // Validate everything before mutating anything.
  for (const auto& [name, grad] : gradients) {
    if (!store.contains(name)) throw GradientError("gradient for unknown parameter '" + name + "'");
    if (grad.size() != store.get(name).numel()) throw GradientError("gradient size mismatch for '" + name + "'");
  }
  for (const auto& [name, grad] : gradients) {
    auto& e = store.entry(name);
    auto& st = e.adam;
    ++st.step;
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(st.step));
    auto values = e.param.mutable_values();
    for (std::size_t i = 0; i < grad.size(); ++i) {
      st.first_moment[i] = config.beta1 * st.first_moment[i] + (1.0 - config.beta1) * grad[i];
      st.second_moment[i] = config.beta2 * st.second_moment[i] + (1.0 - config.beta2) * grad[i] * grad[i];
      const double m_hat = st.first_moment[i] / c1;
      const double v_hat = st.second_moment[i] / c2;
      values[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

void adam_step_all(ParamStore& store, const GradientMap& gradients, const AdamConfig& config) {
  for (const auto& e : store.entries()) {
    if (!gradients.count(e.name)) throw GradientError("missing gradient for '" + e.name + "'");
  }
  adam_step(store, gradients, config);
}

void accumulate(GradientMap& a, const GradientMap& b, double factor) {
  for (const auto& [name, grad] : b) {
    auto [it, inserted] = a.try_emplace(name, grad.size(), 0.0);
    if (it->second.size() != grad.size()) throw GradientError("accumulate: size mismatch for '" + name + "'");
    for (std::size_t i = 0; i < grad.size(); ++i) it->second[i] += factor * grad[i];
  }
}

std::vector<double> variance_scaled(Rng& rng, std::size_t count, int fan_in, double scale) {
  const double stddev = std::sqrt(scale / static_cast<double>(std::max(fan_in, 1)));
  std::vector<double> out(count);
  for (auto& v : out) v = stddev * standard_normal(rng);
  return out;
}

}  // namespace deconas::nc
