#pragma once

// Shared test helpers: random tensors, a central-difference gradient
// checker and concat-then-conv reference implementations of the gated
// stages.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "deconas/child_net.hpp"
#include "deconas/nc/ops.hpp"
#include "deconas/nc/tensor.hpp"
#include "deconas/rng.hpp"

namespace deconas::testing {

using nc::Shape;
using nc::Tensor;
using nc::shape_numel;

inline std::vector<double> random_values(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * uniform01(rng);
  return v;
}

inline Tensor random_param(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  const auto n = nc::shape_numel(shape);
  return Tensor::parameter(std::move(shape), random_values(rng, n, lo, hi));
}

inline int random_int(Rng& rng, int lo, int hi) {
  return lo + std::min(hi - lo, static_cast<int>(uniform01(rng) * (hi - lo + 1)));
}

/// Relative error between the analytic gradient a and the central-difference
/// gradient n of sum(f(inputs) * R) for a fixed random R, maximized over the
/// inputs. Each input's error is ||a - n|| / max(||a||, ||n||, 1e-3 ||A||),
/// where A is the analytic gradient of all inputs together; the floor keeps
/// round-off on inputs with near-zero gradients from posing as an error.
inline double gradient_error(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                             const std::vector<Tensor>& inputs, Rng& rng, double h = 1e-5) {
  const Tensor probe_out = [&] {
    nc::NoGradGuard guard;
    return f(inputs);
  }();
  const Tensor weights = Tensor::constant(probe_out.shape(), random_values(rng, probe_out.numel()));
  auto objective = [&] { return nc::sum(nc::mul(f(inputs), weights)); };

  for (const auto& x : inputs) x.zero_grad();
  nc::backward(objective());

  struct Norms {
    double diff = 0.0, analytic = 0.0, numeric = 0.0;
  };
  std::vector<Norms> norms;
  double total = 0.0;
  for (const auto& x : inputs) {
    std::vector<double> analytic(x.numel(), 0.0);
    if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());
    auto values = x.mutable_values();
    Norms n;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      nc::NoGradGuard guard;
      values[i] = saved + h;
      const double up = objective().item();
      values[i] = saved - h;
      const double down = objective().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      n.diff += (analytic[i] - numeric) * (analytic[i] - numeric);
      n.analytic += analytic[i] * analytic[i];
      n.numeric += numeric * numeric;
    }
    total += n.analytic;
    norms.push_back(n);
  }
  for (const auto& x : inputs) x.zero_grad();

  const double floor = 1e-3 * std::sqrt(total);
  double worst = 0.0;
  for (const auto& n : norms) {
    const double scale = std::max({std::sqrt(n.analytic), std::sqrt(n.numeric), floor});
    if (scale < 1e-12) continue;
    worst = std::max(worst, std::sqrt(n.diff) / scale);
  }
  return worst;
}

/// Stacks kernels (Cout, Cin_i, k, k) along the input-channel axis.
inline Tensor concat_kernels(const std::vector<Tensor>& kernels) {
  const int cout = kernels.front().dim(0);
  const int k = kernels.front().dim(2);
  int cin = 0;
  for (const auto& w : kernels) cin += w.dim(1);
  std::vector<double> out(static_cast<std::size_t>(cout) * cin * k * k);
  const std::size_t tap = static_cast<std::size_t>(k) * k;
  int offset = 0;
  for (const auto& w : kernels) {
    const int ci = w.dim(1);
    for (int co = 0; co < cout; ++co)
      for (int c = 0; c < ci; ++c)
        for (std::size_t t = 0; t < tap; ++t)
          out[(static_cast<std::size_t>(co) * cin + offset + c) * tap + t] =
              w.values()[(static_cast<std::size_t>(co) * ci + c) * tap + t];
    offset += ci;
  }
  return Tensor::constant({cout, cin, k, k}, std::move(out));
}

/// Stacks depthwise kernels (C_i, 1, k, k) along the channel axis.
inline Tensor concat_depthwise(const std::vector<Tensor>& kernels) {
  std::vector<double> out;
  int channels = 0;
  for (const auto& w : kernels) {
    out.insert(out.end(), w.values().begin(), w.values().end());
    channels += w.dim(0);
  }
  const int k = kernels.front().dim(2);
  return Tensor::constant({channels, 1, k, k}, std::move(out));
}

/// A mix node evaluated the textbook way: for every active op one
/// convolution over the concatenation of its selected inputs.
inline Tensor concat_mix_node(const std::vector<Tensor>& inputs, int node, const ArchitectureSequence& arch,
                              const SharedWeightBank& bank, int dnb) {
  const auto& cfg = bank.config();
  namespace keys = bank_keys;
  if (is_identity_node(arch, cfg, node)) return inputs.back();
  std::vector<Tensor> per_op;
  for (int k = 0; k < cfg.num_ops; ++k) {
    std::vector<Tensor> selected, kernels, depthwise, pointwise;
    for (int j = 0; j < node; ++j) {
      if (!arch.mix_bits[mix_bit_index(node, j, k, cfg.num_ops)]) continue;
      selected.push_back(inputs[static_cast<std::size_t>(j)]);
      if (cfg.op_list[static_cast<std::size_t>(k)] == OpKind::kSeparable3x3) {
        depthwise.push_back(bank.param(keys::edge_depthwise(dnb, node, j, k)));
        pointwise.push_back(bank.param(keys::edge_pointwise(dnb, node, j, k)));
      } else {
        kernels.push_back(bank.param(keys::edge_weight(dnb, node, j, k)));
      }
    }
    if (selected.empty()) continue;
    const Tensor stacked = nc::concat_channels(selected);
    const Tensor& bias = bank.param(keys::op_bias(dnb, node, k));
    switch (cfg.op_list[static_cast<std::size_t>(k)]) {
      case OpKind::kConv3x3:
        per_op.push_back(nc::conv2d(stacked, concat_kernels(kernels), bias));
        break;
      case OpKind::kDilated3x3:
        per_op.push_back(nc::conv2d(stacked, concat_kernels(kernels), bias, 3));
        break;
      case OpKind::kSeparable3x3:
        per_op.push_back(nc::conv2d(nc::conv2d(stacked, concat_depthwise(depthwise), std::nullopt, 1, true),
                                    concat_kernels(pointwise), bias));
        break;
    }
  }
  return channel_attention(nc::relu(nc::mean_over(per_op)), bank, dnb, node);
}

/// One 1x1 convolution over the concatenation of the admitted features.
inline Tensor concat_fuse(const std::vector<Tensor>& features, const std::vector<std::string>& weight_keys,
                          const std::string& bias_key, const SharedWeightBank& bank) {
  std::vector<Tensor> kernels;
  for (const auto& key : weight_keys) kernels.push_back(bank.param(key));
  return nc::conv2d(nc::concat_channels(features), concat_kernels(kernels), bank.param(bias_key));
}

/// Largest elementwise |a - b|.
inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  return worst;
}

/// Overwrites every bank value, biases included, with uniform noise so
/// that no ReLU or gate is trivially inactive.
inline void randomize_bank(SharedWeightBank& bank, Rng& rng, double amplitude = 0.3) {
  for (auto& entry : bank.store().entries())
    for (auto& v : entry.param.mutable_values()) v = amplitude * (2.0 * uniform01(rng) - 1.0);
}

/// Positive squeeze biases keep a narrow attention bottleneck out of the
/// ReLU dead zone, where its keys are active yet carry no signal.
inline void open_attention(SharedWeightBank& bank) {
  for (auto& e : bank.store().entries())
    if (e.name.ends_with("ca.reduce.b"))
      for (auto& v : e.param.mutable_values()) v = 2.0;
}

}  // namespace deconas::testing
