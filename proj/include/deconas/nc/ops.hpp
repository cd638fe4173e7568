#pragma once

// Differentiable primitives. Image tensors are (batch, channels, height,
// width); dense tensors are (rows, cols).

#include <cstdint>
#include <optional>
#include <span>
#include <utility>

#include "deconas/nc/tensor.hpp"

namespace deconas::nc {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

/// Sum of all elements, shape {1}.
Tensor sum(const Tensor& x);

/// Cross-correlation with "same" zero padding of dilation*(k-1)/2.
///
/// Standard kernels are (Cout, Cin, k, k); depthwise kernels are (C, 1, k, k)
/// and require Cin == C. `bias`, when given, has Cout entries.
Tensor conv2d(const Tensor& input, const Tensor& kernel,
              const std::optional<Tensor>& bias = std::nullopt,
              int dilation = 1, bool depthwise = false);

/// (B, C*r*r, H, W) -> (B, C, H*r, W*r).
Tensor pixel_shuffle(const Tensor& input, int r);

/// (B, C, H, W) -> (B, C, 1, 1).
Tensor global_avg_pool(const Tensor& x);

/// x * s with s of shape (B, C, 1, 1) broadcast over H and W.
Tensor scale_channels(const Tensor& x, const Tensor& s);

Tensor concat_channels(std::span<const Tensor> parts);

/// Elementwise mean of equally shaped tensors.
Tensor mean_over(std::span<const Tensor> parts);

/// Mean absolute error, shape {1}.
Tensor l1_loss(const Tensor& prediction, const Tensor& target);

/// x (B, in) . W^T (out, in) + b (out) -> (B, out).
Tensor linear(const Tensor& x, const Tensor& weight,
              const std::optional<Tensor>& bias = std::nullopt);

/// Columns [start, start + count) of a (rows, cols) tensor.
Tensor slice_cols(const Tensor& x, int start, int count);

/// Sum of the selected rows of a (V, D) table, shape (1, D).
Tensor embedding_sum(const Tensor& table, std::span<const int> rows);

/// Elementwise log P(bit | logit) for a Bernoulli with p = sigmoid(logit).
Tensor bernoulli_log_prob(const Tensor& logits, std::span<const std::uint8_t> bits);

struct LstmParams {
  Tensor input_weight;   // (4H, in), gate order i, f, g, o
  Tensor hidden_weight;  // (4H, H)
  Tensor bias;           // (4H)
};

/// One LSTM step on (1, in) input with (1, H) hidden and cell states.
std::pair<Tensor, Tensor> lstm_cell(const Tensor& input, const Tensor& hidden,
                                    const Tensor& cell, const LstmParams& params);

}  // namespace deconas::nc
