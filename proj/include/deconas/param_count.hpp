#pragma once

// Closed-form parameter counts for DeCoNASNet and the complexity penalty
// cb(c) = n_m / n_cm.

#include <cstdint>
#include <vector>

#include "deconas/arch_space.hpp"

namespace deconas {

struct ParamBreakdown {
  std::int64_t sfenet = 0;
  /// Per DNB: active edge kernels plus one bias per active (node, op).
  std::vector<std::int64_t> dnb_edges;
  std::int64_t channel_attention = 0;
  std::int64_t local_fusion = 0;
  std::int64_t input_adapters = 0;  // the H_1 1x1 convs
  std::int64_t global_fusion = 0;   // 1x1 fusion plus the trailing 3x3
  std::int64_t upnet = 0;
  std::int64_t total = 0;

  [[nodiscard]] std::int64_t component_sum() const;
};

/// Squeeze ratio r of channel attention: 16 at G >= 16, 4 below.
int channel_attention_reduction(int feature_channels);
/// Bottleneck width max(1, G / r).
int channel_attention_width(int feature_channels);

/// Weights plus one bias per output channel.
constexpr std::int64_t conv_param_count(std::int64_t in, std::int64_t out, std::int64_t kernel) {
  return in * out * kernel * kernel + out;
}

/// Kernel values of one G->G edge for `op`, excluding the shared bias.
std::int64_t edge_kernel_count(OpKind op, int feature_channels);

/// n_m. Throws ValidationError on an invalid architecture.
ParamBreakdown count_params(const ArchitectureSequence& arch,
                            const SearchSpaceConfig& config);

/// n_cm, the count of the all-ones architecture.
std::int64_t max_params(const SearchSpaceConfig& config);

/// cb(c) in (0, 1].
double complexity_penalty(const ArchitectureSequence& arch,
                          const SearchSpaceConfig& config);

}  // namespace deconas
