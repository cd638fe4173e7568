#include "deconas/param_count.hpp"

#include <algorithm>
#include <numeric>

namespace deconas {

std::int64_t ParamBreakdown::component_sum() const {
  return sfenet + std::accumulate(dnb_edges.begin(), dnb_edges.end(), std::int64_t{0}) +
         channel_attention + local_fusion + input_adapters + global_fusion + upnet;
}

int channel_attention_reduction(int feature_channels) {
  return feature_channels >= 16 ? 16 : 4;
}

int channel_attention_width(int feature_channels) {
  return std::max(1, feature_channels / channel_attention_reduction(feature_channels));
}

std::int64_t edge_kernel_count(OpKind op, int feature_channels) {
  const std::int64_t g = feature_channels;
  switch (op) {
    case OpKind::kConv3x3:
    case OpKind::kDilated3x3:
      return 9 * g * g;
    case OpKind::kSeparable3x3:
      return 9 * g + g * g;
  }
  return 0;
}

ParamBreakdown count_params(const ArchitectureSequence& arch, const SearchSpaceConfig& config) {
  config.check();
  require_valid(arch, config);
  const std::int64_t g = config.feature_channels;
  const std::int64_t s = config.scale;
  const int m_nodes = config.mix_nodes;
  const int k_ops = config.num_ops;

  ParamBreakdown out;
  out.sfenet = conv_param_count(3, g, 3) + conv_param_count(g, g, 3);

  // Every DNB shares the searched structure but owns its weights.
  std::int64_t per_dnb_edges = 0;
  int attended_nodes = 0;
  for (int m = 1; m <= m_nodes; ++m) {
    bool node_active = false;
    for (int k = 0; k < k_ops; ++k) {
      bool op_active = false;
      for (int j = 0; j < m; ++j) {
        if (arch.mix_bits[mix_bit_index(m, j, k, k_ops)]) {
          per_dnb_edges += edge_kernel_count(config.op_list[static_cast<std::size_t>(k)], config.feature_channels);
          op_active = true;
        }
      }
      if (op_active) per_dnb_edges += g;
      node_active = node_active || op_active;
    }
    if (node_active) ++attended_nodes;
  }
  out.dnb_edges.assign(static_cast<std::size_t>(config.num_blocks), per_dnb_edges);

  const std::int64_t ca_width = channel_attention_width(config.feature_channels);
  const std::int64_t ca_params = g * ca_width + ca_width + ca_width * g + g;
  out.channel_attention = config.num_blocks * attended_nodes * ca_params;

  const auto local_sources = 1 + std::count(arch.local_fusion.begin(), arch.local_fusion.end(), 1);
  out.local_fusion = config.num_blocks * (local_sources * g * g + g);

  for (int d = 1; d <= config.num_blocks; ++d) out.input_adapters += d * g * g + g;

  const auto global_sources = 1 + std::count(arch.global_fusion.begin(), arch.global_fusion.end(), 1);
  out.global_fusion = global_sources * g * g + g + conv_param_count(g, g, 3);

  out.upnet = conv_param_count(g, g * s * s, 3) + conv_param_count(g, 3, 3);

  out.total = out.component_sum();
  return out;
}

std::int64_t max_params(const SearchSpaceConfig& config) {
  return count_params(all_ones_architecture(config), config).total;
}

double complexity_penalty(const ArchitectureSequence& arch, const SearchSpaceConfig& config) {
  return static_cast<double>(count_params(arch, config).total) /
         static_cast<double>(max_params(config));
}

}  // namespace deconas
