#include "deconas/child_net.hpp"

#include <optional>

#include "deconas/errors.hpp"
#include "deconas/nc/ops.hpp"
#include "deconas/param_count.hpp"

namespace deconas {

namespace bank_keys {

namespace {
std::string dnb_prefix(int dnb) { return "dnb" + std::to_string(dnb) + "."; }
std::string node_prefix(int dnb, int node) { return dnb_prefix(dnb) + "node" + std::to_string(node) + "."; }
std::string edge_prefix(int dnb, int node, int source, int op) {
  return node_prefix(dnb, node) + "src" + std::to_string(source) + ".op" + std::to_string(op) + ".";
}
}  // namespace

std::string sfe_weight(int layer) { return "sfe" + std::to_string(layer) + ".w"; }
std::string sfe_bias(int layer) { return "sfe" + std::to_string(layer) + ".b"; }
std::string adapter_weight(int dnb, int source) { return dnb_prefix(dnb) + "adapter.src" + std::to_string(source) + ".w"; }
std::string adapter_bias(int dnb) { return dnb_prefix(dnb) + "adapter.b"; }
std::string edge_weight(int dnb, int node, int source, int op) { return edge_prefix(dnb, node, source, op) + "w"; }
std::string edge_depthwise(int dnb, int node, int source, int op) { return edge_prefix(dnb, node, source, op) + "dw"; }
std::string edge_pointwise(int dnb, int node, int source, int op) { return edge_prefix(dnb, node, source, op) + "pw"; }
std::string op_bias(int dnb, int node, int op) { return node_prefix(dnb, node) + "op" + std::to_string(op) + ".b"; }
std::string attention_reduce_weight(int dnb, int node) { return node_prefix(dnb, node) + "ca.reduce.w"; }
std::string attention_reduce_bias(int dnb, int node) { return node_prefix(dnb, node) + "ca.reduce.b"; }
std::string attention_restore_weight(int dnb, int node) { return node_prefix(dnb, node) + "ca.restore.w"; }
std::string attention_restore_bias(int dnb, int node) { return node_prefix(dnb, node) + "ca.restore.b"; }
std::string local_fusion_weight(int dnb, int source) { return dnb_prefix(dnb) + "lff.src" + std::to_string(source) + ".w"; }
std::string local_fusion_bias(int dnb) { return dnb_prefix(dnb) + "lff.b"; }
std::string global_fusion_weight(int source) { return "gff.src" + std::to_string(source) + ".w"; }
std::string global_fusion_bias() { return "gff.b"; }
std::string global_conv_weight() { return "gff.conv.w"; }
std::string global_conv_bias() { return "gff.conv.b"; }
std::string upsample_weight() { return "up.conv.w"; }
std::string upsample_bias() { return "up.conv.b"; }
std::string output_weight() { return "up.out.w"; }
std::string output_bias() { return "up.out.b"; }

}  // namespace bank_keys

namespace {

namespace keys = bank_keys;
using nc::Tensor;

bool op_active(const ArchitectureSequence& arch, const SearchSpaceConfig& config, int node, int op) {
  for (int j = 0; j < node; ++j) {
    if (arch.mix_bits[mix_bit_index(node, j, op, config.num_ops)]) return true;
  }
  return false;
}

// Sum of per-source 1x1 convolutions plus one shared bias: the block
// decomposition of a 1x1 conv over concatenated sources.
Tensor fuse_1x1(const std::vector<std::pair<Tensor, std::string>>& sources, const Tensor& bias,
                const SharedWeightBank& bank) {
  std::optional<Tensor> acc;
  for (const auto& [feature, key] : sources) {
    Tensor term = acc ? nc::conv2d(feature, bank.param(key)) : nc::conv2d(feature, bank.param(key), bias);
    acc = acc ? nc::add(*acc, term) : term;
  }
  return *acc;
}

// The bias, when given, is applied by the edge's last convolution.
Tensor edge_forward(const Tensor& input, OpKind op, const SharedWeightBank& bank, int dnb, int node,
                    int source, int op_index, const std::optional<Tensor>& bias) {
  switch (op) {
    case OpKind::kConv3x3:
      return nc::conv2d(input, bank.param(keys::edge_weight(dnb, node, source, op_index)), bias);
    case OpKind::kDilated3x3:
      return nc::conv2d(input, bank.param(keys::edge_weight(dnb, node, source, op_index)), bias, 3);
    case OpKind::kSeparable3x3: {
      const Tensor depth = nc::conv2d(input, bank.param(keys::edge_depthwise(dnb, node, source, op_index)),
                                      std::nullopt, 1, true);
      return nc::conv2d(depth, bank.param(keys::edge_pointwise(dnb, node, source, op_index)), bias);
    }
  }
  throw ValidationError("unknown op kind");
}

}  // namespace

SharedWeightBank::SharedWeightBank(SearchSpaceConfig config, std::uint64_t seed, double init_scale)
    : config_(std::move(config)), rng_(seed), init_scale_(init_scale) {
  config_.check();
  const int g = config_.feature_channels;
  const int n_blocks = config_.num_blocks;
  const int m_nodes = config_.mix_nodes;
  const int ca = channel_attention_width(g);

  allocate(keys::sfe_weight(1), {g, 3, 3, 3}, 27, false);
  allocate(keys::sfe_bias(1), {g}, 0, true);
  allocate(keys::sfe_weight(2), {g, g, 3, 3}, 9 * g, false);
  allocate(keys::sfe_bias(2), {g}, 0, true);
  for (int d = 1; d <= n_blocks; ++d) {
    for (int j = 0; j < d; ++j) allocate(keys::adapter_weight(d, j), {g, g, 1, 1}, d * g, false);
    allocate(keys::adapter_bias(d), {g}, 0, true);
    for (int m = 1; m <= m_nodes; ++m) {
      for (int k = 0; k < config_.num_ops; ++k) {
        for (int j = 0; j < m; ++j) {
          switch (config_.op_list[static_cast<std::size_t>(k)]) {
            case OpKind::kConv3x3:
            case OpKind::kDilated3x3:
              allocate(keys::edge_weight(d, m, j, k), {g, g, 3, 3}, 9 * g * m, false);
              break;
            case OpKind::kSeparable3x3:
              allocate(keys::edge_depthwise(d, m, j, k), {g, 1, 3, 3}, 9, false);
              allocate(keys::edge_pointwise(d, m, j, k), {g, g, 1, 1}, g * m, false);
              break;
          }
        }
        allocate(keys::op_bias(d, m, k), {g}, 0, true);
      }
      allocate(keys::attention_reduce_weight(d, m), {ca, g, 1, 1}, g, false);
      allocate(keys::attention_reduce_bias(d, m), {ca}, 0, true);
      allocate(keys::attention_restore_weight(d, m), {g, ca, 1, 1}, ca, false);
      allocate(keys::attention_restore_bias(d, m), {g}, 0, true);
    }
    for (int j = 0; j <= m_nodes; ++j) allocate(keys::local_fusion_weight(d, j), {g, g, 1, 1}, (m_nodes + 1) * g, false);
    allocate(keys::local_fusion_bias(d), {g}, 0, true);
  }
  for (int j = 0; j <= n_blocks; ++j) allocate(keys::global_fusion_weight(j), {g, g, 1, 1}, (n_blocks + 1) * g, false);
  allocate(keys::global_fusion_bias(), {g}, 0, true);
  allocate(keys::global_conv_weight(), {g, g, 3, 3}, 9 * g, false);
  allocate(keys::global_conv_bias(), {g}, 0, true);
  const int s2 = config_.scale * config_.scale;
  allocate(keys::upsample_weight(), {g * s2, g, 3, 3}, 9 * g, false);
  allocate(keys::upsample_bias(), {g * s2}, 0, true);
  allocate(keys::output_weight(), {3, g, 3, 3}, 9 * g, false);
  allocate(keys::output_bias(), {3}, 0, true);
}

void SharedWeightBank::allocate(const std::string& key, nc::Shape shape, int fan_in, bool is_bias) {
  const auto n = nc::shape_numel(shape);
  auto values = is_bias ? std::vector<double>(n, 0.0) : nc::variance_scaled(rng_, n, fan_in, init_scale_);
  store_.add(key, std::move(shape), std::move(values));
}

std::vector<std::string> active_keys(const ArchitectureSequence& arch, const SearchSpaceConfig& config) {
  require_valid(arch, config);
  std::vector<std::string> out;
  out.push_back(keys::sfe_weight(1));
  out.push_back(keys::sfe_bias(1));
  out.push_back(keys::sfe_weight(2));
  out.push_back(keys::sfe_bias(2));
  for (int d = 1; d <= config.num_blocks; ++d) {
    for (int j = 0; j < d; ++j) out.push_back(keys::adapter_weight(d, j));
    out.push_back(keys::adapter_bias(d));
    for (int m = 1; m <= config.mix_nodes; ++m) {
      if (is_identity_node(arch, config, m)) continue;
      for (int k = 0; k < config.num_ops; ++k) {
        if (!op_active(arch, config, m, k)) continue;
        for (int j = 0; j < m; ++j) {
          if (!arch.mix_bits[mix_bit_index(m, j, k, config.num_ops)]) continue;
          if (config.op_list[static_cast<std::size_t>(k)] == OpKind::kSeparable3x3) {
            out.push_back(keys::edge_depthwise(d, m, j, k));
            out.push_back(keys::edge_pointwise(d, m, j, k));
          } else {
            out.push_back(keys::edge_weight(d, m, j, k));
          }
        }
        out.push_back(keys::op_bias(d, m, k));
      }
      out.push_back(keys::attention_reduce_weight(d, m));
      out.push_back(keys::attention_reduce_bias(d, m));
      out.push_back(keys::attention_restore_weight(d, m));
      out.push_back(keys::attention_restore_bias(d, m));
    }
    for (int j = 0; j < config.mix_nodes; ++j) {
      if (arch.local_fusion[static_cast<std::size_t>(j)]) out.push_back(keys::local_fusion_weight(d, j));
    }
    out.push_back(keys::local_fusion_weight(d, config.mix_nodes));
    out.push_back(keys::local_fusion_bias(d));
  }
  for (int j = 0; j < config.num_blocks; ++j) {
    if (arch.global_fusion[static_cast<std::size_t>(j)]) out.push_back(keys::global_fusion_weight(j));
  }
  out.push_back(keys::global_fusion_weight(config.num_blocks));
  out.push_back(keys::global_fusion_bias());
  out.push_back(keys::global_conv_weight());
  out.push_back(keys::global_conv_bias());
  out.push_back(keys::upsample_weight());
  out.push_back(keys::upsample_bias());
  out.push_back(keys::output_weight());
  out.push_back(keys::output_bias());
  return out;
}

ChildNetwork build(const ArchitectureSequence& arch, const SearchSpaceConfig& config,
                   const SharedWeightBank& bank) {
  config.check();
  if (!(bank.config() == config)) throw BankError("weight bank was allocated for a different search space");
  return ChildNetwork(bank, arch, active_keys(arch, config));
}

std::int64_t ChildNetwork::active_value_count() const {
  std::int64_t total = 0;
  for (const auto& key : active_keys_) total += static_cast<std::int64_t>(bank_->param(key).numel());
  return total;
}

Tensor channel_attention(const Tensor& x, const SharedWeightBank& bank, int dnb, int node) {
  const Tensor pooled = nc::global_avg_pool(x);
  const Tensor squeezed = nc::relu(nc::conv2d(pooled, bank.param(keys::attention_reduce_weight(dnb, node)),
                                              bank.param(keys::attention_reduce_bias(dnb, node))));
  const Tensor weights = nc::sigmoid(nc::conv2d(squeezed, bank.param(keys::attention_restore_weight(dnb, node)),
                                                bank.param(keys::attention_restore_bias(dnb, node))));
  return nc::scale_channels(x, weights);
}

Tensor mix_node_forward(std::span<const Tensor> inputs, int node, const ArchitectureSequence& arch,
                        const SharedWeightBank& bank, int dnb) {
  const auto& config = bank.config();
  if (static_cast<int>(inputs.size()) != node) {
    throw ShapeError("mix node " + std::to_string(node) + " needs " + std::to_string(node) + " inputs, got " +
                     std::to_string(inputs.size()));
  }
  if (is_identity_node(arch, config, node)) return inputs.back();

  std::vector<Tensor> per_op;
  for (int k = 0; k < config.num_ops; ++k) {
    const OpKind op = config.op_list[static_cast<std::size_t>(k)];
    std::optional<Tensor> acc;
    for (int j = 0; j < node; ++j) {
      if (!arch.mix_bits[mix_bit_index(node, j, k, config.num_ops)]) continue;
      // One bias per (node, op), carried by the first selected edge.
      const auto bias = acc ? std::nullopt : std::optional<Tensor>(bank.param(keys::op_bias(dnb, node, k)));
      Tensor term = edge_forward(inputs[static_cast<std::size_t>(j)], op, bank, dnb, node, j, k, bias);
      acc = acc ? nc::add(*acc, term) : term;
    }
    if (acc) per_op.push_back(*acc);
  }
  return channel_attention(nc::relu(nc::mean_over(per_op)), bank, dnb, node);
}

Tensor local_fusion(const Tensor& dnb_input, std::span<const Tensor> node_outputs,
                    std::span<const std::uint8_t> gates, const SharedWeightBank& bank, int dnb) {
  const auto& config = bank.config();
  const auto m_nodes = static_cast<std::size_t>(config.mix_nodes);
  if (node_outputs.size() != m_nodes || gates.size() != m_nodes) {
    throw ShapeError("local fusion expects " + std::to_string(m_nodes) + " node outputs and gates");
  }
  std::vector<std::pair<Tensor, std::string>> sources;
  for (std::size_t i = 0; i < m_nodes; ++i) {
    if (!gates[i]) continue;
    const Tensor& feature = i == 0 ? dnb_input : node_outputs[i - 1];
    sources.emplace_back(feature, keys::local_fusion_weight(dnb, static_cast<int>(i)));
  }
  sources.emplace_back(node_outputs.back(), keys::local_fusion_weight(dnb, config.mix_nodes));
  Tensor fused = fuse_1x1(sources, bank.param(keys::local_fusion_bias(dnb)), bank);
  return config.local_residual ? nc::add(fused, dnb_input) : fused;
}

Tensor global_fusion(std::span<const Tensor> features, std::span<const std::uint8_t> gates,
                     const SharedWeightBank& bank) {
  const auto& config = bank.config();
  const auto n_blocks = static_cast<std::size_t>(config.num_blocks);
  if (features.size() != n_blocks + 1 || gates.size() != n_blocks) {
    throw ShapeError("global fusion expects N+1 features and N gates");
  }
  std::vector<std::pair<Tensor, std::string>> sources;
  for (std::size_t i = 0; i < n_blocks; ++i) {
    if (gates[i]) sources.emplace_back(features[i], keys::global_fusion_weight(static_cast<int>(i)));
  }
  sources.emplace_back(features.back(), keys::global_fusion_weight(config.num_blocks));
  const Tensor fused = fuse_1x1(sources, bank.param(keys::global_fusion_bias()), bank);
  return nc::conv2d(fused, bank.param(keys::global_conv_weight()), bank.param(keys::global_conv_bias()));
}

Tensor ChildNetwork::forward(const Tensor& lr_image) const {
  const auto& cfg = config();
  if (lr_image.rank() != 4 || lr_image.dim(1) != 3) {
    throw ShapeError("child network expects (B, 3, h, w) input, got " + nc::shape_string(lr_image.shape()));
  }
  const SharedWeightBank& bank = *bank_;
  const Tensor shallow = nc::conv2d(lr_image, bank.param(keys::sfe_weight(1)), bank.param(keys::sfe_bias(1)));
  std::vector<Tensor> features{
      nc::conv2d(shallow, bank.param(keys::sfe_weight(2)), bank.param(keys::sfe_bias(2)))};

  for (int d = 1; d <= cfg.num_blocks; ++d) {
    std::vector<std::pair<Tensor, std::string>> adapter_sources;
    for (int j = 0; j < d; ++j) adapter_sources.emplace_back(features[static_cast<std::size_t>(j)], keys::adapter_weight(d, j));
    const Tensor block_input = fuse_1x1(adapter_sources, bank.param(keys::adapter_bias(d)), bank);

    std::vector<Tensor> nodes{block_input};
    for (int m = 1; m <= cfg.mix_nodes; ++m) nodes.push_back(mix_node_forward(nodes, m, arch_, bank, d));
    features.push_back(local_fusion(block_input, std::span<const Tensor>(nodes).subspan(1), arch_.local_fusion, bank, d));
  }

  const Tensor fused = nc::add(global_fusion(features, arch_.global_fusion, bank), shallow);
  const Tensor expanded = nc::conv2d(fused, bank.param(keys::upsample_weight()), bank.param(keys::upsample_bias()));
  const Tensor shuffled = nc::pixel_shuffle(expanded, cfg.scale);
  return nc::conv2d(shuffled, bank.param(keys::output_weight()), bank.param(keys::output_bias()));
}

}  // namespace deconas
