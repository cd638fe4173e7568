#pragma once

// DeCoNASNet over an ENAS-style shared weight bank.
//
// Every (dnb, node, source, op) edge owns a kernel allocated up front, so a
// sampled child network is a view selecting a subset of the bank. Concat-
// then-conv stages are evaluated as per-source sums of kernel slices; by
// linearity over channel blocks this is identical and lets architectures
// with different fan-in share storage.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deconas/arch_space.hpp"
#include "deconas/nc/param_store.hpp"
#include "deconas/nc/tensor.hpp"

namespace deconas {

/// Parameter names used inside the bank. DNB index d and node index m are
/// 1-based, sources j are 0-based.
namespace bank_keys {
std::string sfe_weight(int layer);  // layer 1 or 2
std::string sfe_bias(int layer);
std::string adapter_weight(int dnb, int source);
std::string adapter_bias(int dnb);
/// Full 3x3 kernel of a conv or dilated edge.
std::string edge_weight(int dnb, int node, int source, int op);
/// Depthwise and pointwise halves of a separable edge.
std::string edge_depthwise(int dnb, int node, int source, int op);
std::string edge_pointwise(int dnb, int node, int source, int op);
std::string op_bias(int dnb, int node, int op);
std::string attention_reduce_weight(int dnb, int node);
std::string attention_reduce_bias(int dnb, int node);
std::string attention_restore_weight(int dnb, int node);
std::string attention_restore_bias(int dnb, int node);
std::string local_fusion_weight(int dnb, int source);
std::string local_fusion_bias(int dnb);
std::string global_fusion_weight(int source);
std::string global_fusion_bias();
std::string global_conv_weight();
std::string global_conv_bias();
std::string upsample_weight();
std::string upsample_bias();
std::string output_weight();
std::string output_bias();
}  // namespace bank_keys

class SharedWeightBank {
 public:
  /// Allocates every key of the space with variance-scaled weights and
  /// zero biases.
  SharedWeightBank(SearchSpaceConfig config, std::uint64_t seed, double init_scale = 0.02);

  [[nodiscard]] const SearchSpaceConfig& config() const { return config_; }
  [[nodiscard]] nc::ParamStore& store() { return store_; }
  [[nodiscard]] const nc::ParamStore& store() const { return store_; }
  [[nodiscard]] const nc::Tensor& param(const std::string& key) const { return store_.get(key); }

 private:
  void allocate(const std::string& key, nc::Shape shape, int fan_in, bool is_bias);

  SearchSpaceConfig config_;
  nc::ParamStore store_;
  Rng rng_;
  double init_scale_;
};

/// The keys architecture `arch` reads, in evaluation order.
std::vector<std::string> active_keys(const ArchitectureSequence& arch,
                                     const SearchSpaceConfig& config);

class ChildNetwork {
 public:
  [[nodiscard]] const ArchitectureSequence& arch() const { return arch_; }
  [[nodiscard]] const SearchSpaceConfig& config() const { return bank_->config(); }
  [[nodiscard]] const SharedWeightBank& bank() const { return *bank_; }
  [[nodiscard]] const std::vector<std::string>& active_keys() const { return active_keys_; }
  /// Values allocated in the bank under the active keys.
  [[nodiscard]] std::int64_t active_value_count() const;

  /// (B, 3, h, w) -> (B, 3, h*s, w*s). Throws ShapeError on other channel
  /// counts.
  [[nodiscard]] nc::Tensor forward(const nc::Tensor& lr_image) const;

 private:
  friend ChildNetwork build(const ArchitectureSequence&, const SearchSpaceConfig&,
                            const SharedWeightBank&);
  ChildNetwork(const SharedWeightBank& bank, ArchitectureSequence arch,
               std::vector<std::string> keys)
      : bank_(&bank), arch_(std::move(arch)), active_keys_(std::move(keys)) {}

  const SharedWeightBank* bank_;
  ArchitectureSequence arch_;
  std::vector<std::string> active_keys_;
};

/// Throws ValidationError for an invalid arch, BankError when the bank was
/// allocated for a different space.
ChildNetwork build(const ArchitectureSequence& arch, const SearchSpaceConfig& config,
                   const SharedWeightBank& bank);

/// Output of one mix node. `inputs` holds F_{d,0} .. F_{d,node-1}. An all-zero node returns
/// inputs.back() itself.
nc::Tensor mix_node_forward(std::span<const nc::Tensor> inputs, int node,
                            const ArchitectureSequence& arch,
                            const SharedWeightBank& bank, int dnb);

/// Squeeze-and-excitation style rescaling owned by (dnb, node).
nc::Tensor channel_attention(const nc::Tensor& x, const SharedWeightBank& bank,
                             int dnb, int node);

/// Gated 1x1 fusion of F_{d,0} .. F_{d,M}: gate i admits F_{d,i} for
/// i < M, F_{d,M} always enters. Adds F_{d,0} when local_residual is on.
nc::Tensor local_fusion(const nc::Tensor& dnb_input,
                        std::span<const nc::Tensor> node_outputs,
                        std::span<const std::uint8_t> gates,
                        const SharedWeightBank& bank, int dnb);

/// Gated 1x1 fusion of F_0 .. F_N (F_N unconditional), then 3x3.
nc::Tensor global_fusion(std::span<const nc::Tensor> features,
                         std::span<const std::uint8_t> gates,
                         const SharedWeightBank& bank);

}  // namespace deconas
