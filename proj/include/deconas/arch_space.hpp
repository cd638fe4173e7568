#pragma once

// Densely constructed search space: configuration, the bit-level
// architecture genome, its decimal digest, validation and enumeration.

#include <cstdint>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace deconas {

/// Candidate operation on a mix-node edge.
enum class OpKind : std::uint8_t {
  kConv3x3,
  kSeparable3x3,
  kDilated3x3,
};

std::string_view op_name(OpKind op);
/// Inverse of op_name; throws ValidationError on an unknown name.
OpKind parse_op(std::string_view name);
/// [conv3x3, depthwise_separable3x3, dilated3x3_rate3]
std::vector<OpKind> default_op_list();

struct SearchSpaceConfig {
  int num_blocks = 4;         // N, DNB count
  int mix_nodes = 4;          // M, mix nodes per DNB
  int num_ops = 3;            // K, candidate ops per edge
  int feature_channels = 64;  // G
  int scale = 2;
  bool fusion_search = false;
  // Residual addition of the DNB input after local fusion.
  bool local_residual = true;
  std::vector<OpKind> op_list = default_op_list();

  /// M(M+1)/2 controller blocks for mix nodes.
  [[nodiscard]] int mix_blocks() const { return mix_nodes * (mix_nodes + 1) / 2; }
  [[nodiscard]] int mix_bit_count() const { return num_ops * mix_blocks(); }
  /// Total controller decisions T.
  [[nodiscard]] int decision_count() const {
    return mix_bit_count() + (fusion_search ? mix_nodes + num_blocks : 0);
  }

  /// Throws ValidationError when an invariant is broken.
  void check() const;

  bool operator==(const SearchSpaceConfig&) const = default;
};

/// Config whose op_list is the first `num_ops` entries of the default list.
SearchSpaceConfig make_space(int num_blocks, int mix_nodes, int num_ops,
                             int feature_channels, int scale,
                             bool fusion_search);

/// The genome S_c. Bits are stored as 0/1 bytes.
///
/// mix_bits is laid out in controller order: node i = 1..M, source
/// j = 0..i-1, op k = 0..K-1, i.e. index ((i-1)i/2 + j)K + k.
struct ArchitectureSequence {
  std::vector<std::uint8_t> mix_bits;
  std::vector<std::uint8_t> local_fusion;   // S_l^0 .. S_l^{M-1}
  std::vector<std::uint8_t> global_fusion;  // S_g^0 .. S_g^{N-1}

  bool operator==(const ArchitectureSequence&) const = default;
  auto operator<=>(const ArchitectureSequence&) const = default;
};

/// Position of S[node][source][op] inside mix_bits.
constexpr std::size_t mix_bit_index(int node, int source, int op, int num_ops) {
  return static_cast<std::size_t>(((node - 1) * node / 2 + source) * num_ops + op);
}

/// Mix bits zero; fusion gates zero when searched, otherwise forced to one.
ArchitectureSequence all_zero_architecture(const SearchSpaceConfig& config);
ArchitectureSequence all_ones_architecture(const SearchSpaceConfig& config);

/// Expands one decimal digit per controller mix block into K bits, MSB first.
ArchitectureSequence decode_decimal(std::span<const int> digits,
                                    const SearchSpaceConfig& config);
/// Inverse of decode_decimal over the mix bits.
std::vector<int> encode_decimal(const ArchitectureSequence& arch,
                                const SearchSpaceConfig& config);
/// K bits of a single digit, MSB first.
std::vector<std::uint8_t> digit_bits(int digit, int num_ops);

struct ValidationIssue {
  enum class Kind { kLength, kGate, kValue };
  Kind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  [[nodiscard]] bool ok() const { return issues.empty(); }
  [[nodiscard]] bool has(ValidationIssue::Kind kind) const;
  [[nodiscard]] std::string summary() const;
};

ValidationReport validate(const ArchitectureSequence& arch,
                          const SearchSpaceConfig& config);
/// Throws ValidationError carrying the report summary.
void require_valid(const ArchitectureSequence& arch,
                   const SearchSpaceConfig& config);

/// True iff every bit of the node's mix rows is zero; such a node is an identity.
bool is_identity_node(const ArchitectureSequence& arch,
                      const SearchSpaceConfig& config, int node);

/// Flattened controller decisions: mix bits, then (with fusion search)
/// the N global gates and the M local gates.
std::vector<std::uint8_t> flatten_decisions(const ArchitectureSequence& arch,
                                            const SearchSpaceConfig& config);
ArchitectureSequence from_decisions(std::span<const std::uint8_t> bits,
                                    const SearchSpaceConfig& config);

/// Lazily decodes architecture #index of the 2^T enumeration order.
class ArchitectureRange {
 public:
  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = ArchitectureSequence;
    using difference_type = std::ptrdiff_t;

    iterator() = default;
    iterator(const ArchitectureRange* range, std::uint64_t index)
        : range_(range), index_(index) {}
    value_type operator*() const { return range_->at(index_); }
    iterator& operator++() {
      ++index_;
      return *this;
    }
    void operator++(int) { ++index_; }
    bool operator==(const iterator& other) const { return index_ == other.index_; }

   private:
    const ArchitectureRange* range_ = nullptr;
    std::uint64_t index_ = 0;
  };

  explicit ArchitectureRange(SearchSpaceConfig config);

  [[nodiscard]] std::uint64_t size() const { return size_; }
  [[nodiscard]] ArchitectureSequence at(std::uint64_t index) const;
  [[nodiscard]] iterator begin() const { return {this, 0}; }
  [[nodiscard]] iterator end() const { return {this, size_}; }

 private:
  SearchSpaceConfig config_;
  std::uint64_t size_;
};

/// Throws SpaceTooLargeError when 2^T exceeds `limit`.
ArchitectureRange enumerate_space(const SearchSpaceConfig& config,
                                  std::uint64_t limit);

/// Comma separated digits, e.g. "7,6,4".
std::string digits_string(const ArchitectureSequence& arch,
                          const SearchSpaceConfig& config);
/// Bits as a '0'/'1' string.
std::string bits_string(std::span<const std::uint8_t> bits);

}  // namespace deconas
