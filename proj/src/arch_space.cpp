#include "deconas/arch_space.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "deconas/errors.hpp"

namespace deconas {

namespace {

constexpr std::array<std::string_view, 3> kOpNames = {
    "conv3x3", "depthwise_separable3x3", "dilated3x3_rate3"};

void check_digit(int digit, int num_ops) {
  if (digit < 0 || digit >= (1 << num_ops)) {
    throw RangeError("digit " + std::to_string(digit) + " outside [0, " +
                     std::to_string(1 << num_ops) + ")");
  }
}

void add_length_issue(ValidationReport& report, std::string_view what,
                      std::size_t got, std::size_t want) {
  if (got != want) {
    report.issues.push_back(
        {ValidationIssue::Kind::kLength,
         std::string(what) + " has " + std::to_string(got) + " bits, expected " +
             std::to_string(want)});
  }
}

void add_value_issues(ValidationReport& report, std::string_view what,
                      std::span<const std::uint8_t> bits) {
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] > 1) {
      report.issues.push_back({ValidationIssue::Kind::kValue,
                               std::string(what) + "[" + std::to_string(i) +
                                   "] is not binary"});
    }
  }
}

}  // namespace

std::string_view op_name(OpKind op) {
  return kOpNames.at(static_cast<std::size_t>(op));
}

OpKind parse_op(std::string_view name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i) {
    if (kOpNames[i] == name) return static_cast<OpKind>(i);
  }
  throw ValidationError("unknown operation '" + std::string(name) + "'");
}

std::vector<OpKind> default_op_list() {
  return {OpKind::kConv3x3, OpKind::kSeparable3x3, OpKind::kDilated3x3};
}

void SearchSpaceConfig::check() const {
  if (num_blocks < 1) throw ValidationError("num_blocks must be >= 1");
  if (mix_nodes < 1) throw ValidationError("mix_nodes must be >= 1");
  if (num_ops < 1) throw ValidationError("num_ops must be >= 1");
  if (num_ops > 16) throw ValidationError("num_ops must be <= 16");
  if (feature_channels < 1) throw ValidationError("feature_channels must be >= 1");
  if (scale < 1) throw ValidationError("scale must be >= 1");
  if (static_cast<int>(op_list.size()) != num_ops) {
    throw ValidationError("op_list has " + std::to_string(op_list.size()) +
                          " entries but num_ops is " + std::to_string(num_ops));
  }
}

SearchSpaceConfig make_space(int num_blocks, int mix_nodes, int num_ops,
                             int feature_channels, int scale,
                             bool fusion_search) {
  SearchSpaceConfig config;
  config.num_blocks = num_blocks;
  config.mix_nodes = mix_nodes;
  config.num_ops = num_ops;
  config.feature_channels = feature_channels;
  config.scale = scale;
  config.fusion_search = fusion_search;
  auto ops = default_op_list();
  if (num_ops < 1 || num_ops > static_cast<int>(ops.size())) {
    throw ValidationError("make_space supports 1..3 ops; pass an explicit op_list");
  }
  ops.resize(static_cast<std::size_t>(num_ops));
  config.op_list = std::move(ops);
  config.check();
  return config;
}

ArchitectureSequence all_zero_architecture(const SearchSpaceConfig& config) {
  const std::uint8_t gate = config.fusion_search ? 0 : 1;
  return {std::vector<std::uint8_t>(static_cast<std::size_t>(config.mix_bit_count()), 0),
          std::vector<std::uint8_t>(static_cast<std::size_t>(config.mix_nodes), gate),
          std::vector<std::uint8_t>(static_cast<std::size_t>(config.num_blocks), gate)};
}

ArchitectureSequence all_ones_architecture(const SearchSpaceConfig& config) {
  return {std::vector<std::uint8_t>(static_cast<std::size_t>(config.mix_bit_count()), 1),
          std::vector<std::uint8_t>(static_cast<std::size_t>(config.mix_nodes), 1),
          std::vector<std::uint8_t>(static_cast<std::size_t>(config.num_blocks), 1)};
}

std::vector<std::uint8_t> digit_bits(int digit, int num_ops) {
  check_digit(digit, num_ops);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(num_ops));
  for (int k = 0; k < num_ops; ++k) {
    bits[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>((digit >> (num_ops - 1 - k)) & 1);
  }
  return bits;
}

ArchitectureSequence decode_decimal(std::span<const int> digits,
                                    const SearchSpaceConfig& config) {
  config.check();
  if (static_cast<int>(digits.size()) != config.mix_blocks()) {
    throw LengthError("expected " + std::to_string(config.mix_blocks()) +
                      " digits for M=" + std::to_string(config.mix_nodes) +
                      ", got " + std::to_string(digits.size()));
  }
  ArchitectureSequence arch = all_ones_architecture(config);
  const auto k_ops = static_cast<std::size_t>(config.num_ops);
  for (std::size_t block = 0; block < digits.size(); ++block) {
    const auto bits = digit_bits(digits[block], config.num_ops);
    std::copy(bits.begin(), bits.end(), arch.mix_bits.begin() + static_cast<std::ptrdiff_t>(block * k_ops));
  }
  return arch;
}

std::vector<int> encode_decimal(const ArchitectureSequence& arch,
                                const SearchSpaceConfig& config) {
  require_valid(arch, config);
  const auto k_ops = static_cast<std::size_t>(config.num_ops);
  std::vector<int> digits(static_cast<std::size_t>(config.mix_blocks()), 0);
  for (std::size_t block = 0; block < digits.size(); ++block) {
    int value = 0;
    for (std::size_t k = 0; k < k_ops; ++k) value = (value << 1) | arch.mix_bits[block * k_ops + k];
    digits[block] = value;
  }
  return digits;
}

bool ValidationReport::has(ValidationIssue::Kind kind) const {
  return std::any_of(issues.begin(), issues.end(),
                     [kind](const ValidationIssue& issue) { return issue.kind == kind; });
}

std::string ValidationReport::summary() const {
  std::string out;
  for (const auto& issue : issues) {
    if (!out.empty()) out += "; ";
    out += issue.message;
  }
  return out;
}

ValidationReport validate(const ArchitectureSequence& arch,
                          const SearchSpaceConfig& config) {
  ValidationReport report;
  add_length_issue(report, "mix_bits", arch.mix_bits.size(),
                   static_cast<std::size_t>(config.mix_bit_count()));
  add_length_issue(report, "local_fusion", arch.local_fusion.size(),
                   static_cast<std::size_t>(config.mix_nodes));
  add_length_issue(report, "global_fusion", arch.global_fusion.size(),
                   static_cast<std::size_t>(config.num_blocks));
  add_value_issues(report, "mix_bits", arch.mix_bits);
  add_value_issues(report, "local_fusion", arch.local_fusion);
  add_value_issues(report, "global_fusion", arch.global_fusion);
  if (!config.fusion_search) {
    auto gate_off = [](std::span<const std::uint8_t> gates) {
      return std::any_of(gates.begin(), gates.end(), [](std::uint8_t g) { return g != 1; });
    };
    if (gate_off(arch.local_fusion)) {
      report.issues.push_back({ValidationIssue::Kind::kGate,
                               "local_fusion must be all ones without fusion search"});
    }
    if (gate_off(arch.global_fusion)) {
      report.issues.push_back({ValidationIssue::Kind::kGate,
                               "global_fusion must be all ones without fusion search"});
    }
  }
  return report;
}

void require_valid(const ArchitectureSequence& arch, const SearchSpaceConfig& config) {
  const auto report = validate(arch, config);
  if (!report.ok()) throw ValidationError("invalid architecture: " + report.summary());
}

bool is_identity_node(const ArchitectureSequence& arch,
                      const SearchSpaceConfig& config, int node) {
  if (node < 1 || node > config.mix_nodes) {
    throw RangeError("node " + std::to_string(node) + " outside [1, " +
                     std::to_string(config.mix_nodes) + "]");
  }
  const auto first = mix_bit_index(node, 0, 0, config.num_ops);
  const auto last = mix_bit_index(node, node - 1, config.num_ops - 1, config.num_ops);
  if (last >= arch.mix_bits.size()) throw LengthError("mix_bits too short for node");
  return std::all_of(arch.mix_bits.begin() + static_cast<std::ptrdiff_t>(first),
                     arch.mix_bits.begin() + static_cast<std::ptrdiff_t>(last + 1),
                     [](std::uint8_t b) { return b == 0; });
}

std::vector<std::uint8_t> flatten_decisions(const ArchitectureSequence& arch,
                                            const SearchSpaceConfig& config) {
  std::vector<std::uint8_t> bits = arch.mix_bits;
  if (config.fusion_search) {
    bits.insert(bits.end(), arch.global_fusion.begin(), arch.global_fusion.end());
    bits.insert(bits.end(), arch.local_fusion.begin(), arch.local_fusion.end());
  }
  return bits;
}

ArchitectureSequence from_decisions(std::span<const std::uint8_t> bits,
                                    const SearchSpaceConfig& config) {
  if (static_cast<int>(bits.size()) != config.decision_count()) {
    throw LengthError("expected " + std::to_string(config.decision_count()) +
                      " decisions, got " + std::to_string(bits.size()));
  }
  ArchitectureSequence arch = all_ones_architecture(config);
  const auto mix = static_cast<std::size_t>(config.mix_bit_count());
  std::copy_n(bits.begin(), mix, arch.mix_bits.begin());
  if (config.fusion_search) {
    const auto n = static_cast<std::size_t>(config.num_blocks);
    const auto m = static_cast<std::size_t>(config.mix_nodes);
    std::copy_n(bits.begin() + static_cast<std::ptrdiff_t>(mix), n, arch.global_fusion.begin());
    std::copy_n(bits.begin() + static_cast<std::ptrdiff_t>(mix + n), m, arch.local_fusion.begin());
  }
  return arch;
}

ArchitectureRange::ArchitectureRange(SearchSpaceConfig config)
    : config_(std::move(config)), size_(std::uint64_t{1} << config_.decision_count()) {}

ArchitectureSequence ArchitectureRange::at(std::uint64_t index) const {
  const int total = config_.decision_count();
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(total));
  // Most significant decision first, so index order is lexicographic.
  for (int t = 0; t < total; ++t) {
    bits[static_cast<std::size_t>(t)] = static_cast<std::uint8_t>((index >> (total - 1 - t)) & 1);
  }
  return from_decisions(bits, config_);
}

ArchitectureRange enumerate_space(const SearchSpaceConfig& config, std::uint64_t limit) {
  config.check();
  const int total = config.decision_count();
  if (total >= 63 || (std::uint64_t{1} << total) > limit) {
    throw SpaceTooLargeError("search space has 2^" + std::to_string(total) +
                             " architectures, above the limit of " + std::to_string(limit));
  }
  return ArchitectureRange(config);
}

std::string digits_string(const ArchitectureSequence& arch, const SearchSpaceConfig& config) {
  std::ostringstream out;
  const auto digits = encode_decimal(arch, config);
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i) out << ',';
    out << digits[i];
  }
  return out.str();
}

std::string bits_string(std::span<const std::uint8_t> bits) {
  std::string out;
  out.reserve(bits.size());
  for (auto b : bits) out.push_back(b ? '1' : '0');
  return out;
}

}  // namespace deconas
