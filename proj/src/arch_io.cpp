#include "deconas/arch_io.hpp"

#include <sstream>

#include "deconas/errors.hpp"

namespace deconas {

namespace {

std::vector<std::uint8_t> read_bits(const nlohmann::json& j, const char* key,
                                    std::vector<std::uint8_t> fallback) {
  if (!j.contains(key)) return fallback;
  std::vector<std::uint8_t> bits;
  for (const auto& v : j.at(key)) {
    const int b = v.get<int>();
    if (b != 0 && b != 1) throw ValidationError(std::string(key) + " must hold 0/1 values");
    bits.push_back(static_cast<std::uint8_t>(b));
  }
  return bits;
}

}  // namespace

nlohmann::json config_to_json(const SearchSpaceConfig& config) {
  nlohmann::json ops = nlohmann::json::array();
  for (auto op : config.op_list) ops.push_back(std::string(op_name(op)));
  return {{"N", config.num_blocks},
          {"M", config.mix_nodes},
          {"K", config.num_ops},
          {"G", config.feature_channels},
          {"scale", config.scale},
          {"fusion_search", config.fusion_search},
          {"local_residual", config.local_residual},
          {"op_list", ops}};
}

SearchSpaceConfig config_from_json(const nlohmann::json& j, const SearchSpaceConfig& defaults) {
  SearchSpaceConfig config = defaults;
  try {
    config.num_blocks = j.value("N", config.num_blocks);
    config.mix_nodes = j.value("M", config.mix_nodes);
    config.feature_channels = j.value("G", config.feature_channels);
    config.scale = j.value("scale", config.scale);
    config.fusion_search = j.value("fusion_search", config.fusion_search);
    config.local_residual = j.value("local_residual", config.local_residual);
    if (j.contains("op_list")) {
      config.op_list.clear();
      for (const auto& name : j.at("op_list")) config.op_list.push_back(parse_op(name.get<std::string>()));
      config.num_ops = static_cast<int>(config.op_list.size());
    }
    if (j.contains("K")) {
      const int k = j.at("K").get<int>();
      if (!j.contains("op_list")) {
        auto ops = default_op_list();
        if (k < 1 || k > static_cast<int>(ops.size())) throw ValidationError("K needs an explicit op_list");
        ops.resize(static_cast<std::size_t>(k));
        config.op_list = ops;
      }
      config.num_ops = k;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad config JSON: ") + e.what());
  }
  config.check();
  return config;
}

nlohmann::json arch_to_json(const ArchitectureSequence& arch, const SearchSpaceConfig& config) {
  return {{"digits", encode_decimal(arch, config)},
          {"local_fusion", arch.local_fusion},
          {"global_fusion", arch.global_fusion},
          {"config", config_to_json(config)},
          {"bit_order", "msb_first; digit bit k selects op_list[k]"}};
}

ArchitectureDocument arch_from_json(const nlohmann::json& j, const SearchSpaceConfig& defaults) {
  ArchitectureDocument doc;
  doc.config = j.contains("config") ? config_from_json(j.at("config"), defaults) : defaults;
  std::vector<int> digits;
  try {
    digits = j.at("digits").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("architecture JSON needs integer digits: ") + e.what());
  }
  doc.arch = decode_decimal(digits, doc.config);
  doc.arch.local_fusion = read_bits(j, "local_fusion", doc.arch.local_fusion);
  doc.arch.global_fusion = read_bits(j, "global_fusion", doc.arch.global_fusion);
  require_valid(doc.arch, doc.config);
  return doc;
}

std::string to_dot(const ArchitectureSequence& arch, const SearchSpaceConfig& config) {
  require_valid(arch, config);
  const int m_nodes = config.mix_nodes;
  std::ostringstream out;
  out << "digraph deconas {\n  rankdir=LR;\n  node [shape=box];\n";
  out << "  subgraph cluster_dnb {\n    label=\"DNB (digits " << digits_string(arch, config) << ")\";\n";
  out << "    n0 [label=\"F_d,0 (input)\"];\n";
  for (int m = 1; m <= m_nodes; ++m) {
    const bool identity = is_identity_node(arch, config, m);
    out << "    n" << m << " [label=\"mix " << m << (identity ? " (identity)" : "") << "\"];\n";
  }
  for (int m = 1; m <= m_nodes; ++m) {
    if (is_identity_node(arch, config, m)) {
      out << "    n" << (m - 1) << " -> n" << m << " [style=dotted, label=\"identity\"];\n";
      continue;
    }
    for (int j = 0; j < m; ++j) {
      std::string label;
      for (int k = 0; k < config.num_ops; ++k) {
        if (arch.mix_bits[mix_bit_index(m, j, k, config.num_ops)]) {
          if (!label.empty()) label += "\\n";
          label += op_name(config.op_list[static_cast<std::size_t>(k)]);
        }
      }
      if (!label.empty()) out << "    n" << j << " -> n" << m << " [label=\"" << label << "\"];\n";
    }
  }
  out << "    lff [label=\"local fusion\", shape=ellipse];\n";
  for (int j = 0; j < m_nodes; ++j) {
    if (arch.local_fusion[static_cast<std::size_t>(j)]) out << "    n" << j << " -> lff [style=dashed];\n";
  }
  out << "    n" << m_nodes << " -> lff;\n  }\n";
  out << "  subgraph cluster_global {\n    label=\"global fusion\";\n";
  for (int d = 0; d <= config.num_blocks; ++d) out << "    f" << d << " [label=\"F_" << d << "\"];\n";
  out << "    gff [label=\"GFF\", shape=ellipse];\n";
  for (int d = 0; d < config.num_blocks; ++d) {
    if (arch.global_fusion[static_cast<std::size_t>(d)]) out << "    f" << d << " -> gff [style=dashed];\n";
  }
  out << "    f" << config.num_blocks << " -> gff;\n  }\n}\n";
  return out.str();
}

}  // namespace deconas
