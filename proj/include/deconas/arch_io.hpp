#pragma once

// JSON and DOT export of architectures and search-space configs.

#include <string>

#include "json.hpp"

#include "deconas/arch_space.hpp"

namespace deconas {

nlohmann::json config_to_json(const SearchSpaceConfig& config);
/// Missing keys keep the values of `defaults`.
SearchSpaceConfig config_from_json(const nlohmann::json& j,
                                   const SearchSpaceConfig& defaults = {});

/// {"digits", "local_fusion", "global_fusion", "config", "bit_order"}
nlohmann::json arch_to_json(const ArchitectureSequence& arch,
                            const SearchSpaceConfig& config);

struct ArchitectureDocument {
  SearchSpaceConfig config;
  ArchitectureSequence arch;
};

/// Reads an exported architecture; the embedded config wins over `defaults`.
/// Throws ValidationError (or LengthError/RangeError from decoding).
ArchitectureDocument arch_from_json(const nlohmann::json& j,
                                    const SearchSpaceConfig& defaults = {});

/// Graphviz rendering of the DNB wiring and the two fusion layers.
std::string to_dot(const ArchitectureSequence& arch, const SearchSpaceConfig& config);

}  // namespace deconas
