#pragma once

// Merged configuration of a command-line run and the named profiles that
// seed it.

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "deconas/arch_space.hpp"
#include "deconas/controller.hpp"
#include "deconas/sr_data.hpp"
#include "deconas/trainer.hpp"

namespace deconas::cli {

struct RunConfig {
  std::string profile = "desk";
  SearchSpaceConfig space;
  TrainerConfig trainer;
  ControllerOptions controller;
  double bank_init_scale = 0.02;
  /// Empty means synthetic:<seed>.
  std::string data_source;
  DatasetOptions dataset;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "deconas_out";
  bool deterministic = false;

  [[nodiscard]] std::string resolved_data_source() const;
  /// Seed of one subsystem's random stream, derived from the root seed.
  [[nodiscard]] std::uint64_t stream_seed(std::string_view stream) const;
  /// Throws ValidationError.
  void check() const;
  [[nodiscard]] nlohmann::json to_json() const;
};

/// "paper" or "desk"; throws ValidationError for other names.
RunConfig profile_defaults(const std::string& name);

}  // namespace deconas::cli
