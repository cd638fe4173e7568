#pragma once

// Autoregressive two-layer LSTM policy emitting architecture bits as chains
// of Bernoulli decisions.
//
// One LSTM step per mix block (i, j) draws K bits from a K-wide head shared
// by every mix block; with fusion search two more steps draw the N global
// gates and then the M local gates. The decision just taken is embedded and
// fed as the next input.

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "deconas/arch_space.hpp"
#include "deconas/nc/param_store.hpp"
#include "deconas/nc/tensor.hpp"
#include "deconas/rng.hpp"

namespace deconas {

struct ControllerOptions {
  int hidden_size = 64;
  double init_scale = 0.02;
  std::uint64_t seed = 0;
};

struct SampleTrace {
  ArchitectureSequence arch;
  /// Sum over decisions of log P(a_t | a_{t-1:1}).
  double log_prob = 0.0;
  /// Bernoulli logits of every controller step, for inspection.
  std::vector<std::vector<double>> logits;
};

class Controller {
 public:
  Controller(SearchSpaceConfig space, ControllerOptions options = {});

  [[nodiscard]] const SearchSpaceConfig& space() const { return space_; }
  [[nodiscard]] const ControllerOptions& options() const { return options_; }
  [[nodiscard]] nc::ParamStore& params() { return params_; }
  [[nodiscard]] const nc::ParamStore& params() const { return params_; }
  /// M(M+1)/2 mix steps, plus two fusion steps when fusion is searched.
  [[nodiscard]] int step_count() const;

  SampleTrace sample(Rng& rng) const;
  /// Teacher-forced replay; throws ValidationError for an invalid arch.
  [[nodiscard]] double log_prob(const ArchitectureSequence& arch) const;
  [[nodiscard]] SampleTrace replay(const ArchitectureSequence& arch) const;

  /// Gradients of -advantage * log_prob(trace.arch). Serialize calls: the
  /// parameter gradient buffers are used as scratch.
  nc::GradientMap policy_gradient(const SampleTrace& trace, double advantage) const;

  /// Scores of the 2^K mix outcomes from a hidden state, computed with the
  /// mix embedding table as the output projection (weight tying).
  [[nodiscard]] nc::Tensor vocabulary_logits(const nc::Tensor& hidden) const;

  /// Everything needed to rebuild an identically shaped controller.
  [[nodiscard]] nlohmann::json meta() const;
  static Controller from_meta(const nlohmann::json& meta);

 private:
  struct Rollout {
    ArchitectureSequence arch;
    nc::Tensor log_prob;
    std::vector<std::vector<double>> logits;
  };

  Rollout run(const ArchitectureSequence* forced, Rng* rng) const;
  void add_weight(const std::string& name, nc::Shape shape, int fan_in, Rng& rng);

  SearchSpaceConfig space_;
  ControllerOptions options_;
  nc::ParamStore params_;
  std::vector<int> global_chunk_offsets_;
};

/// Embedding-row chunking for fusion decisions: chunks of at most 8 bits.
inline constexpr int kFusionChunkBits = 8;

}  // namespace deconas
