#pragma once

// Seeded controller experiments shared by the unit tests and the acceptance
// binary.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "deconas/arch_space.hpp"
#include "deconas/controller.hpp"
#include "deconas/param_count.hpp"
#include "deconas/trainer.hpp"

namespace deconas::testing {

/// Zero head weights; head biases set to `bias`, so every logit is `bias`.
inline void force_logits(Controller& controller, double bias) {
  for (auto& e : controller.params().entries()) {
    if (e.name.find("_head.") == std::string::npos) continue;
    const bool is_bias = e.name.ends_with(".b");
    for (auto& v : e.param.mutable_values()) v = is_bias ? bias : 0.0;
  }
}

inline SearchSpaceConfig toy_space() { return make_space(1, 1, 1, 4, 2, false); }

/// P(bit = 1) of a single-bit controller.
inline double toy_probability(const Controller& controller) {
  auto arch = all_ones_architecture(controller.space());
  return std::exp(controller.log_prob(arch));
}

/// REINFORCE on the single-bit toy with reward 1 for bit 1 and 0 otherwise.
/// Returns P(bit = 1) before the first step and after every step.
inline std::vector<double> toy_trajectory(std::uint64_t seed, int steps, double lr, bool use_baseline = true) {
  Controller controller(toy_space(), {.hidden_size = 64, .init_scale = 0.02, .seed = derive_seed(seed, "controller")});
  Rng rng(derive_seed(seed, "sampling"));
  MovingBaseline baseline(0.95, std::nullopt, use_baseline);
  const nc::AdamConfig adam{.lr = lr};
  std::vector<double> p{toy_probability(controller)};
  for (int s = 0; s < steps; ++s) {
    std::vector<SampleTrace> traces{controller.sample(rng)};
    const double quality = traces[0].arch.mix_bits[0] ? 1.0 : 0.0;
    std::vector<RewardRecord> records{make_record(traces[0].arch, controller.space(), quality, 0.0)};
    controller_step(controller, baseline, traces, records, adam);
    p.push_back(toy_probability(controller));
  }
  return p;
}

/// Steps until P(bit = 1) first exceeds `target`, or -1.
inline int toy_steps_to(const std::vector<double>& trajectory, double target) {
  for (std::size_t i = 0; i < trajectory.size(); ++i)
    if (trajectory[i] > target) return static_cast<int>(i);
  return -1;
}

/// Controller of both search experiments. The larger initial scale gives
/// every LSTM step a distinct hidden state, which the head shared by all
/// mix blocks needs to tell the blocks apart.
inline ControllerOptions experiment_controller(std::uint64_t seed) {
  return {.hidden_size = 64, .init_scale = 4.0, .seed = derive_seed(seed, "controller")};
}

/// The space of the surrogate convergence experiment: 9 decisions.
inline SearchSpaceConfig convergence_space() { return make_space(1, 2, 2, 4, 2, true); }

inline TrainerConfig convergence_config() {
  TrainerConfig t;
  t.reward_mode = RewardMode::kSurrogate;
  t.surrogate_profile = SurrogateProfile::kRandom;
  t.alpha = 2.0;
  t.controller_lr = 3e-4;
  t.epochs = 30;
  t.controller_steps_per_epoch = 20;
  t.controller_samples = 4;
  t.candidate_pool = 100;
  return t;
}

/// Brute-force argmax of `reward` over the enumerable space, with the
/// select_best tie rule.
inline RewardRecord brute_force_best(const SearchSpaceConfig& space, const RewardFn& reward) {
  std::vector<ArchitectureSequence> all;
  for (const auto& arch : enumerate_space(space, std::uint64_t{1} << 20)) all.push_back(arch);
  return best_of(all, reward, space);
}

struct ConvergenceRun {
  RewardRecord selected;
  RewardRecord optimum;
  /// Fraction of the enumerated rewards strictly below the selected one.
  double percentile = 0.0;
  [[nodiscard]] bool hit() const { return selected.arch == optimum.arch; }
};

inline ConvergenceRun convergence_run(std::uint64_t seed, const TrainerConfig& config = convergence_config()) {
  const auto space = convergence_space();
  Controller controller(space, experiment_controller(seed));
  search(controller, nullptr, nullptr, config, seed);
  const RewardFn reward = surrogate_reward_fn(space, config, search_surrogate_seed(seed));
  Rng rng(derive_seed(seed, "select"));
  ConvergenceRun run;
  run.selected = select_best(controller, reward, config.candidate_pool, rng);
  run.optimum = brute_force_best(space, reward);
  std::size_t below = 0, total = 0;
  for (const auto& arch : enumerate_space(space, std::uint64_t{1} << 20)) {
    below += reward(arch).reward < run.selected.reward ? 1 : 0;
    ++total;
  }
  run.percentile = static_cast<double>(below) / static_cast<double>(total);
  return run;
}

/// Space and schedule of the complexity-penalty experiment.
inline SearchSpaceConfig complexity_space() { return make_space(2, 2, 3, 8, 2, false); }

inline TrainerConfig complexity_config(double alpha) {
  TrainerConfig t;
  t.reward_mode = RewardMode::kSurrogate;
  t.surrogate_profile = SurrogateProfile::kConstant;
  t.surrogate_constant = 1.0;
  t.alpha = alpha;
  t.controller_lr = 3e-4;
  t.epochs = 40;
  t.controller_steps_per_epoch = 20;
  t.controller_samples = 4;
  return t;
}

struct ComplexityRun {
  double mean_params = 0.0;
  double p_all_zero = 0.0;
  /// The most frequent architecture among the post-training samples.
  ArchitectureSequence mode;
};

inline ComplexityRun complexity_run(std::uint64_t seed, double alpha, int samples = 200) {
  const auto space = complexity_space();
  Controller controller(space, experiment_controller(seed));
  search(controller, nullptr, nullptr, complexity_config(alpha), seed);
  Rng rng(derive_seed(seed, "post-training"));
  ComplexityRun run;
  std::map<ArchitectureSequence, int> counts;
  for (int i = 0; i < samples; ++i) {
    const auto arch = controller.sample(rng).arch;
    run.mean_params += static_cast<double>(count_params(arch, space).total) / samples;
    ++counts[arch];
  }
  int best = -1;
  for (const auto& [arch, n] : counts)
    if (n > best) {
      best = n;
      run.mode = arch;
    }
  run.p_all_zero = std::exp(controller.log_prob(all_zero_architecture(space)));
  return run;
}

}  // namespace deconas::testing
