#pragma once

// Alternating search: child epochs train the shared bank on architectures
// drawn from the frozen policy, controller epochs apply REINFORCE with a
// moving-average baseline to the parameter-penalized reward.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "deconas/arch_space.hpp"
#include "deconas/child_net.hpp"
#include "deconas/controller.hpp"
#include "deconas/nc/param_store.hpp"
#include "deconas/rng.hpp"
#include "deconas/sr_data.hpp"

namespace deconas {

enum class RewardMode { kPsnr, kSurrogate };
enum class SurrogateProfile { kRandom, kConstant };

std::string reward_mode_name(RewardMode mode);
RewardMode parse_reward_mode(const std::string& name);
std::string surrogate_profile_name(SurrogateProfile profile);
SurrogateProfile parse_surrogate_profile(const std::string& name);

struct TrainerConfig {
  double alpha = 2.0;
  double child_lr = 1e-4;
  double controller_lr = 3e-4;
  int child_steps_per_epoch = 1000;
  int controller_steps_per_epoch = 100;
  int epochs = 200;
  /// Architectures averaged per child gradient.
  int monte_carlo_samples = 1;
  /// Architectures sampled per controller update.
  int controller_samples = 1;
  double baseline_decay = 0.95;
  /// Unset: the baseline starts at the first observed reward.
  std::optional<double> baseline_init;
  bool use_baseline = true;
  std::int64_t lr_halving_interval = 500000;
  int candidate_pool = 100;
  RewardMode reward_mode = RewardMode::kPsnr;
  SurrogateProfile surrogate_profile = SurrogateProfile::kRandom;
  double surrogate_constant = 1.0;
  int batch_size = 16;
  /// LR patch side.
  int patch_size = 64;
  bool augment = true;
  int validation_subset = 8;
  std::int64_t final_steps = 1000000;
  double final_lr = 1e-4;
  std::int64_t final_lr_halving_interval = 200000;
  std::int64_t eval_interval = 1000;

  /// Throws ValidationError naming the offending field.
  void check() const;
};

struct RewardRecord {
  int epoch = 0;
  int step = 0;
  /// Quality term: validation PSNR, or the surrogate score.
  double psnr = 0.0;
  std::int64_t n_params = 0;
  double cb = 0.0;
  double reward = 0.0;
  double baseline = 0.0;
  ArchitectureSequence arch;
  /// Decimal mix digits, comma separated.
  std::string digits;
};

/// Fills n_params, cb, digits and reward = quality - alpha * cb.
RewardRecord make_record(const ArchitectureSequence& arch, const SearchSpaceConfig& space,
                         double quality, double alpha);

/// Exponential moving average of rewards.
class MovingBaseline {
 public:
  explicit MovingBaseline(double decay = 0.95, std::optional<double> initial = std::nullopt,
                          bool enabled = true);

  /// Zero when disabled; otherwise the current average, or `reward` itself
  /// before the first observation when no initial value was given.
  [[nodiscard]] double value_for(double reward) const;
  void update(double reward);
  [[nodiscard]] std::optional<double> value() const { return value_; }

 private:
  double decay_;
  std::optional<double> value_;
  bool enabled_;
};

using RewardFn = std::function<RewardRecord(const ArchitectureSequence&)>;

/// Gradient of the mean L1 loss over `archs` on one batch, and that loss.
struct ChildGradient {
  double loss = 0.0;
  nc::GradientMap gradients;
};
ChildGradient child_gradient(const SharedWeightBank& bank, std::span<const ArchitectureSequence> archs,
                             const Batch& batch);

/// Samples `samples` architectures from the frozen policy, then one Adam
/// step on the keys they read. Returns the loss.
double child_step(SharedWeightBank& bank, const Controller& controller, const Batch& batch, Rng& rng,
                  const nc::AdamConfig& adam, int samples = 1);

/// Mean validation PSNR of `arch` under the bank, minus alpha * cb.
/// Throws DataError on an empty set.
RewardRecord compute_reward(const ArchitectureSequence& arch, const SharedWeightBank& bank,
                            std::span<const ImagePair> validation, const TrainerConfig& config);

/// Deterministic stand-in for PSNR: sum of decision bits weighted by
/// hashed uniforms of `seed`, minus alpha * cb.
double surrogate_quality(const ArchitectureSequence& arch, const SearchSpaceConfig& space,
                         std::uint64_t seed);
double surrogate_reward(const ArchitectureSequence& arch, const SearchSpaceConfig& space, double alpha,
                        std::uint64_t seed);
/// Surrogate seed search() derives from its own seed.
std::uint64_t search_surrogate_seed(std::uint64_t search_seed);
RewardFn surrogate_reward_fn(const SearchSpaceConfig& space, const TrainerConfig& config,
                             std::uint64_t seed);

/// One REINFORCE update: advantages use the baseline as it stood before
/// the batch, the baseline then absorbs each reward in order. A batch
/// whose advantages are all zero leaves the controller untouched.
/// `records[i].baseline` receives the baseline after sample i.
void controller_step(Controller& controller, MovingBaseline& baseline, std::span<const SampleTrace> traces,
                     std::span<RewardRecord> records, const nc::AdamConfig& adam);

/// Best of `candidates` by reward; ties go to fewer parameters, then to the
/// lexicographically smaller digit list. Throws RangeError when empty.
RewardRecord best_of(std::span<const ArchitectureSequence> candidates, const RewardFn& reward,
                     const SearchSpaceConfig& space);

/// best_of over `pool` fresh samples. Throws RangeError for pool < 1.
RewardRecord select_best(const Controller& controller, const RewardFn& reward, int pool, Rng& rng);

struct SearchOutputs {
  std::filesystem::path directory;
  bool deterministic = false;
};

struct SearchResult {
  std::vector<RewardRecord> history;
  std::optional<RewardRecord> best;
  int epochs_run = 0;
};

/// Runs config.epochs epochs. `bank` and `data` may be null in surrogate
/// mode. With outputs, appends reward_log.csv and writes
/// controller_latest/bank_latest checkpoints each epoch, plus *_best when
/// the epoch produced a new best reward.
SearchResult search(Controller& controller, SharedWeightBank* bank, const Dataset* data,
                    const TrainerConfig& config, std::uint64_t seed,
                    const std::optional<SearchOutputs>& outputs = std::nullopt);

struct HistoryRow {
  std::int64_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_psnr = 0.0;
  double validation_psnr = 0.0;
  double best_validation_psnr = 0.0;
};

struct FinalTrainResult {
  std::vector<HistoryRow> history;
  double bicubic_psnr = 0.0;
  double final_validation_psnr = 0.0;
};

/// Trains `arch` on `bank` (expected fresh) for config.final_steps steps.
/// Validation PSNR is measured at step 0, every eval_interval steps and at
/// the end. Throws DataError when either split is empty.
FinalTrainResult final_train(const ArchitectureSequence& arch, SharedWeightBank& bank, const Dataset& data,
                             const TrainerConfig& config, std::uint64_t seed,
                             const std::function<void(const HistoryRow&)>& on_eval = {});

/// Mean PSNR of `arch` over the pairs, evaluated one image at a time.
double evaluate_psnr(const ArchitectureSequence& arch, const SharedWeightBank& bank,
                     std::span<const ImagePair> pairs);

/// Shortest round-trip decimal form, stable across runs.
std::string format_double(double value);

std::string reward_csv_header();
std::string reward_csv_row(const RewardRecord& record);
std::string history_csv_header();
std::string history_csv_row(const HistoryRow& row);
nlohmann::json record_to_json(const RewardRecord& record, const SearchSpaceConfig& space);

}  // namespace deconas
