#include "deconas/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "deconas/arch_io.hpp"
#include "deconas/errors.hpp"
#include "deconas/nc/checkpoint.hpp"
#include "deconas/nc/ops.hpp"
#include "deconas/param_count.hpp"

namespace deconas {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

double halved(double lr, std::int64_t step, std::int64_t interval) {
  if (interval <= 0) return lr;
  return lr * std::pow(0.5, static_cast<double>(step / interval));
}

// True when a should win over b in select_best.
bool better(const RewardRecord& a, const RewardRecord& b, const SearchSpaceConfig& space) {
  if (a.reward != b.reward) return a.reward > b.reward;
  if (a.n_params != b.n_params) return a.n_params < b.n_params;
  const auto da = encode_decimal(a.arch, space);
  const auto db = encode_decimal(b.arch, space);
  if (da != db) return da < db;
  return std::tie(a.arch.global_fusion, a.arch.local_fusion) < std::tie(b.arch.global_fusion, b.arch.local_fusion);
}

std::vector<ImagePair> training_batch(const Dataset& data, const TrainerConfig& config, std::uint64_t seed,
                                      std::int64_t step) {
  const auto step_seed = derive_seed(seed, static_cast<std::uint64_t>(step));
  auto patches = extract_patches(data.train, config.patch_size, config.batch_size, step_seed);
  if (config.augment)
    for (std::size_t i = 0; i < patches.size(); ++i) patches[i] = augment(patches[i], derive_seed(step_seed, i + 1));
  return patches;
}

std::vector<ImagePair> validation_subset(const Dataset& data, int size, std::uint64_t seed) {
  std::vector<std::size_t> order(data.validation.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = std::min(i - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i)));
    std::swap(order[i - 1], order[j]);
  }
  order.resize(std::min(order.size(), static_cast<std::size_t>(size)));
  std::sort(order.begin(), order.end());
  std::vector<ImagePair> out;
  for (auto i : order) out.push_back(data.validation[i]);
  return out;
}

nlohmann::json bank_meta(const SharedWeightBank& bank) {
  return {{"kind", "bank"}, {"space", config_to_json(bank.config())}};
}

}  // namespace

std::string reward_mode_name(RewardMode mode) { return mode == RewardMode::kPsnr ? "psnr" : "surrogate"; }

RewardMode parse_reward_mode(const std::string& name) {
  if (name == "psnr") return RewardMode::kPsnr;
  if (name == "surrogate") return RewardMode::kSurrogate;
  throw ValidationError("reward mode must be psnr or surrogate, got '" + name + "'");
}

std::string surrogate_profile_name(SurrogateProfile profile) {
  return profile == SurrogateProfile::kRandom ? "random" : "constant";
}

SurrogateProfile parse_surrogate_profile(const std::string& name) {
  if (name == "random") return SurrogateProfile::kRandom;
  if (name == "constant") return SurrogateProfile::kConstant;
  throw ValidationError("surrogate profile must be random or constant, got '" + name + "'");
}

void TrainerConfig::check() const {
  require(alpha >= 0.0, "alpha must be >= 0");
  require(child_lr > 0.0 && controller_lr > 0.0 && final_lr > 0.0, "learning rates must be > 0");
  require(child_steps_per_epoch >= 0 && controller_steps_per_epoch >= 0 && epochs >= 0,
          "step and epoch counts must be >= 0");
  require(monte_carlo_samples >= 1, "monte_carlo_samples must be >= 1");
  require(controller_samples >= 1, "controller_samples must be >= 1");
  require(baseline_decay >= 0.0 && baseline_decay < 1.0, "baseline_decay must be in [0, 1)");
  require(lr_halving_interval >= 0 && final_lr_halving_interval >= 0, "halving intervals must be >= 0");
  require(candidate_pool >= 1, "candidate_pool must be >= 1");
  require(batch_size >= 1 && patch_size >= 1, "batch and patch sizes must be >= 1");
  require(validation_subset >= 1, "validation_subset must be >= 1");
  require(final_steps >= 0, "final_steps must be >= 0");
  require(eval_interval >= 1, "eval_interval must be >= 1");
}

RewardRecord make_record(const ArchitectureSequence& arch, const SearchSpaceConfig& space, double quality,
                         double alpha) {
  RewardRecord r;
  r.arch = arch;
  r.psnr = quality;
  r.n_params = count_params(arch, space).total;
  r.cb = complexity_penalty(arch, space);
  r.reward = quality - alpha * r.cb;
  r.digits = digits_string(arch, space);
  return r;
}

MovingBaseline::MovingBaseline(double decay, std::optional<double> initial, bool enabled)
    : decay_(decay), value_(initial), enabled_(enabled) {}

double MovingBaseline::value_for(double reward) const {
  if (!enabled_) return 0.0;
  return value_.value_or(reward);
}

void MovingBaseline::update(double reward) {
  if (!enabled_) return;
  value_ = value_ ? decay_ * *value_ + (1.0 - decay_) * reward : reward;
}

ChildGradient child_gradient(const SharedWeightBank& bank, std::span<const ArchitectureSequence> archs,
                             const Batch& batch) {
  if (archs.empty()) throw ValidationError("child_gradient needs at least one architecture");
  auto& store = const_cast<nc::ParamStore&>(bank.store());
  ChildGradient out;
  const double weight = 1.0 / static_cast<double>(archs.size());
  for (const auto& arch : archs) {
    store.zero_grad();
    const ChildNetwork net = build(arch, bank.config(), bank);
    const nc::Tensor loss = nc::l1_loss(net.forward(batch.lr), batch.hr);
    nc::backward(loss);
    out.loss += weight * loss.item();
    nc::accumulate(out.gradients, store.gradients(), weight);
  }
  store.zero_grad();
  return out;
}

double child_step(SharedWeightBank& bank, const Controller& controller, const Batch& batch, Rng& rng,
                  const nc::AdamConfig& adam, int samples) {
  std::vector<ArchitectureSequence> archs;
  for (int i = 0; i < samples; ++i) archs.push_back(controller.sample(rng).arch);
  const ChildGradient g = child_gradient(bank, archs, batch);
  nc::adam_step(bank.store(), g.gradients, adam);
  return g.loss;
}

double evaluate_psnr(const ArchitectureSequence& arch, const SharedWeightBank& bank,
                     std::span<const ImagePair> pairs) {
  if (pairs.empty()) throw DataError("cannot evaluate on an empty validation set");
  nc::NoGradGuard no_grad;
  const ChildNetwork net = build(arch, bank.config(), bank);
  double total = 0.0;
  for (const auto& pair : pairs) {
    const nc::Tensor prediction = net.forward(to_tensor(std::span<const Image>(&pair.lr, 1)));
    total += psnr(pair.hr, from_tensor(prediction, 0));
  }
  return total / static_cast<double>(pairs.size());
}

RewardRecord compute_reward(const ArchitectureSequence& arch, const SharedWeightBank& bank,
                            std::span<const ImagePair> validation, const TrainerConfig& config) {
  return make_record(arch, bank.config(), evaluate_psnr(arch, bank, validation), config.alpha);
}

double surrogate_quality(const ArchitectureSequence& arch, const SearchSpaceConfig& space, std::uint64_t seed) {
  const auto bits = flatten_decisions(arch, space);
  double total = 0.0;
  for (std::size_t t = 0; t < bits.size(); ++t)
    if (bits[t]) total += hashed_uniform01(seed, t);
  return total;
}

double surrogate_reward(const ArchitectureSequence& arch, const SearchSpaceConfig& space, double alpha,
                        std::uint64_t seed) {
  return surrogate_quality(arch, space, seed) - alpha * complexity_penalty(arch, space);
}

std::uint64_t search_surrogate_seed(std::uint64_t search_seed) { return derive_seed(search_seed, "surrogate"); }

RewardFn surrogate_reward_fn(const SearchSpaceConfig& space, const TrainerConfig& config, std::uint64_t seed) {
  return [space, alpha = config.alpha, profile = config.surrogate_profile, constant = config.surrogate_constant,
          seed](const ArchitectureSequence& arch) {
    const double quality = profile == SurrogateProfile::kConstant ? constant : surrogate_quality(arch, space, seed);
    return make_record(arch, space, quality, alpha);
  };
}

void controller_step(Controller& controller, MovingBaseline& baseline, std::span<const SampleTrace> traces,
                     std::span<RewardRecord> records, const nc::AdamConfig& adam) {
  if (traces.size() != records.size()) throw ValidationError("controller_step needs one reward per trace");
  if (traces.empty()) return;
  std::vector<double> advantages;
  for (const auto& r : records) advantages.push_back(r.reward - baseline.value_for(records.front().reward));
  for (auto& r : records) {
    baseline.update(r.reward);
    r.baseline = baseline.value_for(r.reward);
  }
  if (std::all_of(advantages.begin(), advantages.end(), [](double a) { return a == 0.0; })) return;
  nc::GradientMap total;
  const double weight = 1.0 / static_cast<double>(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i)
    nc::accumulate(total, controller.policy_gradient(traces[i], advantages[i]), weight);
  nc::adam_step(controller.params(), total, adam);
}

RewardRecord best_of(std::span<const ArchitectureSequence> candidates, const RewardFn& reward,
                     const SearchSpaceConfig& space) {
  if (candidates.empty()) throw RangeError("no candidates to select from");
  std::optional<RewardRecord> best;
  for (const auto& arch : candidates) {
    RewardRecord r = reward(arch);
    if (!best || better(r, *best, space)) best = std::move(r);
  }
  return *best;
}

RewardRecord select_best(const Controller& controller, const RewardFn& reward, int pool, Rng& rng) {
  if (pool < 1) throw RangeError("candidate pool must be >= 1");
  std::vector<ArchitectureSequence> candidates;
  for (int i = 0; i < pool; ++i) candidates.push_back(controller.sample(rng).arch);
  return best_of(candidates, reward, controller.space());
}

SearchResult search(Controller& controller, SharedWeightBank* bank, const Dataset* data,
                    const TrainerConfig& config, std::uint64_t seed, const std::optional<SearchOutputs>& outputs) {
  config.check();
  const SearchSpaceConfig& space = controller.space();
  const bool psnr_mode = config.reward_mode == RewardMode::kPsnr;
  if (psnr_mode) {
    if (!bank || !data) throw ValidationError("psnr reward mode needs a weight bank and a dataset");
    if (!(bank->config() == space)) throw BankError("bank and controller disagree on the search space");
    if (data->validation.empty()) throw DataError("psnr reward mode needs a validation split");
    if (config.child_steps_per_epoch > 0 && data->train.empty()) throw DataError("child training needs a training split");
  }

  Rng child_rng(derive_seed(seed, "child-sampling"));
  Rng controller_rng(derive_seed(seed, "controller-sampling"));
  const std::uint64_t patch_seed = derive_seed(seed, "patches");
  const std::uint64_t validation_seed = derive_seed(seed, "validation-subset");
  const std::uint64_t surrogate_seed = search_surrogate_seed(seed);
  const nc::AdamConfig controller_adam{.lr = config.controller_lr};
  MovingBaseline baseline(config.baseline_decay, config.baseline_init, config.use_baseline);

  std::ofstream csv;
  if (outputs) {
    std::filesystem::create_directories(outputs->directory);
    csv.open(outputs->directory / "reward_log.csv", std::ios::binary | std::ios::trunc);
    if (!csv) throw Error("cannot write " + (outputs->directory / "reward_log.csv").string());
    csv << reward_csv_header();
  }

  SearchResult result;
  std::int64_t child_step_count = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (psnr_mode) {
      for (int s = 0; s < config.child_steps_per_epoch; ++s, ++child_step_count) {
        const auto patches = training_batch(*data, config, patch_seed, child_step_count);
        const nc::AdamConfig adam{.lr = halved(config.child_lr, child_step_count, config.lr_halving_interval)};
        child_step(*bank, controller, make_batch(patches), child_rng, adam, config.monte_carlo_samples);
      }
    }

    RewardFn reward;
    std::vector<ImagePair> subset;
    if (psnr_mode) {
      subset = validation_subset(*data, config.validation_subset, derive_seed(validation_seed, static_cast<std::uint64_t>(epoch)));
      reward = [&](const ArchitectureSequence& arch) { return compute_reward(arch, *bank, subset, config); };
    } else {
      reward = surrogate_reward_fn(space, config, surrogate_seed);
    }

    bool improved = false;
    for (int s = 0; s < config.controller_steps_per_epoch; ++s) {
      std::vector<SampleTrace> traces;
      std::vector<RewardRecord> records;
      for (int i = 0; i < config.controller_samples; ++i) {
        traces.push_back(controller.sample(controller_rng));
        records.push_back(reward(traces.back().arch));
        records.back().epoch = epoch;
        records.back().step = s;
      }
      controller_step(controller, baseline, traces, records, controller_adam);
      for (auto& r : records) {
        if (csv.is_open()) csv << reward_csv_row(r);
        if (!result.best || better(r, *result.best, space)) {
          result.best = r;
          improved = true;
        }
        result.history.push_back(std::move(r));
      }
    }
    result.epochs_run = epoch + 1;

    if (outputs) {
      csv.flush();
      const auto& dir = outputs->directory;
      const bool det = outputs->deterministic;
      const auto ctrl = nc::snapshot(controller.params(), controller.meta());
      nc::save_checkpoint(dir / "controller_latest.ckpt", ctrl, det);
      if (improved) nc::save_checkpoint(dir / "controller_best.ckpt", ctrl, det);
      if (bank) {
        const auto weights = nc::snapshot(bank->store(), bank_meta(*bank));
        nc::save_checkpoint(dir / "bank_latest.ckpt", weights, det);
        if (improved) nc::save_checkpoint(dir / "bank_best.ckpt", weights, det);
      }
    }
  }
  return result;
}

FinalTrainResult final_train(const ArchitectureSequence& arch, SharedWeightBank& bank, const Dataset& data,
                             const TrainerConfig& config, std::uint64_t seed,
                             const std::function<void(const HistoryRow&)>& on_eval) {
  config.check();
  if (data.train.empty() || data.validation.empty()) throw DataError("final training needs train and validation splits");
  const ChildNetwork net = build(arch, bank.config(), bank);
  const std::uint64_t patch_seed = derive_seed(seed, "final-patches");

  FinalTrainResult result;
  result.bicubic_psnr = bicubic_psnr(data.validation, data.scale);
  double best = -1.0;
  HistoryRow pending;
  auto record = [&](std::int64_t step) {
    pending.step = step;
    pending.validation_psnr = evaluate_psnr(arch, bank, data.validation);
    best = std::max(best, pending.validation_psnr);
    pending.best_validation_psnr = best;
    result.history.push_back(pending);
    if (on_eval) on_eval(pending);
  };

  pending.lr = config.final_lr;
  record(0);
  for (std::int64_t step = 0; step < config.final_steps; ++step) {
    const auto patches = training_batch(data, config, patch_seed, step);
    const Batch batch = make_batch(patches);
    auto& store = bank.store();
    store.zero_grad();
    const nc::Tensor prediction = net.forward(batch.lr);
    const nc::Tensor loss = nc::l1_loss(prediction, batch.hr);
    nc::backward(loss);
    const nc::AdamConfig adam{.lr = halved(config.final_lr, step, config.final_lr_halving_interval)};
    nc::adam_step(store, store.gradients(), adam);
    store.zero_grad();

    const std::int64_t done = step + 1;
    if (done % config.eval_interval == 0 || done == config.final_steps) {
      double train_psnr = 0.0;
      for (int i = 0; i < prediction.dim(0); ++i) train_psnr += psnr(patches[static_cast<std::size_t>(i)].hr, from_tensor(prediction, i));
      pending.train_psnr = train_psnr / prediction.dim(0);
      pending.train_loss = loss.item();
      pending.lr = adam.lr;
      record(done);
    }
  }
  result.final_validation_psnr = result.history.back().validation_psnr;
  return result;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw Error("format_double failed");
  return {buf, ptr};
}

std::string reward_csv_header() {
  return "epoch,step,psnr,n_params,cb,reward,baseline,digits,global_fusion,local_fusion\n";
}

std::string reward_csv_row(const RewardRecord& r) {
  return std::to_string(r.epoch) + "," + std::to_string(r.step) + "," + format_double(r.psnr) + "," +
         std::to_string(r.n_params) + "," + format_double(r.cb) + "," + format_double(r.reward) + "," +
         format_double(r.baseline) + ",\"" + r.digits + "\"," + bits_string(r.arch.global_fusion) + "," +
         bits_string(r.arch.local_fusion) + "\n";
}

std::string history_csv_header() {
  return "step,lr,train_loss,train_psnr,validation_psnr,best_validation_psnr\n";
}

std::string history_csv_row(const HistoryRow& row) {
  return std::to_string(row.step) + "," + format_double(row.lr) + "," + format_double(row.train_loss) + "," +
         format_double(row.train_psnr) + "," + format_double(row.validation_psnr) + "," +
         format_double(row.best_validation_psnr) + "\n";
}

nlohmann::json record_to_json(const RewardRecord& r, const SearchSpaceConfig& space) {
  return {{"epoch", r.epoch},
          {"step", r.step},
          {"psnr", r.psnr},
          {"n_params", r.n_params},
          {"cb", r.cb},
          {"reward", r.reward},
          {"baseline", r.baseline},
          {"digits", encode_decimal(r.arch, space)},
          {"global_fusion", r.arch.global_fusion},
          {"local_fusion", r.arch.local_fusion}};
}

}  // namespace deconas
