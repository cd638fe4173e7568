#include "cli/run_config.hpp"

#include "deconas/arch_io.hpp"
#include "deconas/errors.hpp"
#include "deconas/rng.hpp"

namespace deconas::cli {

std::string RunConfig::resolved_data_source() const {
  return data_source.empty() ? "synthetic:" + std::to_string(stream_seed("data")) : data_source;
}

std::uint64_t RunConfig::stream_seed(std::string_view stream) const { return derive_seed(seed, stream); }

void RunConfig::check() const {
  space.check();
  trainer.check();
  if (controller.hidden_size < 1) throw ValidationError("--hidden must be >= 1");
  if (controller.init_scale <= 0.0 || bank_init_scale <= 0.0) throw ValidationError("--init-scale must be > 0");
  if (dataset.scale != space.scale) throw ValidationError("dataset scale differs from --scale");
  if (dataset.train_images < 0 || dataset.validation_images < 0) throw ValidationError("image counts must be >= 0");
  if (dataset.image_size < 1 || dataset.image_size % space.scale != 0)
    throw ValidationError("--image-size must be a positive multiple of --scale");
}

nlohmann::json RunConfig::to_json() const {
  const auto& t = trainer;
  nlohmann::json trainer_json = {
      {"alpha", t.alpha},
      {"child_lr", t.child_lr},
      {"controller_lr", t.controller_lr},
      {"child_steps_per_epoch", t.child_steps_per_epoch},
      {"controller_steps_per_epoch", t.controller_steps_per_epoch},
      {"epochs", t.epochs},
      {"monte_carlo_samples", t.monte_carlo_samples},
      {"controller_samples", t.controller_samples},
      {"baseline_decay", t.baseline_decay},
      {"baseline_init", t.baseline_init ? nlohmann::json(*t.baseline_init) : nlohmann::json(nullptr)},
      {"use_baseline", t.use_baseline},
      {"lr_halving_interval", t.lr_halving_interval},
      {"candidate_pool", t.candidate_pool},
      {"reward_mode", reward_mode_name(t.reward_mode)},
      {"surrogate_profile", surrogate_profile_name(t.surrogate_profile)},
      {"surrogate_constant", t.surrogate_constant},
      {"batch_size", t.batch_size},
      {"patch_size", t.patch_size},
      {"augment", t.augment},
      {"validation_subset", t.validation_subset},
      {"final_steps", t.final_steps},
      {"final_lr", t.final_lr},
      {"final_lr_halving_interval", t.final_lr_halving_interval},
      {"eval_interval", t.eval_interval}};
  return {{"profile", profile},
          {"space", config_to_json(space)},
          {"trainer", trainer_json},
          {"controller", {{"hidden_size", controller.hidden_size}, {"init_scale", controller.init_scale}}},
          {"bank_init_scale", bank_init_scale},
          {"data", resolved_data_source()},
          {"dataset",
           {{"train_images", dataset.train_images},
            {"validation_images", dataset.validation_images},
            {"image_size", dataset.image_size}}},
          {"seed", seed},
          {"out", out_dir.string()}};
}

RunConfig profile_defaults(const std::string& name) {
  RunConfig c;
  c.profile = name;
  auto& t = c.trainer;
  if (name == "paper") {
    c.space = make_space(4, 4, 3, 64, 2, false);
    t.alpha = 2.0;
    t.child_lr = 1e-4;
    t.lr_halving_interval = 500000;
    t.controller_lr = 3e-4;
    t.child_steps_per_epoch = 1000;
    t.controller_steps_per_epoch = 100;
    t.epochs = 200;
    t.batch_size = 16;
    t.patch_size = 64;
    t.final_steps = 1000000;
    t.final_lr = 1e-4;
    t.final_lr_halving_interval = 200000;
    t.eval_interval = 1000;
    c.dataset = {.scale = 2, .train_images = 800, .validation_images = 100, .image_size = 256};
  } else if (name == "desk") {
    c.space = make_space(2, 2, 3, 8, 2, false);
    t.alpha = 2.0;
    t.child_lr = 2e-3;
    t.lr_halving_interval = 0;
    t.controller_lr = 3e-3;
    t.child_steps_per_epoch = 50;
    t.controller_steps_per_epoch = 10;
    t.epochs = 20;
    t.batch_size = 16;
    t.patch_size = 16;
    t.final_steps = 2000;
    t.final_lr = 2e-3;
    t.final_lr_halving_interval = 1000;
    t.eval_interval = 250;
    c.dataset = {.scale = 2, .train_images = 32, .validation_images = 8, .image_size = 64};
  } else {
    throw ValidationError("--profile must be paper or desk, got '" + name + "'");
  }
  return c;
}

}  // namespace deconas::cli
