#include "cli/commands.hpp"

#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cli/run_config.hpp"
#include "deconas/arch_io.hpp"
#include "deconas/errors.hpp"
#include "deconas/nc/checkpoint.hpp"
#include "deconas/param_count.hpp"

namespace deconas::cli {

namespace {

using nlohmann::json;

class UsageError : public Error {
 public:
  using Error::Error;
};

// Config files: a JSON object, or anything CLI11 reads as INI/TOML.
class AutoConfig : public CLI::ConfigINI {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    const std::string text{std::istreambuf_iterator<char>(input), std::istreambuf_iterator<char>()};
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') return from_json(text);
    std::istringstream again(text);
    return CLI::ConfigINI::from_config(again);
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw UsageError("--config: values must be strings, numbers, booleans or arrays of those");
  }

  static std::vector<CLI::ConfigItem> from_json(const std::string& text) {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      throw UsageError(std::string("--config: ") + e.what());
    }
    if (!doc.is_object()) throw UsageError("--config: a JSON config must be an object");
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : doc.items()) {
      if (value.is_null()) continue;
      CLI::ConfigItem item;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
    return items;
  }
};

struct Flags {
  std::string profile = "desk";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> data;
  bool deterministic = false;

  std::optional<int> num_blocks, mix_nodes, num_ops, channels, scale;
  bool fusion = false;
  CLI::Option* fusion_opt = nullptr;
  bool local_residual = true;
  CLI::Option* local_residual_opt = nullptr;
  std::vector<std::string> ops;

  std::optional<double> alpha, child_lr, controller_lr, baseline_decay, baseline_init, surrogate_constant, final_lr,
      init_scale;
  std::optional<int> child_steps, controller_steps, epochs, mc_samples, controller_samples, pool, batch, patch,
      val_subset, hidden, train_images, val_images, image_size;
  std::optional<std::int64_t> lr_halving, final_steps, final_halving, eval_interval;
  std::optional<std::string> reward, surrogate_profile;
  bool no_baseline = false;
  bool no_augment = false;

  std::vector<int> digits;
  std::optional<std::string> local_bits, global_bits;
  std::optional<std::int64_t> limit;
  std::optional<std::string> dot, checkpoint, bank, split;
  std::vector<std::string> pred, target;
};

std::string env_name(const std::string& flag) {
  std::string name = "DECONAS_";
  for (char c : flag.substr(2)) name.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return name;
}

template <class T>
CLI::Option* add(CLI::App& app, const std::string& flag, T& target, const std::string& help) {
  return app.add_option(flag, target, help)->envname(env_name(flag));
}

CLI::Option* add_switch(CLI::App& app, const std::string& flag, bool& target, const std::string& help) {
  return app.add_flag(flag, target, help)->envname(env_name(flag));
}

void register_flags(CLI::App& app, Flags& f) {
  add(app, "--profile", f.profile, "Defaults profile: paper or desk")->capture_default_str();
  add(app, "--seed", f.seed, "Root seed; every subsystem stream derives from it");
  add(app, "--out", f.out, "Output directory");
  add(app, "--data", f.data, "synthetic:<seed> or dir:<path>");
  add_switch(app, "--deterministic", f.deterministic, "Omit timestamps from checkpoint manifests");

  add(app, "--N", f.num_blocks, "Number of DNBs");
  add(app, "--M", f.mix_nodes, "Mix nodes per DNB");
  add(app, "--K", f.num_ops, "Candidate operations");
  add(app, "--G", f.channels, "Feature channels");
  add(app, "--scale", f.scale, "Upscaling factor");
  f.fusion_opt = app.add_flag("--fusion,!--no-fusion", f.fusion, "Search the fusion gates")->envname("DECONAS_FUSION");
  f.local_residual_opt = app.add_flag("--local-residual,!--no-local-residual", f.local_residual,
                                      "Add each DNB input to its output")
                             ->envname("DECONAS_LOCAL_RESIDUAL");
  add(app, "--ops", f.ops, "Operation list, e.g. conv3x3,depthwise_separable3x3")->delimiter(',');

  add(app, "--alpha", f.alpha, "Complexity penalty weight");
  add(app, "--child-lr", f.child_lr, "Shared-weight learning rate");
  add(app, "--controller-lr", f.controller_lr, "Controller learning rate");
  add(app, "--child-steps", f.child_steps, "Child steps per epoch");
  add(app, "--controller-steps", f.controller_steps, "Controller steps per epoch");
  add(app, "--epochs", f.epochs, "Search epochs");
  add(app, "--mc-samples", f.mc_samples, "Architectures per child gradient");
  add(app, "--controller-samples", f.controller_samples, "Architectures per controller update");
  add(app, "--baseline-decay", f.baseline_decay, "Reward moving-average decay");
  add(app, "--baseline-init", f.baseline_init, "Initial baseline; default is the first reward");
  add_switch(app, "--no-baseline", f.no_baseline, "Use raw rewards as advantages");
  add(app, "--lr-halving", f.lr_halving, "Child steps between learning-rate halvings (0: never)");
  add(app, "--pool", f.pool, "Candidates sampled for the final selection");
  add(app, "--reward", f.reward, "psnr or surrogate");
  add(app, "--surrogate-profile", f.surrogate_profile, "random or constant");
  add(app, "--surrogate-constant", f.surrogate_constant, "Quality term of the constant surrogate");
  add(app, "--batch", f.batch, "Patches per batch");
  add(app, "--patch", f.patch, "LR patch size");
  add_switch(app, "--no-augment", f.no_augment, "Disable flips and rotations");
  add(app, "--val-subset", f.val_subset, "Validation images per search epoch");
  add(app, "--final-steps", f.final_steps, "Final training steps");
  add(app, "--final-lr", f.final_lr, "Final training learning rate");
  add(app, "--final-halving", f.final_halving, "Final steps between halvings (0: never)");
  add(app, "--eval-interval", f.eval_interval, "Steps between validation passes");
  add(app, "--hidden", f.hidden, "Controller LSTM width");
  add(app, "--init-scale", f.init_scale, "Variance scale of weight initialization");
  add(app, "--train-images", f.train_images, "Synthetic training images");
  add(app, "--val-images", f.val_images, "Synthetic validation images");
  add(app, "--image-size", f.image_size, "Synthetic HR image size");

  add(app, "--digits", f.digits, "Decimal mix digits, e.g. 7,6,4")->delimiter(',');
  add(app, "--local-fusion", f.local_bits, "Local gates as a bit string");
  add(app, "--global-fusion", f.global_bits, "Global gates as a bit string");
  add(app, "--limit", f.limit, "Largest space enumerate will list");
  add(app, "--dot", f.dot, "Write a Graphviz file of the decoded architecture");
  add(app, "--checkpoint", f.checkpoint, "Controller checkpoint");
  add(app, "--bank", f.bank, "Weight-bank checkpoint");
  add(app, "--split", f.split, "Dataset split for eval: validation or train");
  add(app, "--pred", f.pred, "Prediction images (PNM) for eval");
  add(app, "--target", f.target, "Target images (PNM) for eval");
}

RunConfig merge(const Flags& f) {
  RunConfig c = profile_defaults(f.profile);
  auto set = [](auto& field, const auto& value) {
    if (value) field = *value;
  };
  set(c.seed, f.seed);
  if (f.out) c.out_dir = *f.out;
  set(c.data_source, f.data);
  c.deterministic = f.deterministic;

  auto& s = c.space;
  set(s.num_blocks, f.num_blocks);
  set(s.mix_nodes, f.mix_nodes);
  set(s.feature_channels, f.channels);
  set(s.scale, f.scale);
  if (f.fusion_opt->count() > 0) s.fusion_search = f.fusion;
  if (f.local_residual_opt->count() > 0) s.local_residual = f.local_residual;
  if (!f.ops.empty()) {
    s.op_list.clear();
    for (const auto& name : f.ops) s.op_list.push_back(parse_op(name));
    if (f.num_ops && *f.num_ops != static_cast<int>(s.op_list.size()))
      throw ValidationError("--K differs from the length of --ops");
    s.num_ops = static_cast<int>(s.op_list.size());
  } else if (f.num_ops) {
    const auto defaults = default_op_list();
    if (*f.num_ops < 1 || *f.num_ops > static_cast<int>(defaults.size()))
      throw ValidationError("--K must be in [1, " + std::to_string(defaults.size()) + "] without --ops");
    s.num_ops = *f.num_ops;
    s.op_list.assign(defaults.begin(), defaults.begin() + s.num_ops);
  }

  auto& t = c.trainer;
  set(t.alpha, f.alpha);
  set(t.child_lr, f.child_lr);
  set(t.controller_lr, f.controller_lr);
  set(t.child_steps_per_epoch, f.child_steps);
  set(t.controller_steps_per_epoch, f.controller_steps);
  set(t.epochs, f.epochs);
  set(t.monte_carlo_samples, f.mc_samples);
  set(t.controller_samples, f.controller_samples);
  set(t.baseline_decay, f.baseline_decay);
  if (f.baseline_init) t.baseline_init = f.baseline_init;
  if (f.no_baseline) t.use_baseline = false;
  set(t.lr_halving_interval, f.lr_halving);
  set(t.candidate_pool, f.pool);
  if (f.reward) t.reward_mode = parse_reward_mode(*f.reward);
  if (f.surrogate_profile) t.surrogate_profile = parse_surrogate_profile(*f.surrogate_profile);
  set(t.surrogate_constant, f.surrogate_constant);
  set(t.batch_size, f.batch);
  set(t.patch_size, f.patch);
  if (f.no_augment) t.augment = false;
  set(t.validation_subset, f.val_subset);
  set(t.final_steps, f.final_steps);
  set(t.final_lr, f.final_lr);
  set(t.final_lr_halving_interval, f.final_halving);
  set(t.eval_interval, f.eval_interval);

  set(c.controller.hidden_size, f.hidden);
  if (f.init_scale) {
    c.controller.init_scale = *f.init_scale;
    c.bank_init_scale = *f.init_scale;
  }
  c.dataset.scale = s.scale;
  set(c.dataset.train_images, f.train_images);
  set(c.dataset.validation_images, f.val_images);
  set(c.dataset.image_size, f.image_size);
  c.check();
  return c;
}

std::vector<std::uint8_t> parse_bits(const std::string& flag, const std::string& text) {
  std::vector<std::uint8_t> bits;
  for (char ch : text) {
    if (ch == ',' || ch == ' ') continue;
    if (ch != '0' && ch != '1') throw UsageError(flag + ": expected a string of 0 and 1, got '" + text + "'");
    bits.push_back(ch == '1' ? 1 : 0);
  }
  return bits;
}

ArchitectureSequence arch_from_flags(const RunConfig& c, const Flags& f) {
  if (f.digits.empty()) throw UsageError("--digits is required");
  ArchitectureSequence arch = decode_decimal(f.digits, c.space);
  if (c.space.fusion_search) {
    if (f.global_bits) arch.global_fusion = parse_bits("--global-fusion", *f.global_bits);
    if (f.local_bits) arch.local_fusion = parse_bits("--local-fusion", *f.local_bits);
  } else if (f.global_bits || f.local_bits) {
    throw UsageError("--global-fusion/--local-fusion need --fusion");
  }
  require_valid(arch, c.space);
  return arch;
}

Dataset load_data(const RunConfig& c) {
  try {
    return load_dataset(c.resolved_data_source(), c.dataset);
  } catch (const DataError& e) {
    throw UsageError(std::string("--data: ") + e.what());
  }
}

nc::Checkpoint load_named(const std::string& flag, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw UsageError(flag + ": no checkpoint at " + path.string());
  try {
    return nc::load_checkpoint(path);
  } catch (const CheckpointError& e) {
    throw UsageError(flag + ": " + e.what());
  }
}

SharedWeightBank load_bank(const RunConfig& c, const std::filesystem::path& path) {
  const nc::Checkpoint ckpt = load_named("--bank", path);
  if (ckpt.meta.value("kind", "") != "bank") throw UsageError("--bank: " + path.string() + " is not a weight bank");
  SharedWeightBank bank(config_from_json(ckpt.meta.at("space")), 0, c.bank_init_scale);
  nc::restore(bank.store(), ckpt);
  return bank;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error("cannot write " + path.string());
  file << text;
}

json candidate_json(const ArchitectureSequence& arch, const SearchSpaceConfig& space) {
  json j = {{"digits", encode_decimal(arch, space)}};
  if (space.fusion_search) {
    j["global_fusion"] = bits_string(arch.global_fusion);
    j["local_fusion"] = bits_string(arch.local_fusion);
  }
  return j;
}

int cmd_search(RunConfig c, bool force_surrogate, std::ostream& out) {
  if (force_surrogate) c.trainer.reward_mode = RewardMode::kSurrogate;
  const bool psnr_mode = c.trainer.reward_mode == RewardMode::kPsnr;
  std::optional<Dataset> data;
  std::optional<SharedWeightBank> bank;
  if (psnr_mode) {
    data = load_data(c);
    if (data->validation.empty()) throw UsageError("--data: the source has no validation images");
    bank.emplace(c.space, c.stream_seed("bank-init"), c.bank_init_scale);
  }
  Controller controller(c.space, {c.controller.hidden_size, c.controller.init_scale, c.stream_seed("controller-init")});
  const std::uint64_t search_seed = c.stream_seed("search");
  const SearchResult result = search(controller, bank ? &*bank : nullptr, data ? &*data : nullptr, c.trainer,
                                     search_seed, SearchOutputs{c.out_dir, c.deterministic});

  json report = {{"config", c.to_json()},
                 {"epochs_run", result.epochs_run},
                 {"history_size", result.history.size()},
                 {"best", result.best ? record_to_json(*result.best, c.space) : json(nullptr)},
                 {"selected", nullptr}};
  if (result.epochs_run > 0) {
    RewardFn reward = psnr_mode ? RewardFn([&](const ArchitectureSequence& arch) {
      return compute_reward(arch, *bank, data->validation, c.trainer);
    })
                                : surrogate_reward_fn(c.space, c.trainer, search_surrogate_seed(search_seed));
    Rng rng(c.stream_seed("select"));
    report["selected"] = record_to_json(select_best(controller, reward, c.trainer.candidate_pool, rng), c.space);
  }
  write_text(c.out_dir / "report.json", report.dump(2) + "\n");
  out << json{{"report", (c.out_dir / "report.json").string()},
              {"epochs_run", result.epochs_run},
              {"selected", report["selected"]}}
             .dump()
      << "\n";
  return kExitOk;
}

int cmd_sample(const RunConfig& c, const Flags& f, std::ostream& out) {
  const std::filesystem::path path = f.checkpoint ? std::filesystem::path(*f.checkpoint) : c.out_dir / "controller_latest.ckpt";
  const nc::Checkpoint ckpt = load_named("--checkpoint", path);
  Controller controller = [&] {
    try {
      return Controller::from_meta(ckpt.meta);
    } catch (const CheckpointError& e) {
      throw UsageError(std::string("--checkpoint: ") + e.what());
    }
  }();
  nc::restore(controller.params(), ckpt);
  const SearchSpaceConfig& space = controller.space();

  Rng rng(c.stream_seed("sample"));
  std::vector<ArchitectureSequence> candidates;
  std::vector<double> log_probs;
  for (int i = 0; i < c.trainer.candidate_pool; ++i) {
    const SampleTrace trace = controller.sample(rng);
    json line = candidate_json(trace.arch, space);
    line["log_prob"] = trace.log_prob;
    out << line.dump() << "\n";
    candidates.push_back(trace.arch);
    log_probs.push_back(trace.log_prob);
  }

  std::string selected_by;
  RewardFn reward;
  std::optional<SharedWeightBank> bank;
  std::optional<Dataset> data;
  if (c.trainer.reward_mode == RewardMode::kSurrogate) {
    selected_by = "surrogate";
    reward = surrogate_reward_fn(space, c.trainer, search_surrogate_seed(c.stream_seed("search")));
  } else if (f.bank) {
    selected_by = "psnr";
    bank.emplace(load_bank(c, *f.bank));
    if (!(bank->config() == space)) throw UsageError("--bank: bank and controller disagree on the search space");
    data = load_data(c);
    reward = [&](const ArchitectureSequence& arch) { return compute_reward(arch, *bank, data->validation, c.trainer); };
  } else {
    selected_by = "log_prob";
    reward = [&](const ArchitectureSequence& arch) {
      const auto it = std::find(candidates.begin(), candidates.end(), arch);
      return make_record(arch, space, log_probs[static_cast<std::size_t>(it - candidates.begin())], 0.0);
    };
  }
  const RewardRecord best = best_of(candidates, reward, space);
  json line = candidate_json(best.arch, space);
  line["score"] = best.reward;
  out << json{{"best", line}, {"selected_by", selected_by}}.dump() << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& c, const Flags& f, std::ostream& out) {
  const ArchitectureSequence arch = arch_from_flags(c, f);
  const Dataset data = load_data(c);
  if (data.train.empty() || data.validation.empty()) throw UsageError("--data: training needs train and validation images");
  SharedWeightBank bank(c.space, c.stream_seed("bank-init"), c.bank_init_scale);
  std::filesystem::create_directories(c.out_dir);
  std::ofstream history(c.out_dir / "train_history.csv", std::ios::binary | std::ios::trunc);
  history << history_csv_header();
  const FinalTrainResult result = final_train(arch, bank, data, c.trainer, c.stream_seed("final-train"),
                                              [&](const HistoryRow& row) { history << history_csv_row(row) << std::flush; });
  json meta = {{"kind", "bank"}, {"space", config_to_json(c.space)}, {"arch", arch_to_json(arch, c.space)}};
  nc::save_checkpoint(c.out_dir / "final_bank.ckpt", nc::snapshot(bank.store(), meta), c.deterministic);
  write_text(c.out_dir / "architecture.json", arch_to_json(arch, c.space).dump(2) + "\n");
  out << json{{"steps", c.trainer.final_steps},
              {"bicubic_psnr", result.bicubic_psnr},
              {"final_validation_psnr", result.final_validation_psnr},
              {"best_validation_psnr", result.history.back().best_validation_psnr},
              {"history", (c.out_dir / "train_history.csv").string()}}
             .dump()
      << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& c, const Flags& f, std::ostream& out) {
  if (!f.pred.empty() || !f.target.empty()) {
    if (f.pred.size() != f.target.size()) throw UsageError("--pred and --target need the same number of files");
    out << "name,psnr\n";
    for (std::size_t i = 0; i < f.pred.size(); ++i) {
      Image a, b;
      try {
        a = load_pnm(f.pred[i]);
        b = load_pnm(f.target[i]);
      } catch (const FormatError& e) {
        throw UsageError(std::string("--pred/--target: ") + e.what());
      }
      out << f.pred[i] << "," << format_double(psnr(a, b)) << "\n";
    }
    return kExitOk;
  }
  const Dataset data = load_data(c);
  const std::string split = f.split.value_or("validation");
  if (split != "validation" && split != "train") throw UsageError("--split must be validation or train");
  const auto& pairs = split == "train" ? data.train : data.validation;
  if (pairs.empty()) throw UsageError("--data: the " + split + " split is empty");
  out << "model,psnr\n";
  out << "bicubic," << format_double(bicubic_psnr(pairs, data.scale)) << "\n";
  if (f.bank) {
    const SharedWeightBank bank = load_bank(c, *f.bank);
    ArchitectureSequence arch;
    if (!f.digits.empty()) {
      RunConfig with_space = c;
      with_space.space = bank.config();
      arch = arch_from_flags(with_space, f);
    } else {
      const nc::Checkpoint ckpt = nc::load_checkpoint(*f.bank);
      if (!ckpt.meta.contains("arch")) throw UsageError("--digits is required for a bank without an architecture");
      arch = arch_from_json(ckpt.meta["arch"], bank.config()).arch;
    }
    out << "network," << format_double(evaluate_psnr(arch, bank, pairs)) << "\n";
  }
  return kExitOk;
}

int cmd_count(const RunConfig& c, const Flags& f, std::ostream& out) {
  const ArchitectureSequence arch = f.digits.empty() ? all_ones_architecture(c.space) : arch_from_flags(c, f);
  const ParamBreakdown b = count_params(arch, c.space);
  out << json{{"digits", encode_decimal(arch, c.space)},
              {"total", b.total},
              {"max_params", max_params(c.space)},
              {"cb", complexity_penalty(arch, c.space)},
              {"breakdown",
               {{"sfenet", b.sfenet},
                {"dnb_edges", b.dnb_edges},
                {"channel_attention", b.channel_attention},
                {"local_fusion", b.local_fusion},
                {"input_adapters", b.input_adapters},
                {"global_fusion", b.global_fusion},
                {"upnet", b.upnet}}}}
             .dump()
      << "\n";
  return kExitOk;
}

int cmd_enumerate(const RunConfig& c, const Flags& f, std::ostream& out) {
  const std::int64_t limit = f.limit.value_or(std::int64_t{1} << 16);
  if (limit < 0) throw UsageError("--limit must be >= 0");
  for (const auto& arch : enumerate_space(c.space, static_cast<std::uint64_t>(limit)))
    out << candidate_json(arch, c.space).dump() << "\n";
  return kExitOk;
}

int cmd_decode(const RunConfig& c, const Flags& f, std::ostream& out) {
  if (f.digits.empty()) throw UsageError("--digits is required");
  json bits = json::array();
  for (int d : f.digits) bits.push_back(digit_bits(d, c.space.num_ops));
  json doc = {{"digits", f.digits}, {"bits", bits}};
  if (static_cast<int>(f.digits.size()) == c.space.mix_blocks()) {
    const ArchitectureSequence arch = arch_from_flags(c, f);
    doc["architecture"] = arch_to_json(arch, c.space);
    if (f.dot) write_text(*f.dot, to_dot(arch, c.space));
  } else if (f.dot) {
    throw UsageError("--dot needs a complete digit list of " + std::to_string(c.space.mix_blocks()) + " digits");
  }
  out << doc.dump() << "\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural architecture search for single-image super-resolution", "deconas"};
  app.set_config("--config", "", "INI or JSON file of flag values")->envname("DECONAS_CONFIG");
  app.config_formatter(std::make_shared<AutoConfig>());
  app.allow_config_extras(false);
  app.require_subcommand(1, 1);

  Flags flags;
  register_flags(app, flags);
  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"search", "Alternate child and controller training"},
      {"surrogate-search", "Search against the surrogate reward"},
      {"sample", "Sample candidates from a controller checkpoint"},
      {"train", "Train one architecture from scratch"},
      {"eval", "PSNR of bicubic, a trained bank, or image files"},
      {"count", "Parameter breakdown of an architecture"},
      {"enumerate", "List every architecture of a small space"},
      {"decode", "Expand decimal digits into operation bits"},
  };
  for (const auto& cmd : commands) app.add_subcommand(cmd.name, cmd.help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const RunConfig config = merge(flags);
    if (name == "search") return cmd_search(config, false, out);
    if (name == "surrogate-search") return cmd_search(config, true, out);
    if (name == "sample") return cmd_sample(config, flags, out);
    if (name == "train") return cmd_train(config, flags, out);
    if (name == "eval") return cmd_eval(config, flags, out);
    if (name == "count") return cmd_count(config, flags, out);
    if (name == "enumerate") return cmd_enumerate(config, flags, out);
    return cmd_decode(config, flags, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const LengthError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const RangeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SpaceTooLargeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace deconas::cli
