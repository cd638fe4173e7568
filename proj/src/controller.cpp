#include "deconas/controller.hpp"

#include <algorithm>

#include "deconas/arch_io.hpp"
#include "deconas/errors.hpp"
#include "deconas/nc/ops.hpp"

namespace deconas {

namespace {

using nc::Tensor;

int chunk_value(std::span<const std::uint8_t> bits) {
  int value = 0;
  for (auto b : bits) value = (value << 1) | b;
  return value;
}

nc::LstmParams lstm_params(const nc::ParamStore& store, int layer) {
  const std::string prefix = "lstm" + std::to_string(layer) + ".";
  return {store.get(prefix + "wx"), store.get(prefix + "wh"), store.get(prefix + "b")};
}

}  // namespace

Controller::Controller(SearchSpaceConfig space, ControllerOptions options)
    : space_(std::move(space)), options_(options) {
  space_.check();
  if (options_.hidden_size < 1) throw ValidationError("controller hidden size must be >= 1");
  const int h = options_.hidden_size;
  Rng rng(options_.seed);
  for (int layer = 0; layer < 2; ++layer) {
    const std::string prefix = "lstm" + std::to_string(layer) + ".";
    add_weight(prefix + "wx", {4 * h, h}, h, rng);
    add_weight(prefix + "wh", {4 * h, h}, h, rng);
    params_.add(prefix + "b", {4 * h}, std::vector<double>(static_cast<std::size_t>(4 * h), 0.0));
  }
  params_.add("start", {1, h}, std::vector<double>(static_cast<std::size_t>(h), 0.0));
  const int vocab = 1 << space_.num_ops;
  add_weight("mix_embed", {vocab, h}, vocab, rng);
  add_weight("mix_head.w", {space_.num_ops, h}, h, rng);
  params_.add("mix_head.b", {space_.num_ops}, std::vector<double>(static_cast<std::size_t>(space_.num_ops), 0.0));
  if (space_.fusion_search) {
    const int n = space_.num_blocks;
    const int m = space_.mix_nodes;
    add_weight("global_head.w", {n, h}, h, rng);
    params_.add("global_head.b", {n}, std::vector<double>(static_cast<std::size_t>(n), 0.0));
    add_weight("local_head.w", {m, h}, h, rng);
    params_.add("local_head.b", {m}, std::vector<double>(static_cast<std::size_t>(m), 0.0));
    int rows = 0;
    for (int start = 0; start < n; start += kFusionChunkBits) {
      global_chunk_offsets_.push_back(rows);
      rows += 1 << std::min(kFusionChunkBits, n - start);
    }
    add_weight("global_embed", {rows, h}, rows, rng);
  }
}

void Controller::add_weight(const std::string& name, nc::Shape shape, int fan_in, Rng& rng) {
  const auto n = nc::shape_numel(shape);
  params_.add(name, std::move(shape), nc::variance_scaled(rng, n, fan_in, options_.init_scale));
}

int Controller::step_count() const { return space_.mix_blocks() + (space_.fusion_search ? 2 : 0); }

Controller::Rollout Controller::run(const ArchitectureSequence* forced, Rng* rng) const {
  const int h = options_.hidden_size;
  const nc::LstmParams layer0 = lstm_params(params_, 0);
  const nc::LstmParams layer1 = lstm_params(params_, 1);
  Tensor h0 = Tensor::zeros({1, h}), c0 = Tensor::zeros({1, h});
  Tensor h1 = Tensor::zeros({1, h}), c1 = Tensor::zeros({1, h});
  Tensor input = params_.get("start");

  Rollout out;
  out.arch = all_ones_architecture(space_);
  std::optional<Tensor> total;

  // One controller step: advance both layers, read `width` logits, pick bits.
  auto step = [&](const Tensor& head_w, const Tensor& head_b, std::span<const std::uint8_t> forced_bits) {
    std::tie(h0, c0) = nc::lstm_cell(input, h0, c0, layer0);
    std::tie(h1, c1) = nc::lstm_cell(h0, h1, c1, layer1);
    const Tensor logits = nc::linear(h1, head_w, head_b);
    std::vector<std::uint8_t> bits(logits.numel());
    if (forced) {
      std::copy(forced_bits.begin(), forced_bits.end(), bits.begin());
    } else {
      const Tensor probs = [&] {
        nc::NoGradGuard no_grad;
        return nc::sigmoid(logits);
      }();
      for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = uniform01(*rng) < probs.values()[i] ? 1 : 0;
    }
    const Tensor lp = nc::sum(nc::bernoulli_log_prob(logits, bits));
    total = total ? nc::add(*total, lp) : lp;
    out.logits.emplace_back(logits.values().begin(), logits.values().end());
    return bits;
  };

  const auto k_ops = static_cast<std::size_t>(space_.num_ops);
  const Tensor& mix_w = params_.get("mix_head.w");
  const Tensor& mix_b = params_.get("mix_head.b");
  const Tensor& mix_embed = params_.get("mix_embed");
  for (int block = 0; block < space_.mix_blocks(); ++block) {
    const auto offset = static_cast<std::size_t>(block) * k_ops;
    std::span<const std::uint8_t> forced_bits;
    if (forced) forced_bits = std::span<const std::uint8_t>(forced->mix_bits).subspan(offset, k_ops);
    const auto bits = step(mix_w, mix_b, forced_bits);
    std::copy(bits.begin(), bits.end(), out.arch.mix_bits.begin() + static_cast<std::ptrdiff_t>(offset));
    const int row = chunk_value(bits);
    input = nc::embedding_sum(mix_embed, std::span<const int>(&row, 1));
  }

  if (space_.fusion_search) {
    const auto global = step(params_.get("global_head.w"), params_.get("global_head.b"),
                             forced ? std::span<const std::uint8_t>(forced->global_fusion) : std::span<const std::uint8_t>{});
    out.arch.global_fusion = global;
    std::vector<int> rows;
    for (std::size_t c = 0; c < global_chunk_offsets_.size(); ++c) {
      const auto begin = c * kFusionChunkBits;
      const auto width = std::min<std::size_t>(kFusionChunkBits, global.size() - begin);
      rows.push_back(global_chunk_offsets_[c] + chunk_value(std::span<const std::uint8_t>(global).subspan(begin, width)));
    }
    input = nc::embedding_sum(params_.get("global_embed"), rows);
    out.arch.local_fusion = step(params_.get("local_head.w"), params_.get("local_head.b"),
                                 forced ? std::span<const std::uint8_t>(forced->local_fusion) : std::span<const std::uint8_t>{});
  }
  out.log_prob = *total;
  return out;
}

SampleTrace Controller::sample(Rng& rng) const {
  nc::NoGradGuard no_grad;
  Rollout r = run(nullptr, &rng);
  return {std::move(r.arch), r.log_prob.item(), std::move(r.logits)};
}

SampleTrace Controller::replay(const ArchitectureSequence& arch) const {
  require_valid(arch, space_);
  nc::NoGradGuard no_grad;
  Rollout r = run(&arch, nullptr);
  return {std::move(r.arch), r.log_prob.item(), std::move(r.logits)};
}

double Controller::log_prob(const ArchitectureSequence& arch) const { return replay(arch).log_prob; }

nc::GradientMap Controller::policy_gradient(const SampleTrace& trace, double advantage) const {
  require_valid(trace.arch, space_);
  auto& store = const_cast<nc::ParamStore&>(params_);
  store.zero_grad();
  Rollout r = run(&trace.arch, nullptr);
  nc::backward(nc::scale(r.log_prob, -advantage));
  nc::GradientMap grads = store.gradients();
  store.zero_grad();
  return grads;
}

Tensor Controller::vocabulary_logits(const Tensor& hidden) const {
  return nc::linear(hidden, params_.get("mix_embed"));
}

nlohmann::json Controller::meta() const {
  return {{"kind", "controller"},
          {"space", config_to_json(space_)},
          {"hidden_size", options_.hidden_size},
          {"init_scale", options_.init_scale},
          {"seed", options_.seed}};
}

Controller Controller::from_meta(const nlohmann::json& meta) {
  if (meta.value("kind", "") != "controller") throw CheckpointError("checkpoint does not hold a controller");
  ControllerOptions options;
  options.hidden_size = meta.at("hidden_size").get<int>();
  options.init_scale = meta.value("init_scale", options.init_scale);
  options.seed = meta.value("seed", options.seed);
  return Controller(config_from_json(meta.at("space")), options);
}

}  // namespace deconas
