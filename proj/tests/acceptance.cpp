// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli/commands.hpp"
#include "deconas/arch_space.hpp"
#include "deconas/child_net.hpp"
#include "deconas/controller.hpp"
#include "deconas/errors.hpp"
#include "deconas/param_count.hpp"
#include "deconas/trainer.hpp"
#include "json.hpp"
#include "support/experiments.hpp"
#include "support/suites.hpp"

using namespace deconas;
using namespace deconas::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(std::vector<std::string> args, std::string& out, std::string& err) {
  args.insert(args.begin(), "deconas");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
  out = o.str();
  err = e.str();
  return code;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("deconas_acceptance_" + name);
  fs::remove_all(dir);
  return dir;
}

Outcome encoding() {
  bool ok = digit_bits(4, 3) == std::vector<std::uint8_t>{1, 0, 0} && digit_bits(6, 3) == std::vector<std::uint8_t>{1, 1, 0};
  const auto paper = make_space(4, 4, 3, 64, 2, false);
  const std::vector<int> published{7, 6, 4, 3, 0, 2, 2, 3, 4, 1};
  const auto arch = decode_decimal(published, paper);
  ok = ok && arch.mix_bits.size() == 30 && validate(arch, paper).ok() && encode_decimal(arch, paper) == published;
  Rng rng(1);
  int failures = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int m = 1 + static_cast<int>(rng() % 4);
    const int k = 1 + static_cast<int>(rng() % 3);
    const auto c = make_space(1 + static_cast<int>(rng() % 4), m, k, 8, 2, false);
    std::vector<int> digits(static_cast<std::size_t>(c.mix_blocks()));
    for (auto& d : digits) d = static_cast<int>(rng() % (1u << k));
    failures += encode_decimal(decode_decimal(digits, c), c) == digits ? 0 : 1;
  }
  return {ok && failures == 0, "4->100, 6->110, published 30-bit genome valid, round-trip failures " +
                                   std::to_string(failures) + "/10000"};
}

Outcome parameter_count() {
  std::int64_t checked = 0, mismatches = 0;
  for (bool fusion : {false, true}) {
    const auto c = make_space(1, 2, 2, 4, 2, fusion);
    const SharedWeightBank bank(c, 3);
    for (const auto& arch : enumerate_space(c, 1 << 12)) {
      ++checked;
      mismatches += build(arch, c, bank).active_value_count() == count_params(arch, c).total ? 0 : 1;
    }
  }
  const auto paper = make_space(4, 4, 3, 64, 2, false);
  const auto total = count_params(decode_decimal(std::vector<int>{7, 6, 4, 3, 0, 2, 2, 3, 4, 1}, paper), paper).total;
  const bool in_band = total >= 1370000 && total <= 2056000;
  return {mismatches == 0 && in_band, std::to_string(checked) + " architectures, " + std::to_string(mismatches) +
                                          " mismatches; published total " + std::to_string(total) +
                                          " (band 1370000..2056000)"};
}

Outcome gradients() {
  double worst = 0.0;
  std::string worst_name;
  int cases = 0;
  for (const auto& gc : gradient_cases()) {
    Rng rng(derive_seed(20, gc.name));
    double w = 0.0;
    for (int t = 0; t < 100; ++t) w = std::max(w, gc.trial(rng));
    if (w >= worst) {
      worst = w;
      worst_name = gc.name;
    }
    ++cases;
  }
  return {worst < 1e-4, std::to_string(cases) + " cases x 100 trials, worst relative error " + fmt("%.2e", worst) +
                            " (" + worst_name + ")"};
}

Outcome gating() {
  Rng rng(9);
  const auto r = gating_equivalence(rng, 100);
  const bool ok = r.mix_node < 1e-6 && r.local_fusion < 1e-6 && r.global_fusion < 1e-6 && r.removal == 0.0;
  return {ok, fmt("100 patterns, max diff mix %.1e local %.1e global %.1e, removal %.1e", r.mix_node, r.local_fusion,
                  r.global_fusion, r.removal)};
}

Outcome policy() {
  double worst_norm = 0.0;
  for (bool fusion : {false, true}) {
    const auto space = make_space(1, 2, fusion ? 2 : 1, 4, 2, fusion);
    for (double scale : {0.02, 1.0, 4.0}) {
      const Controller controller(space, {.hidden_size = 16, .init_scale = scale, .seed = 5});
      double total = 0.0;
      for (const auto& arch : enumerate_space(space, 1 << 12)) total += std::exp(controller.log_prob(arch));
      worst_norm = std::max(worst_norm, std::abs(total - 1.0));
    }
  }

  const auto space = make_space(2, 2, 2, 4, 2, true);
  const Controller controller(space, {.hidden_size = 16, .init_scale = 2.0, .seed = 6});
  Rng rng(7);
  const int t = space.decision_count();
  std::vector<double> ones(static_cast<std::size_t>(t)), expected(ones), variance(ones);
  int replay_mismatches = 0;
  for (int n = 0; n < 10000; ++n) {
    const auto trace = controller.sample(rng);
    const auto bits = flatten_decisions(trace.arch, space);
    std::size_t i = 0;
    for (const auto& step : trace.logits)
      for (double l : step) {
        const double p = 1.0 / (1.0 + std::exp(-l));
        ones[i] += bits[i];
        expected[i] += p;
        variance[i] += p * (1.0 - p);
        ++i;
      }
    if (n < 100) replay_mismatches += controller.replay(trace.arch).log_prob == trace.log_prob ? 0 : 1;
  }
  double worst_sigma = 0.0;
  for (std::size_t i = 0; i < ones.size(); ++i)
    worst_sigma = std::max(worst_sigma, std::abs(ones[i] - expected[i]) / std::sqrt(variance[i]));
  const bool ok = worst_norm <= 1e-9 && worst_sigma <= 3.0 && replay_mismatches == 0;
  return {ok, fmt("max |sum P - 1| %.1e, worst frequency deviation %.2f sigma over 10000 draws, ", worst_norm,
                  worst_sigma) +
                  "replay mismatches " + std::to_string(replay_mismatches) + "/100"};
}

Outcome convergence() {
  int hits = 0;
  double worst_percentile = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto run = convergence_run(seed);
    hits += run.hit();
    worst_percentile = std::min(worst_percentile, run.percentile);
  }
  int toy = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) toy += toy_steps_to(toy_trajectory(seed, 200, 0.01), 0.95) >= 0;
  return {hits >= 18 && toy >= 19, std::to_string(hits) + "/20 runs select the brute-force argmax (worst percentile " +
                                       fmt("%.3f", worst_percentile) + "), toy " + std::to_string(toy) +
                                       "/20 reach P > 0.95 within 200 steps"};
}

Outcome complexity() {
  bool ok = true;
  double mean2 = 0.0, mean0 = 0.0, p_min = 1.0;
  const auto zero = all_zero_architecture(complexity_space());
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto a2 = complexity_run(seed, 2.0);
    const auto a0 = complexity_run(seed, 0.0);
    ok = ok && a2.mean_params < a0.mean_params && a2.mode == zero && a2.p_all_zero > 0.5;
    mean2 += a2.mean_params / 5.0;
    mean0 += a0.mean_params / 5.0;
    p_min = std::min(p_min, a2.p_all_zero);
  }
  return {ok, fmt("mean sampled params alpha=2 %.0f vs alpha=0 %.0f over 5 seeds; alpha=2 mode all-zero, min P(all-zero) %.2f",
                  mean2, mean0, p_min)};
}

Outcome end_to_end() {
  const auto dir = fresh_dir("train");
  std::string out, err;
  const int code = run_cli({"train", "--profile", "desk", "--digits", "7,7,7", "--seed", "0", "--out", dir.string()},
                           out, err);
  if (code != 0) return {false, "train exited " + std::to_string(code) + ": " + err};
  const auto report = nlohmann::json::parse(out);
  const double bicubic = report["bicubic_psnr"].get<double>();
  const double best = report["best_validation_psnr"].get<double>();
  const auto steps = report["steps"].get<std::int64_t>();
  fs::remove_all(dir);
  return {steps <= 2000 && best >= bicubic + 0.5,
          fmt("desk 7,7,7 after %.0f steps: best validation %.2f dB vs bicubic %.2f dB (margin %.2f)",
              static_cast<double>(steps), best, bicubic, best - bicubic)};
}

Outcome isolation() {
  Rng rng(14);
  std::int64_t leaks = 0;
  for (bool fusion : {false, true}) {
    const auto c = make_space(2, 3, 3, 3, 2, fusion);
    SharedWeightBank bank(c, 15);
    randomize_bank(bank, rng);
    for (int t = 0; t < 20; ++t) {
      const auto net = build(random_arch(c, rng), c, bank);
      const std::set<std::string> active(net.active_keys().begin(), net.active_keys().end());
      bank.store().zero_grad();
      const nc::Shape in{2, 3, 5, 5}, hr{2, 3, 10, 10};
      nc::backward(nc::l1_loss(net.forward(Tensor::constant(in, random_values(rng, shape_numel(in), 0.0, 1.0))),
                               Tensor::constant(hr, random_values(rng, shape_numel(hr), 0.0, 1.0))));
      for (const auto& e : bank.store().entries())
        if (!active.count(e.name))
          for (double g : e.param.grad()) leaks += g != 0.0;
      bank.store().zero_grad();
    }
  }

  const auto c = make_space(2, 2, 3, 4, 2, false);
  int identity_failures = 0;
  {
    const SharedWeightBank bank(c, 16);
    for (int t = 0; t < 20; ++t) {
      const auto a = build(random_arch(c, rng), c, bank);
      const auto b = build(random_arch(c, rng), c, bank);
      const std::set<std::string> ka(a.active_keys().begin(), a.active_keys().end());
      for (const auto& key : b.active_keys())
        if (ka.count(key)) identity_failures += a.bank().param(key).id() == b.bank().param(key).id() ? 0 : 1;
    }
  }

  // Training A on its searchable keys moves B iff they share one of them.
  const auto fixed_keys = active_keys(all_zero_architecture(c), c);
  const std::set<std::string> fixed(fixed_keys.begin(), fixed_keys.end());
  auto searchable = [&](const ArchitectureSequence& arch) {
    std::set<std::string> out;
    for (const auto& key : active_keys(arch, c))
      if (!fixed.count(key)) out.insert(key);
    return out;
  };
  std::vector<std::pair<ArchitectureSequence, ArchitectureSequence>> pairs;
  for (int t = 0; t < 30; ++t) pairs.emplace_back(random_arch(c, rng), random_arch(c, rng));
  auto node1 = all_zero_architecture(c), node2 = node1;
  node1.mix_bits[mix_bit_index(1, 0, 0, c.num_ops)] = 1;
  node2.mix_bits[mix_bit_index(2, 0, 1, c.num_ops)] = 1;
  pairs.emplace_back(node1, node2);
  pairs.emplace_back(node2, node1);
  pairs.emplace_back(all_zero_architecture(c), all_ones_architecture(c));
  pairs.emplace_back(node1, all_ones_architecture(c));
  const nc::Shape lr_shape{2, 3, 6, 6}, hr_shape{2, 3, 12, 12};
  const Batch batch{Tensor::constant(lr_shape, random_values(rng, shape_numel(lr_shape), 0.0, 1.0)),
                    Tensor::constant(hr_shape, random_values(rng, shape_numel(hr_shape), 0.0, 1.0))};
  int agree = 0, shared_pairs = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [a, b] = pairs[i];
    SharedWeightBank bank(c, 100 + i);
    randomize_bank(bank, rng);
    open_attention(bank);
    const auto net_b = build(b, c, bank);
    auto eval_b = [&] {
      nc::NoGradGuard guard;
      return net_b.forward(batch.lr);
    };
    const Tensor before = eval_b();
    const auto keys_a = searchable(a);
    auto grads = child_gradient(bank, std::span(&a, 1), batch).gradients;
    std::erase_if(grads, [&](const auto& kv) { return !keys_a.count(kv.first); });
    if (!grads.empty()) nc::adam_step(bank.store(), grads, {.lr = 1e-2});
    const bool moved = max_abs_diff(before, eval_b()) > 0.0;
    const auto keys_b = searchable(b);
    const bool shared = std::any_of(keys_a.begin(), keys_a.end(), [&](const auto& k) { return keys_b.count(k) > 0; });
    shared_pairs += shared;
    agree += moved == shared;
  }
  const int total = static_cast<int>(pairs.size());
  return {leaks == 0 && identity_failures == 0 && agree == total,
          std::to_string(leaks) + " nonzero inactive gradients over 40 architectures, " +
              std::to_string(identity_failures) + " storage-identity failures, train-A-moves-B agrees with key sharing in " +
              std::to_string(agree) + "/" + std::to_string(total) + " pairs (" + std::to_string(shared_pairs) +
              " sharing)"};
}

Outcome determinism() {
  std::string logs[2];
  for (int run = 0; run < 2; ++run) {
    const auto dir = fresh_dir("determinism" + std::to_string(run));
    std::string out, err;
    const int code = run_cli({"search", "--profile", "desk", "--reward", "surrogate", "--seed", "7", "--out", dir.string()},
                             out, err);
    if (code != 0) return {false, "search exited " + std::to_string(code) + ": " + err};
    logs[run] = read_text(dir / "reward_log.csv");
    fs::remove_all(dir);
  }
  const auto rows = std::count(logs[0].begin(), logs[0].end(), '\n') - 1;
  return {!logs[0].empty() && logs[0] == logs[1],
          std::to_string(rows) + " rows, reward CSVs " + (logs[0] == logs[1] ? "byte-identical" : "differ")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"encoding fidelity", encoding},
      {"parameter-count oracle", parameter_count},
      {"gradient suite", gradients},
      {"gating equivalence", gating},
      {"policy correctness", policy},
      {"REINFORCE convergence", convergence},
      {"complexity-penalty effect", complexity},
      {"end-to-end desk SR", end_to_end},
      {"weight-sharing isolation", isolation},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += outcome.pass ? 0 : 1;
    std::printf("criterion %zu %s: %s | %s | %.1f s\n", i + 1, criteria[i].first.c_str(), outcome.pass ? "PASS" : "FAIL",
                outcome.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
