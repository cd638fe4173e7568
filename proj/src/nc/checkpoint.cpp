#include "deconas/nc/checkpoint.hpp"

#include <bit>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>

#include "deconas/errors.hpp"

namespace deconas::nc {

namespace {

constexpr char kMagic[8] = {'D', 'C', 'N', 'A', 'S', 'C', 'K', 'P'};
constexpr std::uint8_t kFloat64 = 1;

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&v, bytes, sizeof(T));
    return v;
  }
}

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename T>
  void scalar(T v) {
    v = to_little(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }
  void doubles(const std::vector<double>& v) {
    for (double d : v) scalar(d);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  template <typename T>
  T scalar() {
    T v;
    bytes(&v, sizeof(T));
    return to_little(v);
  }
  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (!in_) throw CheckpointError("checkpoint truncated");
  }
  std::vector<double> doubles(std::size_t n) {
    std::vector<double> v(n);
    for (auto& d : v) d = scalar<double>();
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace

Checkpoint snapshot(const ParamStore& store, nlohmann::json meta) {
  Checkpoint ckpt;
  ckpt.meta = std::move(meta);
  for (const auto& e : store.entries()) {
    ckpt.entries.push_back({e.name, e.param.shape(),
                            std::vector<double>(e.param.values().begin(), e.param.values().end()), true, e.adam});
  }
  return ckpt;
}

nlohmann::json manifest_json(const Checkpoint& checkpoint) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : checkpoint.entries) {
    entries.push_back({{"name", e.name},
                       {"shape", e.shape},
                       {"dtype", "float64"},
                       {"adam_step", e.has_adam ? nlohmann::json(e.adam.step) : nlohmann::json(nullptr)}});
  }
  return {{"format", "deconas-checkpoint"},
          {"version", kCheckpointVersion},
          {"meta", checkpoint.meta},
          {"entries", entries}};
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint, bool deterministic) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + path.string());
    Writer w(out);
    w.bytes(kMagic, sizeof(kMagic));
    w.scalar<std::uint32_t>(kCheckpointVersion);
    const std::string meta = checkpoint.meta.is_null() ? "{}" : checkpoint.meta.dump();
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(meta.size()));
    w.bytes(meta.data(), meta.size());
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(checkpoint.entries.size()));
    for (const auto& e : checkpoint.entries) {
      w.scalar<std::uint32_t>(static_cast<std::uint32_t>(e.name.size()));
      w.bytes(e.name.data(), e.name.size());
      w.scalar<std::uint8_t>(kFloat64);
      w.scalar<std::uint32_t>(static_cast<std::uint32_t>(e.shape.size()));
      for (int d : e.shape) w.scalar<std::uint64_t>(static_cast<std::uint64_t>(d));
      w.scalar<std::uint64_t>(e.values.size());
      w.doubles(e.values);
      w.scalar<std::uint8_t>(e.has_adam ? 1 : 0);
      if (e.has_adam) {
        w.scalar<std::int64_t>(e.adam.step);
        w.doubles(e.adam.first_moment);
        w.doubles(e.adam.second_moment);
      }
    }
    if (!out) throw CheckpointError("write failed for " + path.string());
  }
  auto manifest = manifest_json(checkpoint);
  if (!deterministic) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    manifest["created"] = buf;
  }
  std::ofstream mout(path.string() + ".json", std::ios::trunc);
  mout << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  Reader r(in);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw CheckpointError(path.string() + " is not a checkpoint");
  const auto version = r.scalar<std::uint32_t>();
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  std::string meta(r.scalar<std::uint32_t>(), '\0');
  r.bytes(meta.data(), meta.size());
  try {
    ckpt.meta = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint metadata: ") + e.what());
  }
  const auto count = r.scalar<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name.resize(r.scalar<std::uint32_t>());
    r.bytes(e.name.data(), e.name.size());
    if (r.scalar<std::uint8_t>() != kFloat64) throw CheckpointError("unsupported dtype for " + e.name);
    const auto rank = r.scalar<std::uint32_t>();
    if (rank > 8) throw CheckpointError("implausible rank for " + e.name);
    for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(static_cast<int>(r.scalar<std::uint64_t>()));
    const auto numel = r.scalar<std::uint64_t>();
    if (numel != shape_numel(e.shape)) throw CheckpointError("element count mismatch for " + e.name);
    e.values = r.doubles(numel);
    e.has_adam = r.scalar<std::uint8_t>() != 0;
    if (e.has_adam) {
      e.adam.step = r.scalar<std::int64_t>();
      e.adam.first_moment = r.doubles(numel);
      e.adam.second_moment = r.doubles(numel);
    }
    ckpt.entries.push_back(std::move(e));
  }
  return ckpt;
}

void restore(ParamStore& store, const Checkpoint& checkpoint) {
  if (checkpoint.entries.size() != store.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(checkpoint.entries.size()) +
                          " entries, store has " + std::to_string(store.size()));
  }
  for (const auto& e : checkpoint.entries) {
    if (!store.contains(e.name)) throw CheckpointError("checkpoint entry '" + e.name + "' not in store");
    if (store.get(e.name).shape() != e.shape) throw CheckpointError("shape mismatch for '" + e.name + "'");
  }
  for (const auto& e : checkpoint.entries) {
    auto& entry = store.entry(e.name);
    std::copy(e.values.begin(), e.values.end(), entry.param.mutable_values().begin());
    if (e.has_adam) entry.adam = e.adam;
  }
}

}  // namespace deconas::nc
