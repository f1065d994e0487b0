#include "aed/numerics/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace aed {
namespace {

constexpr char kMagic[8] = {'A', 'E', 'D', 'C', 'K', 'P', 'T', '\n'};

class Writer {
 public:
  template <class T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    bytes.insert(bytes.end(), raw, raw + sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  void put_reals(std::span<const double> xs) {
    put<std::uint64_t>(xs.size());
    for (double x : xs) put<double>(x);
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  template <class T>
  T get() {
    need(sizeof(T));
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::vector<double> get_reals() {
    const auto n = get<std::uint64_t>();
    need(n * sizeof(double));
    std::vector<double> xs(n);
    for (auto& x : xs) x = get<double>();
    return xs;
  }
  void get_raw(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const Network& Checkpoint::network(const std::string& name) const {
  for (const auto& [n, net] : networks) {
    if (n == name) return net;
  }
  throw CheckpointError("checkpoint has no network named '" + name + "'");
}

const std::vector<double>& Checkpoint::vector(const std::string& name) const {
  for (const auto& [n, v] : vectors) {
    if (n == name) return v;
  }
  throw CheckpointError("checkpoint has no vector named '" + name + "'");
}

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt) {
  Writer w;
  w.bytes.insert(w.bytes.end(), std::begin(kMagic), std::end(kMagic));
  w.put<std::uint32_t>(kCheckpointFormatVersion);
  w.put_string(ckpt.meta.dump());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.networks.size()));
  for (const auto& [name, net] : ckpt.networks) {
    w.put_string(name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(net.input_dim()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(net.layers().size()));
    for (const auto& l : net.layers()) {
      w.put<std::uint32_t>(static_cast<std::uint32_t>(l.out));
      w.put<std::uint8_t>(static_cast<std::uint8_t>(l.activation));
    }
    w.put_reals(net.parameters());
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.vectors.size()));
  for (const auto& [name, v] : ckpt.vectors) {
    w.put_string(name);
    w.put_reals(v);
  }
  return std::move(w.bytes);
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  char magic[8];
  r.get_raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw CheckpointError("not a checkpoint file (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointFormatVersion) {
    throw CheckpointError("unsupported checkpoint format version " + std::to_string(version));
  }
  Checkpoint ckpt;
  try {
    ckpt.meta = nlohmann::json::parse(r.get_string());
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  const auto n_nets = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_nets; ++i) {
    std::string name = r.get_string();
    const auto input_dim = r.get<std::uint32_t>();
    const auto n_layers = r.get<std::uint32_t>();
    std::vector<std::pair<std::size_t, Activation>> layers;
    for (std::uint32_t k = 0; k < n_layers; ++k) {
      const auto out = r.get<std::uint32_t>();
      const auto act = r.get<std::uint8_t>();
      if (act > static_cast<std::uint8_t>(Activation::ReLU)) throw CheckpointError("unknown activation code");
      layers.emplace_back(out, static_cast<Activation>(act));
    }
    Network net(input_dim, layers);
    const auto params = r.get_reals();
    if (params.size() != net.parameter_count()) {
      throw CheckpointError("parameter count does not match layer dims for network '" + name + "'");
    }
    std::copy(params.begin(), params.end(), net.parameters().begin());
    ckpt.networks.emplace_back(std::move(name), std::move(net));
  }
  const auto n_vecs = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_vecs; ++i) {
    std::string name = r.get_string();
    ckpt.vectors.emplace_back(std::move(name), r.get_reals());
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint payload");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace aed
