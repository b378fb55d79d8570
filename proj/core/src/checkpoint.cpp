#include "retts/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <map>

#include "retts/error.hpp"
#include "retts/matrix_io.hpp"

namespace retts {

namespace {

constexpr char kMagic[4] = {'R', 'T', 'C', 'K'};

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void put(T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
  void put_f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put(bits);
  }
  void put_str(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  void put_raw(std::span<const std::uint8_t> raw) { bytes.insert(bytes.end(), raw.begin(), raw.end()); }

  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes(b) {}

  void need(std::size_t n) const {
    if (bytes.size() - offset < n) {
      throw FormatError("checkpoint truncated at offset " + std::to_string(offset));
    }
  }
  template <typename T>
  T get() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(static_cast<T>(bytes[offset + i]) << (8 * i));
    offset += sizeof(T);
    return value;
  }
  double get_f64() {
    const auto bits = get<std::uint64_t>();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  std::string get_str() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                  bytes.begin() + static_cast<std::ptrdiff_t>(offset + n));
    offset += n;
    return s;
  }
  std::size_t count(std::size_t min_bytes_each) {
    const auto n = get<std::uint32_t>();
    if (min_bytes_each && n > (bytes.size() - offset) / min_bytes_each) {
      throw FormatError("checkpoint count " + std::to_string(n) + " at offset " + std::to_string(offset - 4) +
                        " exceeds remaining bytes");
    }
    return n;
  }

  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void put_params(Writer& w, const ParamList& params) {
  w.put(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.put_str(p.name);
    w.put_raw(encode_matrix(p.tensor.shape(), p.tensor.data()));
  }
}

ParamList get_params(Reader& r) {
  ParamList out;
  const std::size_t n = r.count(4);
  for (std::size_t i = 0; i < n; ++i) {
    NamedParam p;
    p.name = r.get_str();
    p.tensor = decode_matrix(r.bytes, r.offset);
    out.push_back(std::move(p));
  }
  return out;
}

void put_lamb(Writer& w, const LambState& s) {
  w.put(s.step);
  w.put(static_cast<std::uint32_t>(s.slots.size()));
  for (const auto& slot : s.slots) {
    w.put(static_cast<std::uint64_t>(slot.m.size()));
    for (double v : slot.m) w.put_f64(v);
    for (double v : slot.v) w.put_f64(v);
  }
}

LambState get_lamb(Reader& r) {
  LambState s;
  s.step = r.get<std::uint64_t>();
  const std::size_t n = r.count(8);
  for (std::size_t i = 0; i < n; ++i) {
    const auto len = r.get<std::uint64_t>();
    if (len > (r.bytes.size() - r.offset) / 16) {
      throw FormatError("optimizer slot at offset " + std::to_string(r.offset - 8) + " exceeds remaining bytes");
    }
    LambSlot slot;
    slot.m.resize(len);
    slot.v.resize(len);
    for (double& v : slot.m) v = r.get_f64();
    for (double& v : slot.v) v = r.get_f64();
    s.slots.push_back(std::move(slot));
  }
  return s;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  Writer w;
  w.put_raw(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
  w.put(kCheckpointVersion);
  w.put_str(format_config(c.config));
  w.put(static_cast<std::uint8_t>(c.stage));
  w.put(c.step);
  w.put(c.seed);
  w.put(static_cast<std::uint32_t>(c.rng.size()));
  for (const auto& rec : c.rng) {
    w.put_str(rec.stream_id);
    w.put(rec.counter);
  }
  put_params(w, c.model);
  put_lamb(w, c.model_optimizer);
  const bool has_disc = !c.discriminator.empty();
  w.put(static_cast<std::uint8_t>(has_disc));
  if (has_disc) {
    put_params(w, c.discriminator);
    put_lamb(w, c.discriminator_optimizer);
  }
  w.put(fnv1a(w.bytes));
  return std::move(w.bytes);
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 14 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic at offset 0");
  }
  const std::size_t body = bytes.size() - 8;
  Reader tail(bytes.subspan(body));
  if (tail.get<std::uint64_t>() != fnv1a(bytes.first(body))) {
    throw FormatError("checkpoint: checksum mismatch at offset " + std::to_string(body));
  }
  Reader r(bytes.first(body));
  r.offset = 4;
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) + " at offset 4");
  }
  Checkpoint c;
  try {
    c.config = parse_config(r.get_str());
  } catch (const InputError& e) {
    throw FormatError(std::string("checkpoint: bad config: ") + e.what());
  }
  c.stage = r.get<std::uint8_t>();
  if (c.stage != 1 && c.stage != 2) throw FormatError("checkpoint: bad stage at offset " + std::to_string(r.offset - 1));
  c.step = r.get<std::uint64_t>();
  c.seed = r.get<std::uint64_t>();
  const std::size_t n_rng = r.count(12);
  for (std::size_t i = 0; i < n_rng; ++i) {
    RngRecord rec;
    rec.stream_id = r.get_str();
    rec.counter = r.get<std::uint64_t>();
    c.rng.push_back(std::move(rec));
  }
  c.model = get_params(r);
  c.model_optimizer = get_lamb(r);
  const auto has_disc = r.get<std::uint8_t>();
  if (has_disc > 1) throw FormatError("checkpoint: bad flag at offset " + std::to_string(r.offset - 1));
  if (has_disc) {
    c.discriminator = get_params(r);
    c.discriminator_optimizer = get_lamb(r);
  }
  if (r.offset != body) throw FormatError("checkpoint: trailing bytes at offset " + std::to_string(r.offset));
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_file_bytes(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void check_compatible(const ModelConfig& stored, const ModelConfig& expected) {
  if (stored == expected) return;
  const RunConfig a{stored, {}};
  const RunConfig b{expected, {}};
  // Name the first differing key.
  const std::string fa = format_config(a);
  const std::string fb = format_config(b);
  std::size_t pos = 0;
  while (pos < fa.size() && pos < fb.size()) {
    const auto ea = fa.find('\n', pos);
    const auto eb = fb.find('\n', pos);
    const std::string la = fa.substr(pos, ea - pos);
    const std::string lb = fb.substr(pos, eb - pos);
    if (la != lb) throw CompatibilityError("checkpoint has " + la + " but the model expects " + lb);
    pos = ea + 1;
  }
  throw CompatibilityError("checkpoint model config differs");
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  Checkpoint c = load_checkpoint(path);
  check_compatible(c.config.model, expected);
  return c;
}

void apply_parameters(const ParamList& source, const ParamList& target) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& p : source) {
    if (!by_name.emplace(p.name, &p.tensor).second) throw CompatibilityError("duplicate parameter " + p.name);
  }
  if (by_name.size() != target.size()) {
    throw CompatibilityError("checkpoint has " + std::to_string(by_name.size()) + " parameters, model has " +
                             std::to_string(target.size()));
  }
  for (const auto& p : target) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end()) throw CompatibilityError("checkpoint lacks parameter " + p.name);
    if (it->second->shape() != p.tensor.shape()) {
      throw CompatibilityError("parameter " + p.name + " has shape " + shape_str(it->second->shape()) +
                               ", model expects " + shape_str(p.tensor.shape()));
    }
  }
  for (const auto& p : target) {
    const auto src = by_name.at(p.name)->data();
    Tensor dst = p.tensor;
    std::copy(src.begin(), src.end(), dst.mutable_data().begin());
  }
}

Model model_from_checkpoint(const Checkpoint& checkpoint) {
  Model model(checkpoint.config.model, checkpoint.seed);
  apply_parameters(checkpoint.model, model.parameters());
  return model;
}

}  // namespace retts
