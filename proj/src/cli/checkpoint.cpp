#include "rsak/cli/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <zlib.h>

namespace rsak::cli {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'R', 'S', 'A', 'K'};
// Fixed prefix of meta.config, followed by one entry per mask flag.
constexpr std::size_t kConfigFields = 17;

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  template <class T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const std::uint8_t* take(std::size_t n) {
    if (n > bytes_.size() - pos_)
      throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in bounded pieces.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

void write_tensor(Writer& w, std::string_view name, const Matrix& m, bool trainable, bool as_vector) {
  if (name.size() > 0xFFFF) throw CheckpointError("tensor name too long: " + std::string(name));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
  w.put_bytes(name.data(), name.size());
  if (as_vector) {
    w.put<std::uint8_t>(1);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.size()));
  } else {
    w.put<std::uint8_t>(2);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.cols()));
  }
  w.put<std::uint8_t>(trainable ? 1 : 0);
  w.put_bytes(m.data().data(), m.size() * sizeof(double));
}

std::size_t to_count(double v, const char* field) {
  if (!(v >= 0.0) || v != std::floor(v) || v > 1e12)
    throw CheckpointError(std::string("meta.config field ") + field + " is not a count");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::vector<double> config_to_values(const model::ModelConfig& c) {
  std::vector<double> v = {
      static_cast<double>(c.d),
      static_cast<double>(c.n_layers),
      static_cast<double>(c.n_heads),
      static_cast<double>(c.d_prime),
      static_cast<double>(c.vocab_size),
      static_cast<double>(c.max_text_len),
      static_cast<double>(c.image_side),
      static_cast<double>(c.patch_grid),
      static_cast<double>(c.patch_channels),
      static_cast<double>(c.n_answers),
      static_cast<double>(c.head_hidden),
      static_cast<double>(static_cast<int>(c.adapter_mode)),
      static_cast<double>(static_cast<int>(c.adapter_variant)),
      c.skip_connection_in_adapter ? 1.0 : 0.0,
      c.scaling_enabled ? 1.0 : 0.0,
      c.merged ? 1.0 : 0.0,
      c.init_std,
  };
  for (bool b : c.adapter_layer_mask) v.push_back(b ? 1.0 : 0.0);
  return v;
}

model::ModelConfig config_from_values(std::span<const double> v) {
  if (v.size() < kConfigFields) throw CheckpointError("meta.config record too short");
  model::ModelConfig c;
  c.d = to_count(v[0], "d");
  c.n_layers = to_count(v[1], "n_layers");
  c.n_heads = to_count(v[2], "n_heads");
  c.d_prime = to_count(v[3], "d_prime");
  c.vocab_size = to_count(v[4], "vocab_size");
  c.max_text_len = to_count(v[5], "max_text_len");
  c.image_side = to_count(v[6], "image_side");
  c.patch_grid = to_count(v[7], "patch_grid");
  c.patch_channels = to_count(v[8], "patch_channels");
  c.n_answers = to_count(v[9], "n_answers");
  c.head_hidden = to_count(v[10], "head_hidden");
  const std::size_t mode = to_count(v[11], "adapter_mode");
  const std::size_t variant = to_count(v[12], "adapter_variant");
  if (mode > static_cast<std::size_t>(model::AdapterMode::parallel_both) ||
      variant > static_cast<std::size_t>(model::AdapterVariant::rs))
    throw CheckpointError("meta.config holds an unknown adapter mode or variant");
  c.adapter_mode = static_cast<model::AdapterMode>(mode);
  c.adapter_variant = static_cast<model::AdapterVariant>(variant);
  c.skip_connection_in_adapter = v[13] != 0.0;
  c.scaling_enabled = v[14] != 0.0;
  c.merged = v[15] != 0.0;
  c.init_std = v[16];
  for (std::size_t i = kConfigFields; i < v.size(); ++i) c.adapter_layer_mask.push_back(v[i] != 0.0);
  return c;
}

std::vector<std::uint8_t> encode_checkpoint(const model::Model& model) {
  const std::vector<double> cfg_values = config_to_values(model.config());
  const Matrix cfg_matrix = Matrix(1, cfg_values.size(), cfg_values);

  // meta.config sorts among the parameters so the file stays in name order.
  std::vector<std::pair<std::string_view, const train::Param*>> records;
  for (const auto& [name, p] : model.params()) records.emplace_back(name, &p);
  records.emplace_back(kConfigTensor, nullptr);
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  Writer w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(records.size()));
  for (const auto& [name, p] : records) {
    if (p == nullptr)
      write_tensor(w, name, cfg_matrix, false, true);
    else
      write_tensor(w, name, p->value, p->trainable, false);
  }
  w.put<std::uint32_t>(crc32_of(w.bytes()));
  return std::move(w.bytes());
}

model::Model decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw CheckpointError("checkpoint too short");
  const std::span<const std::uint8_t> body = bytes.first(bytes.size() - 4);
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + body.size(), 4);
  if (crc32_of(body) != stored_crc) throw CheckpointError("checkpoint CRC mismatch");

  Reader r(body);
  if (std::memcmp(r.take(4), kMagic, 4) != 0) throw CheckpointError("not an RSAK checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();

  train::ParamStore store;
  std::optional<model::ModelConfig> cfg;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint16_t>();
    const auto* name_ptr = reinterpret_cast<const char*>(r.take(name_len));
    std::string name(name_ptr, name_len);
    const auto rank = r.get<std::uint8_t>();
    if (rank < 1 || rank > 2)
      throw CheckpointError("tensor " + name + " has unsupported rank " + std::to_string(rank));
    std::size_t rows = 1;
    std::size_t cols = r.get<std::uint32_t>();
    if (rank == 2) {
      rows = cols;
      cols = r.get<std::uint32_t>();
    }
    const bool trainable = r.get<std::uint8_t>() != 0;
    const std::size_t n = rows * cols;
    if (cols != 0 && n / cols != rows) throw CheckpointError("tensor " + name + " too large");
    std::vector<double> values(n);
    std::memcpy(values.data(), r.take(n * sizeof(double)), n * sizeof(double));
    if (name == kConfigTensor) {
      cfg = config_from_values(values);
      continue;
    }
    if (store.contains(name)) throw CheckpointError("duplicate tensor " + name);
    store.add(std::move(name), Matrix(rows, cols, std::move(values)), trainable);
  }
  if (r.pos() != body.size()) throw CheckpointError("trailing bytes after the last tensor");
  if (!cfg) throw CheckpointError("checkpoint lacks the meta.config record");
  try {
    return model::Model(*cfg, std::move(store));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint does not match its configuration: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const model::Model& model) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw CheckpointError("write failed for " + path.string());
}

model::Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                        std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace rsak::cli
