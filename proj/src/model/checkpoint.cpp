#include "ssd/model/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "ssd/common/binary_io.hpp"
#include "ssd/common/error.hpp"
#include "ssd/common/hash.hpp"

namespace ssd::model {
namespace {

constexpr char kMagic[8] = {'S', 'S', 'D', 'C', 'K', 'P', 'T', '\0'};

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

const NamedArray* Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

const std::string& Checkpoint::meta(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) throw FormatError("checkpoint: missing metadata '" + key + "'");
  return it->second;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::ostringstream out(std::ios::binary);
  out.write(kMagic, sizeof kMagic);
  io::write_le<std::uint32_t>(out, kCheckpointVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    io::write_string(out, k);
    io::write_string(out, v);
  }
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& a : ckpt.arrays) {
    require(element_count(a.shape) == a.data.size(),
            "checkpoint: array '" + a.name + "' shape does not match its data");
    io::write_string(out, a.name);
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
    for (std::size_t d : a.shape) io::write_le<std::uint64_t>(out, d);
    io::write_floats(out, a.data);
  }
  return std::move(out).str();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw FormatError("checkpoint: bad magic");
  const auto version = io::read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  const auto n_meta = io::read_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = io::read_string(in);
    ckpt.metadata[k] = io::read_string(in);
  }
  const auto n_arrays = io::read_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    NamedArray a;
    a.name = io::read_string(in);
    const auto ndim = io::read_le<std::uint32_t>(in);
    if (ndim > 8) throw FormatError("checkpoint: array '" + a.name + "' has too many dims");
    for (std::uint32_t d = 0; d < ndim; ++d)
      a.shape.push_back(static_cast<std::size_t>(io::read_le<std::uint64_t>(in)));
    const std::size_t n = element_count(a.shape);
    if (n > bytes.size()) throw FormatError("checkpoint: array '" + a.name + "' truncated");
    a.data.resize(n);
    io::read_floats(in, a.data);
    ckpt.arrays.push_back(std::move(a));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError("checkpoint: trailing bytes");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write to '" + path.string() + "' failed");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint '" + path.string() + "' not found");
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

std::string checkpoint_hash(const Checkpoint& ckpt) {
  return sha256_hex(std::string_view(encode_checkpoint(ckpt)));
}

Checkpoint capture(const ModelBundle& bundle) {
  Checkpoint ckpt;
  ckpt.metadata["model_config"] = to_json(bundle.config).dump();
  for (const Parameter* p : bundle.parameters())
    ckpt.arrays.push_back({p->name, p->shape, p->value});
  return ckpt;
}

ModelBundle restore_bundle(const Checkpoint& ckpt) {
  const auto config = model_config_from_json(nlohmann::json::parse(ckpt.meta("model_config")));
  ModelBundle bundle(config, 0);
  for (Parameter* p : bundle.parameters()) {
    const NamedArray* a = ckpt.find(p->name);
    if (!a) throw FormatError("checkpoint: missing parameter '" + p->name + "'");
    if (a->shape != p->shape)
      throw FormatError("checkpoint: shape mismatch for '" + p->name + "'");
    p->value = a->data;
  }
  return bundle;
}

}  // namespace ssd::model
