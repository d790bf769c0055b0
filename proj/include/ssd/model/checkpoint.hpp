#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ssd/model/bundle.hpp"

namespace ssd::model {

struct NamedArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> data;

  bool operator==(const NamedArray&) const = default;
};

// Versioned container: "SSDCKPT\0", u32 version, string metadata pairs, then
// named float32 arrays (shape + little-endian data). Metadata keys are kept
// sorted, so encoding is canonical.
struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
  const std::string& meta(const std::string& key) const;  // throws if absent

  bool operator==(const Checkpoint&) const = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// SHA-256 of the canonical encoding.
std::string checkpoint_hash(const Checkpoint& ckpt);

// All bundle parameters plus "model_config" metadata.
Checkpoint capture(const ModelBundle& bundle);

// Rebuilds a bundle from a captured checkpoint; every parameter must be
// present with a matching shape.
ModelBundle restore_bundle(const Checkpoint& ckpt);

}  // namespace ssd::model
