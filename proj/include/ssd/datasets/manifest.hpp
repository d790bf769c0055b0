#pragma once

// On-disk dataset representation.
//
// dataset.json holds, for the train and test sets, the instance ids, labels,
// class counts and split tags, plus a provenance record (generator spec and
// seed, or subsampling profile). Image payloads live in a binary blob per set:
//
//   "SSDBLOB\0" | u32 version | u64 count
//   count x { i64 id | u32 height | u32 width | u32 channels | u64 offset }
//   float32 pixels (HWC), little-endian, at offset from the start of the data
//
// Synthetic datasets can be re-created from the provenance record when the
// blobs are absent.

#include <filesystem>
#include <string>
#include <unordered_map>

#include <json.hpp>

#include "ssd/datasets/dataset.hpp"
#include "ssd/datasets/synthetic.hpp"

namespace ssd::datasets {

inline constexpr const char* kManifestFormat = "ssd-dataset";
inline constexpr int kManifestVersion = 1;

nlohmann::json describe(const LongTailedDataset& dataset);
nlohmann::json synthetic_provenance(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);

void write_image_blob(const std::filesystem::path& path, const LongTailedDataset& dataset);
std::unordered_map<std::int64_t, Image> read_image_blob(const std::filesystem::path& path);

struct DatasetPair {
  LongTailedDataset train;
  LongTailedDataset test;
  nlohmann::json provenance;
};

// Writes <dir>/dataset.json, <dir>/train.blob and <dir>/test.blob. Returns
// the manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir,
                                    const LongTailedDataset& train,
                                    const LongTailedDataset& test,
                                    const nlohmann::json& provenance);

DatasetPair read_dataset(const std::filesystem::path& manifest_path);

}  // namespace ssd::datasets
