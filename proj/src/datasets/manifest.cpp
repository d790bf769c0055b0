#include "ssd/datasets/manifest.hpp"

#include <cstring>
#include <fstream>

#include "ssd/common/binary_io.hpp"
#include "ssd/common/error.hpp"

namespace ssd::datasets {
namespace {

constexpr char kBlobMagic[8] = {'S', 'S', 'D', 'B', 'L', 'O', 'B', '\0'};
constexpr std::uint32_t kBlobVersion = 1;

std::vector<std::string> tag_names(const std::vector<Split>& tags) {
  std::vector<std::string> out;
  for (Split s : tags) out.emplace_back(split_name(s));
  return out;
}

LongTailedDataset assemble(const nlohmann::json& j,
                           std::unordered_map<std::int64_t, Image>& images) {
  const auto ids = j.at("ids").get<std::vector<std::int64_t>>();
  const auto labels = j.at("labels").get<std::vector<int>>();
  if (ids.size() != labels.size()) throw FormatError("manifest: ids/labels length mismatch");
  std::vector<Split> tags;
  for (const auto& name : j.at("split_tags").get<std::vector<std::string>>())
    tags.push_back(parse_split(name));
  std::vector<Instance> instances;
  instances.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = images.find(ids[i]);
    if (it == images.end())
      throw FormatError("manifest: no payload for instance " + std::to_string(ids[i]));
    instances.push_back({ids[i], std::move(it->second), labels[i]});
  }
  LongTailedDataset ds(std::move(instances), j.at("num_classes").get<int>(), std::move(tags));
  if (ds.class_counts() != j.at("class_counts").get<std::vector<int>>())
    throw FormatError("manifest: class_counts disagree with labels");
  return ds;
}

void check_matches(const LongTailedDataset& regenerated, const nlohmann::json& j) {
  const auto ids = j.at("ids").get<std::vector<std::int64_t>>();
  const auto labels = j.at("labels").get<std::vector<int>>();
  if (ids.size() != regenerated.size())
    throw FormatError("manifest: regenerated dataset size differs from manifest");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Instance& inst = regenerated.instances()[i];
    if (inst.id != ids[i] || inst.label != labels[i])
      throw FormatError("manifest: regenerated dataset differs from manifest");
  }
}

}  // namespace

nlohmann::json describe(const LongTailedDataset& dataset) {
  std::vector<std::int64_t> ids;
  std::vector<int> labels;
  ids.reserve(dataset.size());
  labels.reserve(dataset.size());
  for (const auto& inst : dataset.instances()) {
    ids.push_back(inst.id);
    labels.push_back(inst.label);
  }
  nlohmann::json j;
  j["num_classes"] = dataset.num_classes();
  j["size"] = dataset.size();
  j["class_counts"] = dataset.class_counts();
  j["split_tags"] = tag_names(dataset.split_tags());
  j["imbalance_factor"] = dataset.imbalance_factor();
  j["ids"] = ids;
  j["labels"] = labels;
  return j;
}

nlohmann::json synthetic_provenance(const SyntheticSpec& spec) {
  return {{"kind", "synthetic"},
          {"num_classes", spec.num_classes},
          {"n_max", spec.n_max},
          {"imbalance_factor", spec.imbalance_factor},
          {"profile", "exponential"},
          {"image_size", spec.image_size},
          {"seed", spec.seed},
          {"test_per_class", spec.test_per_class},
          {"group_size", spec.group_size},
          {"noise", spec.noise},
          {"max_shift", spec.max_shift}};
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec spec;
  spec.num_classes = j.value("num_classes", spec.num_classes);
  spec.n_max = j.value("n_max", spec.n_max);
  spec.imbalance_factor = j.value("imbalance_factor", spec.imbalance_factor);
  spec.image_size = j.value("image_size", spec.image_size);
  spec.seed = j.value("seed", spec.seed);
  spec.test_per_class = j.value("test_per_class", spec.test_per_class);
  spec.group_size = j.value("group_size", spec.group_size);
  spec.noise = j.value("noise", spec.noise);
  spec.max_shift = j.value("max_shift", spec.max_shift);
  return spec;
}

void write_image_blob(const std::filesystem::path& path, const LongTailedDataset& dataset) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(kBlobMagic, sizeof(kBlobMagic));
  io::write_le<std::uint32_t>(out, kBlobVersion);
  io::write_le<std::uint64_t>(out, dataset.size());
  std::uint64_t offset = 0;
  for (const auto& inst : dataset.instances()) {
    const Image& img = inst.payload;
    io::write_le<std::int64_t>(out, inst.id);
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(img.height));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(img.width));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(img.channels));
    io::write_le<std::uint64_t>(out, offset);
    offset += img.pixels.size() * sizeof(float);
  }
  for (const auto& inst : dataset.instances()) io::write_floats(out, inst.payload.pixels);
  if (!out) throw FormatError("write failed for " + path.string());
}

std::unordered_map<std::int64_t, Image> read_image_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kBlobMagic, sizeof(magic)) != 0)
    throw FormatError(path.string() + " is not an image blob");
  if (io::read_le<std::uint32_t>(in) != kBlobVersion)
    throw FormatError(path.string() + ": unsupported blob version");
  const auto count = io::read_le<std::uint64_t>(in);
  struct Entry {
    std::int64_t id;
    std::uint32_t h, w, c;
    std::uint64_t offset;
  };
  std::vector<Entry> index(count);
  for (auto& e : index) {
    e.id = io::read_le<std::int64_t>(in);
    e.h = io::read_le<std::uint32_t>(in);
    e.w = io::read_le<std::uint32_t>(in);
    e.c = io::read_le<std::uint32_t>(in);
    e.offset = io::read_le<std::uint64_t>(in);
  }
  const auto data_start = in.tellg();
  std::unordered_map<std::int64_t, Image> images;
  images.reserve(count);
  for (const auto& e : index) {
    Image img(static_cast<int>(e.h), static_cast<int>(e.w), static_cast<int>(e.c));
    in.seekg(data_start + static_cast<std::streamoff>(e.offset));
    io::read_floats(in, img.pixels);
    images.emplace(e.id, std::move(img));
  }
  return images;
}

std::filesystem::path write_dataset(const std::filesystem::path& dir,
                                    const LongTailedDataset& train,
                                    const LongTailedDataset& test,
                                    const nlohmann::json& provenance) {
  std::filesystem::create_directories(dir);
  write_image_blob(dir / "train.blob", train);
  write_image_blob(dir / "test.blob", test);
  nlohmann::json manifest;
  manifest["format"] = kManifestFormat;
  manifest["version"] = kManifestVersion;
  manifest["split_convention"] = std::string(kSplitConvention);
  manifest["provenance"] = provenance;
  manifest["train"] = describe(train);
  manifest["train"]["blob"] = "train.blob";
  manifest["test"] = describe(test);
  manifest["test"]["blob"] = "test.blob";
  const auto path = dir / "dataset.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << manifest.dump(1) << '\n';
  return path;
}

DatasetPair read_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw FormatError("cannot open dataset manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("dataset manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != kManifestFormat)
    throw FormatError(manifest_path.string() + " is not a dataset manifest");
  const auto dir = manifest_path.parent_path();
  const auto& provenance = manifest.at("provenance");

  auto load = [&](const char* key) -> LongTailedDataset {
    const auto& part = manifest.at(key);
    const auto blob = dir / part.value("blob", std::string(key) + ".blob");
    if (std::filesystem::exists(blob)) {
      auto images = read_image_blob(blob);
      return assemble(part, images);
    }
    if (provenance.value("kind", "") != "synthetic")
      throw FormatError("missing image blob " + blob.string());
    return {};
  };
  DatasetPair pair{load("train"), load("test"), provenance};
  if (pair.train.empty() || pair.test.empty()) {
    auto regenerated = make_synthetic_longtail(synthetic_spec_from_json(provenance));
    check_matches(regenerated.train, manifest.at("train"));
    check_matches(regenerated.test, manifest.at("test"));
    if (pair.train.empty()) pair.train = std::move(regenerated.train);
    if (pair.test.empty()) pair.test = std::move(regenerated.test);
  }
  return pair;
}

}  // namespace ssd::datasets
