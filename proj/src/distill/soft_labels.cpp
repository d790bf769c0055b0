#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ssd/common/binary_io.hpp"
#include "ssd/common/error.hpp"
#include "ssd/common/hash.hpp"
#include "ssd/distill/distill.hpp"
#include "ssd/model/losses.hpp"

namespace ssd::distill {
namespace {

constexpr char kMagic[8] = {'S', 'S', 'D', 'S', 'O', 'F', 'T', '\0'};
constexpr std::size_t kTeacherBatch = 64;

}  // namespace

std::vector<double> softmax_with_temperature(std::span<const float> z, double temperature) {
  require(temperature > 0.0, "softmax_with_temperature: T must be > 0");
  for (float v : z) require(std::isfinite(v), "softmax_with_temperature: non-finite logit");
  return model::softmax(z, temperature);
}

bool SoftLabelSet::contains(std::int64_t id) const {
  return std::binary_search(ids.begin(), ids.end(), id);
}

std::span<const float> SoftLabelSet::row(std::int64_t id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id)
    throw ContractError("soft labels: no entry for instance " + std::to_string(id));
  return probabilities.row(static_cast<std::size_t>(it - ids.begin()));
}

SoftLabelSet generate_soft_labels(const datasets::LongTailedDataset& dataset,
                                  const model::Backbone& teacher_backbone,
                                  const model::LinearHead& teacher_head,
                                  const model::LWSScales* scales, double temperature,
                                  std::string teacher_hash) {
  require(scales != nullptr, "generate_soft_labels: LWS scales are required");
  require(temperature > 0.0, "generate_soft_labels: T must be > 0");
  require(static_cast<int>(teacher_head.out_features()) == dataset.num_classes(),
          "generate_soft_labels: teacher has " + std::to_string(teacher_head.out_features()) +
              " classes, dataset has " + std::to_string(dataset.num_classes()));
  require(scales->size() == teacher_head.out_features(),
          "generate_soft_labels: scale count does not match the head");

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto& inst = dataset.instances();
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return inst[a].id < inst[b].id; });

  SoftLabelSet set;
  set.num_classes = dataset.num_classes();
  set.temperature = temperature;
  set.teacher_hash = std::move(teacher_hash);
  set.probabilities = Matrix(order.size(), static_cast<std::size_t>(set.num_classes));
  set.ids.reserve(order.size());
  const auto scale_values = scales->values();
  for (std::size_t start = 0; start < order.size(); start += kTeacherBatch) {
    const std::size_t end = std::min(order.size(), start + kTeacherBatch);
    std::vector<const Image*> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&inst[order[i]].payload);
    const Matrix feats = teacher_backbone.forward(batch);
    const Matrix logits = model::lws_forward(feats, teacher_head, scale_values);
    for (std::size_t i = start; i < end; ++i) {
      set.ids.push_back(inst[order[i]].id);
      const auto p = softmax_with_temperature(logits.row(i - start), temperature);
      auto dst = set.probabilities.row(i);
      for (std::size_t c = 0; c < p.size(); ++c) dst[c] = static_cast<float>(p[c]);
    }
  }
  return set;
}

std::vector<double> aggregate_distilled_distribution(const SoftLabelSet& soft_labels) {
  require(soft_labels.size() > 0, "aggregate_distilled_distribution: empty soft-label set");
  std::vector<double> mass(static_cast<std::size_t>(soft_labels.num_classes), 0.0);
  for (std::size_t i = 0; i < soft_labels.size(); ++i) {
    const auto row = soft_labels.probabilities.row(i);
    for (std::size_t c = 0; c < mass.size(); ++c) mass[c] += row[c];
  }
  return mass;
}

double max_min_ratio(std::span<const double> series) {
  require(!series.empty(), "max_min_ratio: empty series");
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  if (*lo <= 0.0) return INFINITY;
  return *hi / *lo;
}

std::string encode_soft_labels(const SoftLabelSet& set) {
  require(set.ids.size() == set.probabilities.rows &&
              set.probabilities.cols == static_cast<std::size_t>(set.num_classes),
          "soft labels: inconsistent shape");
  require(std::is_sorted(set.ids.begin(), set.ids.end()), "soft labels: ids must be sorted");
  std::ostringstream out(std::ios::binary);
  out.write(kMagic, sizeof kMagic);
  io::write_le<std::uint32_t>(out, kSoftLabelVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.num_classes));
  io::write_le<std::uint64_t>(out, set.ids.size());
  io::write_le<double>(out, set.temperature);
  io::write_string(out, set.teacher_hash);
  for (std::size_t i = 0; i < set.ids.size(); ++i) {
    io::write_le<std::int64_t>(out, set.ids[i]);
    io::write_floats(out, set.probabilities.row(i));
  }
  return std::move(out).str();
}

SoftLabelSet decode_soft_labels(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw FormatError("soft labels: bad magic");
  if (io::read_le<std::uint32_t>(in) != kSoftLabelVersion)
    throw FormatError("soft labels: unsupported version");
  SoftLabelSet set;
  set.num_classes = static_cast<int>(io::read_le<std::uint32_t>(in));
  const auto n = io::read_le<std::uint64_t>(in);
  if (set.num_classes < 1 || n * set.num_classes * 4 > bytes.size())
    throw FormatError("soft labels: header out of range");
  set.temperature = io::read_le<double>(in);
  set.teacher_hash = io::read_string(in);
  set.ids.resize(n);
  set.probabilities = Matrix(n, static_cast<std::size_t>(set.num_classes));
  for (std::size_t i = 0; i < n; ++i) {
    set.ids[i] = io::read_le<std::int64_t>(in);
    io::read_floats(in, set.probabilities.row(i));
  }
  if (!std::is_sorted(set.ids.begin(), set.ids.end()))
    throw FormatError("soft labels: rows not in id order");
  return set;
}

void write_soft_labels(const std::filesystem::path& path, const SoftLabelSet& set) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::string bytes = encode_soft_labels(set);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

SoftLabelSet read_soft_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("soft labels '" + path.string() + "' not found");
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_soft_labels(buf.str());
}

std::string soft_labels_hash(const SoftLabelSet& set) {
  return sha256_hex(std::string_view(encode_soft_labels(set)));
}

}  // namespace ssd::distill
