#include "ssd/datasets/dataset.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "ssd/common/error.hpp"

namespace ssd::datasets {

std::string_view split_name(Split split) {
  switch (split) {
    case Split::many:
      return "many";
    case Split::medium:
      return "medium";
    case Split::few:
      return "few";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "many") return Split::many;
  if (name == "medium") return Split::medium;
  if (name == "few") return Split::few;
  throw ContractError("unknown split '" + std::string(name) + "'");
}

Split assign_split(int count) {
  require(count >= 1, "assign_split: count must be >= 1, got " + std::to_string(count));
  if (count >= kManyShotMin) return Split::many;
  if (count >= kMediumShotMin) return Split::medium;
  return Split::few;
}

std::vector<Split> split_tags_for(std::span<const int> class_counts) {
  std::vector<Split> tags;
  tags.reserve(class_counts.size());
  // An empty class is as data-poor as it gets.
  for (int c : class_counts) tags.push_back(c >= 1 ? assign_split(c) : Split::few);
  return tags;
}

LongTailedDataset::LongTailedDataset(std::vector<Instance> instances,
                                     int num_classes,
                                     std::optional<std::vector<Split>> split_tags)
    : instances_(std::move(instances)), num_classes_(num_classes) {
  require(num_classes_ >= 1, "dataset: num_classes must be >= 1");
  class_counts_.assign(num_classes_, 0);
  by_class_.resize(num_classes_);
  position_.reserve(instances_.size());
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    const Instance& inst = instances_[i];
    require(inst.label >= 0 && inst.label < num_classes_,
            "dataset: label " + std::to_string(inst.label) + " out of range for instance " +
                std::to_string(inst.id));
    require(position_.emplace(inst.id, i).second,
            "dataset: duplicate instance id " + std::to_string(inst.id));
    ++class_counts_[inst.label];
    by_class_[inst.label].push_back(i);
  }
  require(std::is_sorted(class_counts_.begin(), class_counts_.end(), std::greater<>()),
          "dataset: class counts must be non-increasing in class index");
  if (split_tags) {
    require(static_cast<int>(split_tags->size()) == num_classes_,
            "dataset: split_tags length must equal num_classes");
    split_tags_ = std::move(*split_tags);
  } else {
    split_tags_ = split_tags_for(class_counts_);
  }
}

double LongTailedDataset::imbalance_factor() const {
  if (class_counts_.empty()) return 1.0;
  const int hi = class_counts_.front();
  const int lo = class_counts_.back();
  if (lo == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(hi) / lo;
}

std::size_t LongTailedDataset::position_of(std::int64_t id) const {
  const auto it = position_.find(id);
  require(it != position_.end(), "dataset: unknown instance id " + std::to_string(id));
  return it->second;
}

LongTailedDataset LongTailedDataset::with_split_tags(std::vector<Split> tags) const {
  return LongTailedDataset(instances_, num_classes_, std::move(tags));
}

}  // namespace ssd::datasets
