#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ssd/common/image.hpp"

namespace ssd::datasets {

// Evaluation split of a class, determined by its TRAINING sample count.
enum class Split { many, medium, few };

inline constexpr int kManyShotMin = 100;
inline constexpr int kMediumShotMin = 20;
inline constexpr std::string_view kSplitConvention =
    "many: count >= 100; medium: 20 <= count < 100; few: count < 20";
inline constexpr Split kAllSplits[] = {Split::many, Split::medium, Split::few};

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

// many if count >= 100, medium if 20 <= count < 100, few otherwise.
// Throws ContractError for count < 1.
Split assign_split(int count);

struct Instance {
  std::int64_t id = 0;
  Image payload;
  int label = 0;
};

// Immutable labeled image set with its per-class statistics.
//
// class_counts[c] is the number of instances labeled c and is non-increasing
// in c (head classes first). split_tags default to assign_split(class_counts);
// a held-out set carries the tags of the training set it is evaluated against.
class LongTailedDataset {
 public:
  LongTailedDataset() = default;
  LongTailedDataset(std::vector<Instance> instances, int num_classes,
                    std::optional<std::vector<Split>> split_tags = std::nullopt);

  const std::vector<Instance>& instances() const { return instances_; }
  std::size_t size() const { return instances_.size(); }
  bool empty() const { return instances_.empty(); }
  int num_classes() const { return num_classes_; }
  const std::vector<int>& class_counts() const { return class_counts_; }
  const std::vector<Split>& split_tags() const { return split_tags_; }

  // max/min class count; +inf when some class is empty.
  double imbalance_factor() const;

  bool contains(std::int64_t id) const { return position_.contains(id); }
  std::size_t position_of(std::int64_t id) const;
  const Instance& by_id(std::int64_t id) const { return instances_[position_of(id)]; }

  // Positions (not ids) of the instances of each class, in storage order.
  const std::vector<std::vector<std::size_t>>& positions_by_class() const {
    return by_class_;
  }

  // Same instances with explicitly assigned split tags.
  LongTailedDataset with_split_tags(std::vector<Split> tags) const;

 private:
  std::vector<Instance> instances_;
  int num_classes_ = 0;
  std::vector<int> class_counts_;
  std::vector<Split> split_tags_;
  std::unordered_map<std::int64_t, std::size_t> position_;
  std::vector<std::vector<std::size_t>> by_class_;
};

std::vector<Split> split_tags_for(std::span<const int> class_counts);

}  // namespace ssd::datasets
