#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>
#include "ssd/datasets/dataset.hpp"
#include "ssd/distill/distill.hpp"
#include "ssd/model/bundle.hpp"

namespace ssd::eval {

struct EvalReport {
  std::string head;
  double overall_top1 = 0.0;
  // Indexed by Split; empty when no class falls in the split.
  std::array<std::optional<double>, 3> split_top1;
  std::vector<double> per_class_accuracy;
  std::vector<int> per_class_total;
  std::size_t num_correct = 0;
  std::size_t num_total = 0;
  std::string checkpoint_hash;
  std::string config_hash;

  std::optional<double> split(datasets::Split s) const {
    return split_top1[static_cast<std::size_t>(s)];
  }
  bool operator==(const EvalReport&) const = default;
};

// Predicted class per test instance (storage order); ties go to the lowest
// class index.
std::vector<int> predict(const model::ModelBundle& bundle, model::HeadSelector head,
                         const datasets::LongTailedDataset& test_set);

// Scores predictions against test labels. split_tags are per class and must
// come from the training counts.
EvalReport score(std::span<const int> predictions, const datasets::LongTailedDataset& test_set,
                 std::span<const datasets::Split> train_split_tags);

EvalReport evaluate(const model::ModelBundle& bundle, model::HeadSelector head,
                    const datasets::LongTailedDataset& test_set,
                    std::span<const datasets::Split> train_split_tags);

// Uses the split tags stored on the test set.
EvalReport evaluate(const model::ModelBundle& bundle, model::HeadSelector head,
                    const datasets::LongTailedDataset& test_set);

nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

// One "key<TAB>value" line per metric followed by a per-class block.
std::string to_table(const EvalReport& report);

struct DistributionReport {
  std::vector<double> original;    // class_counts
  std::vector<double> rebalanced;  // class-balanced expectation N / C
  std::optional<std::vector<double>> distilled;
  double original_ratio = 0.0;
  double rebalanced_ratio = 0.0;
  std::optional<double> distilled_ratio;
};

DistributionReport distribution_report(const datasets::LongTailedDataset& dataset,
                                       const distill::SoftLabelSet* soft_labels = nullptr);

nlohmann::json to_json(const DistributionReport& report);

// Bar-chart friendly rows: class, original, rebalanced, distilled.
std::string to_table(const DistributionReport& report);

}  // namespace ssd::eval
