#include "ssd/eval/eval.hpp"

#include <cstdio>
#include <sstream>

#include "ssd/common/error.hpp"
#include "ssd/model/losses.hpp"

namespace ssd::eval {
namespace {

constexpr std::size_t kEvalBatch = 128;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::vector<int> predict(const model::ModelBundle& bundle, model::HeadSelector head,
                         const datasets::LongTailedDataset& test_set) {
  require(bundle.config.num_classes == test_set.num_classes(),
          "evaluate: model has " + std::to_string(bundle.config.num_classes) +
              " classes, test set has " + std::to_string(test_set.num_classes()));
  const auto& inst = test_set.instances();
  std::vector<int> out;
  out.reserve(inst.size());
  for (std::size_t start = 0; start < inst.size(); start += kEvalBatch) {
    const std::size_t end = std::min(inst.size(), start + kEvalBatch);
    std::vector<const Image*> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&inst[i].payload);
    const Matrix feats = bundle.backbone.forward(batch);
    const Matrix logits = model::head_logits(bundle, head, feats);
    for (std::size_t i = 0; i < logits.rows; ++i) out.push_back(model::argmax(logits.row(i)));
  }
  return out;
}

EvalReport score(std::span<const int> predictions, const datasets::LongTailedDataset& test_set,
                 std::span<const datasets::Split> train_split_tags) {
  const auto c = static_cast<std::size_t>(test_set.num_classes());
  require(predictions.size() == test_set.size(), "score: prediction count mismatch");
  require(train_split_tags.size() == c, "score: need one split tag per class");
  EvalReport r;
  std::vector<std::size_t> correct(c, 0);
  r.per_class_total.assign(c, 0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int y = test_set.instances()[i].label;
    ++r.per_class_total[y];
    if (predictions[i] == y) ++correct[y];
  }
  r.per_class_accuracy.assign(c, 0.0);
  std::array<std::size_t, 3> split_correct{}, split_total{};
  for (std::size_t k = 0; k < c; ++k) {
    if (r.per_class_total[k] > 0)
      r.per_class_accuracy[k] = static_cast<double>(correct[k]) / r.per_class_total[k];
    r.num_correct += correct[k];
    r.num_total += static_cast<std::size_t>(r.per_class_total[k]);
    const auto s = static_cast<std::size_t>(train_split_tags[k]);
    split_correct[s] += correct[k];
    split_total[s] += static_cast<std::size_t>(r.per_class_total[k]);
  }
  r.overall_top1 = r.num_total ? static_cast<double>(r.num_correct) / r.num_total : 0.0;
  for (std::size_t s = 0; s < 3; ++s)
    if (split_total[s] > 0)
      r.split_top1[s] = static_cast<double>(split_correct[s]) / split_total[s];
  return r;
}

EvalReport evaluate(const model::ModelBundle& bundle, model::HeadSelector head,
                    const datasets::LongTailedDataset& test_set,
                    std::span<const datasets::Split> train_split_tags) {
  EvalReport r = score(predict(bundle, head, test_set), test_set, train_split_tags);
  r.head = std::string(model::head_name(head));
  return r;
}

EvalReport evaluate(const model::ModelBundle& bundle, model::HeadSelector head,
                    const datasets::LongTailedDataset& test_set) {
  return evaluate(bundle, head, test_set, test_set.split_tags());
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json splits = nlohmann::json::object();
  for (auto s : datasets::kAllSplits) {
    const auto v = r.split(s);
    splits[std::string(datasets::split_name(s))] = v ? nlohmann::json(*v) : nlohmann::json();
  }
  return {{"head", r.head},
          {"overall_top1", r.overall_top1},
          {"split_top1", splits},
          {"split_convention", std::string(datasets::kSplitConvention)},
          {"per_class_accuracy", r.per_class_accuracy},
          {"per_class_total", r.per_class_total},
          {"num_correct", r.num_correct},
          {"num_total", r.num_total},
          {"checkpoint_hash", r.checkpoint_hash},
          {"config_hash", r.config_hash}};
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.head = j.at("head").get<std::string>();
  r.overall_top1 = j.at("overall_top1").get<double>();
  for (auto s : datasets::kAllSplits) {
    const auto& v = j.at("split_top1").at(std::string(datasets::split_name(s)));
    if (!v.is_null()) r.split_top1[static_cast<std::size_t>(s)] = v.get<double>();
  }
  r.per_class_accuracy = j.at("per_class_accuracy").get<std::vector<double>>();
  r.per_class_total = j.at("per_class_total").get<std::vector<int>>();
  r.num_correct = j.at("num_correct").get<std::size_t>();
  r.num_total = j.at("num_total").get<std::size_t>();
  r.checkpoint_hash = j.value("checkpoint_hash", "");
  r.config_hash = j.value("config_hash", "");
  return r;
}

std::string to_table(const EvalReport& r) {
  std::ostringstream out;
  out << "head\t" << r.head << "\n";
  out << "overall\t" << fmt(r.overall_top1) << "\n";
  for (auto s : datasets::kAllSplits) {
    const auto v = r.split(s);
    out << datasets::split_name(s) << "\t" << (v ? fmt(*v) : std::string("n/a")) << "\n";
  }
  out << "class\ttotal\taccuracy\n";
  for (std::size_t c = 0; c < r.per_class_accuracy.size(); ++c)
    out << c << "\t" << r.per_class_total[c] << "\t" << fmt(r.per_class_accuracy[c]) << "\n";
  return out.str();
}

DistributionReport distribution_report(const datasets::LongTailedDataset& dataset,
                                       const distill::SoftLabelSet* soft_labels) {
  const auto c = static_cast<std::size_t>(dataset.num_classes());
  require(c > 0 && !dataset.empty(), "distribution_report: empty dataset");
  DistributionReport r;
  r.original.assign(dataset.class_counts().begin(), dataset.class_counts().end());
  r.rebalanced.assign(c, static_cast<double>(dataset.size()) / static_cast<double>(c));
  r.original_ratio = distill::max_min_ratio(r.original);
  r.rebalanced_ratio = distill::max_min_ratio(r.rebalanced);
  if (soft_labels) {
    require(soft_labels->num_classes == dataset.num_classes(),
            "distribution_report: soft labels have a different class count");
    r.distilled = distill::aggregate_distilled_distribution(*soft_labels);
    r.distilled_ratio = distill::max_min_ratio(*r.distilled);
  }
  return r;
}

nlohmann::json to_json(const DistributionReport& r) {
  nlohmann::json j = {{"original", r.original},
                      {"rebalanced", r.rebalanced},
                      {"original_ratio", r.original_ratio},
                      {"rebalanced_ratio", r.rebalanced_ratio}};
  j["distilled"] = r.distilled ? nlohmann::json(*r.distilled) : nlohmann::json();
  j["distilled_ratio"] = r.distilled_ratio ? nlohmann::json(*r.distilled_ratio) : nlohmann::json();
  return j;
}

std::string to_table(const DistributionReport& r) {
  std::ostringstream out;
  out << "class\toriginal\trebalanced\tdistilled\n";
  for (std::size_t c = 0; c < r.original.size(); ++c) {
    out << c << "\t" << fmt(r.original[c]) << "\t" << fmt(r.rebalanced[c]) << "\t"
        << (r.distilled ? fmt((*r.distilled)[c]) : std::string("n/a")) << "\n";
  }
  return out.str();
}

}  // namespace ssd::eval
