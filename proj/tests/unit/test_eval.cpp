#include <gtest/gtest.h>

#include "ssd/common/error.hpp"
#include "ssd/datasets/synthetic.hpp"
#include "ssd/eval/eval.hpp"
#include "ssd/model/losses.hpp"

using namespace ssd;
using namespace ssd::eval;
using datasets::Split;

namespace {

datasets::LongTailedDataset balanced_test(int classes, int per_class) {
  std::vector<datasets::Instance> inst;
  for (int c = 0; c < classes; ++c)
    for (int j = 0; j < per_class; ++j) inst.push_back({c * 1000 + j, Image(1, 1, 1), c});
  return datasets::LongTailedDataset(std::move(inst), classes);
}

model::ModelConfig tiny_config(int classes) {
  model::ModelConfig cfg;
  cfg.backbone.image_size = 8;
  cfg.backbone.channels = {4, 8};
  cfg.num_classes = classes;
  cfg.embed_dim = 8;
  return cfg;
}

}  // namespace

TEST(Score, PerfectPredictions) {
  const auto test = balanced_test(3, 4);
  std::vector<int> preds;
  for (const auto& i : test.instances()) preds.push_back(i.label);
  const std::vector<Split> tags{Split::many, Split::medium, Split::few};
  const auto r = score(preds, test, tags);
  EXPECT_EQ(r.overall_top1, 1.0);
  for (Split s : datasets::kAllSplits) EXPECT_EQ(r.split(s), 1.0);
  EXPECT_EQ(r.num_correct, 12u);
}

TEST(Score, AlwaysHeadClass) {
  // A head-biased classifier: chance on balanced test, perfect on the head.
  const auto test = balanced_test(4, 5);
  const std::vector<int> preds(test.size(), 0);
  const std::vector<Split> tags{Split::many, Split::medium, Split::few, Split::few};
  const auto r = score(preds, test, tags);
  EXPECT_DOUBLE_EQ(r.overall_top1, 0.25);
  EXPECT_EQ(r.split(Split::many), 1.0);
  EXPECT_EQ(r.split(Split::medium), 0.0);
  EXPECT_EQ(r.split(Split::few), 0.0);
  EXPECT_EQ(r.per_class_accuracy, (std::vector<double>{1.0, 0.0, 0.0, 0.0}));
  EXPECT_EQ(r.per_class_total, (std::vector<int>{5, 5, 5, 5}));
}

TEST(Score, SplitsUseTrainTagsAndEmptySplitsAreAbsent) {
  const auto test = balanced_test(2, 2);
  const std::vector<int> preds{0, 1, 1, 1};
  const auto r = score(preds, test, std::vector<Split>{Split::few, Split::few});
  EXPECT_FALSE(r.split(Split::many).has_value());
  EXPECT_FALSE(r.split(Split::medium).has_value());
  EXPECT_DOUBLE_EQ(*r.split(Split::few), 0.75);
}

TEST(Score, RejectsMismatchedInputs) {
  const auto test = balanced_test(2, 2);
  EXPECT_THROW(score(std::vector<int>{0}, test, std::vector<Split>{Split::many, Split::few}),
               ContractError);
  EXPECT_THROW(score(std::vector<int>{0, 0, 0, 0}, test, std::vector<Split>{Split::many}),
               ContractError);
}

TEST(Evaluate, MatchesManualArgmax) {
  const auto syn = datasets::make_synthetic_longtail(4, 10, 2.0, 8, 3);
  const model::ModelBundle bundle(tiny_config(4), 1);
  for (auto head : {model::HeadSelector::hard, model::HeadSelector::soft, model::HeadSelector::lws}) {
    const auto preds = predict(bundle, head, syn.test);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < syn.test.size(); ++i) {
      const Image* img = &syn.test.instances()[i].payload;
      const Matrix f = bundle.backbone.forward(std::span<const Image* const>(&img, 1));
      const int p = model::argmax(model::head_logits(bundle, head, f).row(0));
      EXPECT_EQ(preds[i], p);
      correct += p == syn.test.instances()[i].label;
    }
    const auto r = evaluate(bundle, head, syn.test);
    EXPECT_EQ(r.num_correct, correct);
    EXPECT_EQ(r.head, model::head_name(head));
  }
}

TEST(Evaluate, ClassCountMismatchRejected) {
  const auto syn = datasets::make_synthetic_longtail(4, 10, 2.0, 8, 3);
  const model::ModelBundle bundle(tiny_config(5), 1);
  EXPECT_THROW(predict(bundle, model::HeadSelector::hard, syn.test), ContractError);
}

TEST(Report, JsonRoundTripAndTable) {
  const auto test = balanced_test(3, 2);
  auto r = score(std::vector<int>{0, 0, 1, 2, 2, 2}, test,
                 std::vector<Split>{Split::many, Split::medium, Split::medium});
  r.head = "soft";
  r.checkpoint_hash = "abc";
  r.config_hash = "def";
  EXPECT_EQ(report_from_json(to_json(r)), r);
  const auto j = to_json(r);
  EXPECT_TRUE(j.at("split_top1").at("few").is_null());
  const auto table = to_table(r);
  EXPECT_NE(table.find("overall\t0.8333"), std::string::npos);
  EXPECT_NE(table.find("few\tn/a"), std::string::npos);
  EXPECT_NE(table.find("medium"), std::string::npos);
}

TEST(DistributionReport, OriginalAndRebalanced) {
  const auto syn = datasets::make_synthetic_longtail(20, 100, 100.0, 8, 0);
  const auto r = distribution_report(syn.train);
  EXPECT_DOUBLE_EQ(r.original_ratio, 100.0);
  EXPECT_DOUBLE_EQ(r.rebalanced_ratio, 1.0);
  EXPECT_FALSE(r.distilled.has_value());
  const double n = syn.train.size();
  for (double v : r.rebalanced) EXPECT_DOUBLE_EQ(v, n / 20.0);
  EXPECT_EQ(r.original.front(), 100.0);
}

TEST(DistributionReport, DistilledSeries) {
  const auto syn = datasets::make_synthetic_longtail(4, 12, 4.0, 8, 1);
  distill::SoftLabelSet set;
  set.num_classes = 4;
  for (const auto& i : syn.train.instances()) set.ids.push_back(i.id);
  std::sort(set.ids.begin(), set.ids.end());
  set.probabilities = Matrix(set.ids.size(), 4, 0.25f);
  const auto r = distribution_report(syn.train, &set);
  ASSERT_TRUE(r.distilled.has_value());
  EXPECT_NEAR(*r.distilled_ratio, 1.0, 1e-9);
  const auto j = to_json(r);
  EXPECT_TRUE(j.contains("distilled"));
  EXPECT_NE(to_table(r).find("distilled"), std::string::npos);
  set.num_classes = 3;
  EXPECT_THROW(distribution_report(syn.train, &set), ContractError);
}
