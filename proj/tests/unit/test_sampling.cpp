#include <gtest/gtest.h>

#include <map>
#include <numeric>

#include "ssd/common/error.hpp"
#include "ssd/datasets/profiles.hpp"
#include "ssd/datasets/synthetic.hpp"
#include "ssd/sampling/sampler.hpp"
#include "stats.hpp"

using namespace ssd;
using namespace ssd::sampling;
using datasets::LongTailedDataset;

namespace {

LongTailedDataset dataset_with_counts(const std::vector<int>& counts) {
  std::vector<datasets::Instance> inst;
  std::int64_t id = 0;
  for (std::size_t c = 0; c < counts.size(); ++c)
    for (int j = 0; j < counts[c]; ++j)
      inst.push_back({id++, Image(1, 1, 1), static_cast<int>(c)});
  return LongTailedDataset(std::move(inst), static_cast<int>(counts.size()));
}

std::vector<std::size_t> class_histogram(const LongTailedDataset& d,
                                         const std::vector<std::int64_t>& ids) {
  std::vector<std::size_t> h(d.num_classes(), 0);
  for (auto id : ids) ++h[d.by_id(id).label];
  return h;
}

SamplerSpec spec(Strategy s, std::size_t length, std::uint64_t seed) {
  SamplerSpec sp;
  sp.strategy = s;
  sp.epoch_length = length;
  sp.seed = seed;
  return sp;
}

}  // namespace

TEST(Sampler, StrategyNamesRoundTrip) {
  for (Strategy s : {Strategy::instance_balanced, Strategy::class_balanced})
    EXPECT_EQ(parse_strategy(strategy_name(s)), s);
  EXPECT_THROW(parse_strategy("square_root"), ContractError);
}

TEST(Sampler, DefaultLengthIsDatasetSize) {
  const auto d = dataset_with_counts({5, 3, 1});
  SamplerSpec sp;
  EXPECT_EQ(draw(d, sp).size(), 9u);
  sp.strategy = Strategy::class_balanced;
  EXPECT_EQ(draw(d, sp).size(), 9u);
  sp.epoch_length = 0;
  EXPECT_THROW(draw(d, sp), ContractError);
}

TEST(Sampler, DeterministicInSeed) {
  const auto d = dataset_with_counts(datasets::exponential_profile(100, 20, 100.0));
  for (Strategy s : {Strategy::instance_balanced, Strategy::class_balanced}) {
    EXPECT_EQ(draw(d, spec(s, 500, 3)), draw(d, spec(s, 500, 3)));
    EXPECT_NE(draw(d, spec(s, 500, 3)), draw(d, spec(s, 500, 4)));
  }
}

TEST(Sampler, IdsBelongToDataset) {
  const auto d = dataset_with_counts({4, 2, 1});
  for (Strategy s : {Strategy::instance_balanced, Strategy::class_balanced})
    for (auto id : draw(d, spec(s, 200, 1))) EXPECT_TRUE(d.contains(id));
}

TEST(Sampler, ClassBalancedUniformOverClasses) {
  const auto d = dataset_with_counts(datasets::exponential_profile(100, 20, 100.0));
  const auto h = class_histogram(d, class_balanced_indices(d, spec(Strategy::class_balanced, 100000, 17)));
  const std::vector<double> uniform(20, 1.0 / 20);
  EXPECT_GT(ssd::testing::chi_square_p_value(h, uniform), 0.01);
}

TEST(Sampler, InstanceBalancedFollowsCounts) {
  const auto counts = datasets::exponential_profile(100, 20, 100.0);
  const auto d = dataset_with_counts(counts);
  const auto h =
      class_histogram(d, instance_balanced_indices(d, spec(Strategy::instance_balanced, 100000, 17)));
  const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
  std::vector<double> expected;
  for (int c : counts) expected.push_back(c / n);
  EXPECT_GT(ssd::testing::chi_square_p_value(h, expected), 0.01);
}

TEST(Sampler, ClassBalancedUniformWithinClass) {
  const auto d = dataset_with_counts({50, 5});
  std::map<std::int64_t, std::size_t> freq;
  for (auto id : class_balanced_indices(d, spec(Strategy::class_balanced, 40000, 2))) ++freq[id];
  std::vector<std::size_t> tail;
  for (std::int64_t id = 50; id < 55; ++id) tail.push_back(freq[id]);
  EXPECT_GT(ssd::testing::chi_square_p_value(tail, std::vector<double>(5, 0.2)), 0.01);
}

TEST(Sampler, TailOversampledHeadUndersampled) {
  const auto d = dataset_with_counts(datasets::exponential_profile(100, 20, 100.0));
  const auto h = class_histogram(d, class_balanced_indices(d, spec(Strategy::class_balanced, 20000, 5)));
  const auto hi = class_histogram(d, instance_balanced_indices(d, spec(Strategy::instance_balanced, 20000, 5)));
  EXPECT_GT(h.back(), 10 * hi.back());
  EXPECT_LT(h.front(), hi.front());
}

TEST(Sampler, SingleClassAndSingleInstance) {
  const auto d = dataset_with_counts({1});
  for (Strategy s : {Strategy::instance_balanced, Strategy::class_balanced})
    for (auto id : draw(d, spec(s, 10, 0))) EXPECT_EQ(id, 0);
}

TEST(Sampler, EmptyClassRejectedByClassBalanced) {
  std::vector<datasets::Instance> inst{{0, Image(1, 1, 1), 0}};
  const LongTailedDataset d(inst, 2);
  EXPECT_THROW(class_balanced_indices(d, spec(Strategy::class_balanced, 5, 0)), ContractError);
  EXPECT_NO_THROW(instance_balanced_indices(d, spec(Strategy::instance_balanced, 5, 0)));
}

TEST(Sampler, EmptyDatasetRejected) {
  const LongTailedDataset d({}, 2);
  EXPECT_THROW(instance_balanced_indices(d, spec(Strategy::instance_balanced, 5, 0)), ContractError);
  EXPECT_THROW(class_balanced_indices(d, spec(Strategy::class_balanced, 5, 0)), ContractError);
}

TEST(Sampler, SyntheticDatasetDrawsAreLabelled) {
  const auto syn = datasets::make_synthetic_longtail(20, 100, 100.0, 8, 1);
  const auto h = class_histogram(syn.train, draw(syn.train, spec(Strategy::class_balanced, 4000, 9)));
  for (std::size_t c : h) EXPECT_GT(c, 100u);
}
