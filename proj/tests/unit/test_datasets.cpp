#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>

#include "ssd/common/error.hpp"
#include "ssd/datasets/dataset.hpp"
#include "ssd/datasets/manifest.hpp"
#include "ssd/datasets/profiles.hpp"
#include "ssd/datasets/synthetic.hpp"

using namespace ssd;
using namespace ssd::datasets;

namespace {

int sum(const std::vector<int>& v) { return std::accumulate(v.begin(), v.end(), 0); }

LongTailedDataset balanced_source(int classes, int per_class) {
  std::vector<Instance> inst;
  for (int c = 0; c < classes; ++c)
    for (int j = 0; j < per_class; ++j)
      inst.push_back({c * 100000 + j, Image(2, 2, 1, static_cast<float>(c) / classes), c});
  return LongTailedDataset(std::move(inst), classes);
}

std::vector<std::int64_t> ids_of(const LongTailedDataset& d) {
  std::vector<std::int64_t> out;
  for (const auto& i : d.instances()) out.push_back(i.id);
  return out;
}

}  // namespace

TEST(ExponentialProfile, BalancedWhenFactorIsOne) {
  const auto c = exponential_profile(500, 100, 1.0);
  EXPECT_EQ(c, std::vector<int>(100, 500));
}

TEST(ExponentialProfile, MatchesHighPrecisionOracle) {
  // Oracle: round-half-up of n_max * IF^(-i/(C-1)) evaluated at 40 digits.
  const auto c = exponential_profile(500, 100, 100.0);
  EXPECT_EQ(c.front(), 500);
  EXPECT_EQ(c.back(), 5);
  EXPECT_EQ(static_cast<double>(c.front()) / c.back(), 100.0);
  EXPECT_EQ((std::vector<int>(c.begin(), c.begin() + 10)),
            (std::vector<int>{500, 477, 456, 435, 415, 396, 378, 361, 345, 329}));
  EXPECT_EQ(c[49], 51);
  EXPECT_EQ(sum(c), 10899);
  EXPECT_EQ(sum(exponential_profile(500, 100, 10.0)), 19629);
  EXPECT_EQ(sum(exponential_profile(500, 100, 50.0)), 12655);
}

TEST(ExponentialProfile, DeskScaleProfile) {
  EXPECT_EQ(exponential_profile(100, 20, 100.0),
            (std::vector<int>{100, 78, 62, 48, 38, 30, 23, 18, 14, 11, 9, 7, 5, 4, 3, 3, 2, 2, 1, 1}));
}

TEST(ExponentialProfile, BenchmarkFactorsAccepted) {
  for (double f : {10.0, 50.0, 100.0}) {
    const auto c = exponential_profile(500, 100, f);
    EXPECT_EQ(c.front(), 500);
    EXPECT_NEAR(static_cast<double>(c.front()) / c.back(), f, f * 0.1);
  }
}

TEST(ExponentialProfile, RejectsBadArguments) {
  EXPECT_THROW(exponential_profile(500, 100, 0.5), ContractError);
  EXPECT_THROW(exponential_profile(0, 100, 1.0), ContractError);
  EXPECT_THROW(exponential_profile(500, 0, 1.0), ContractError);
  EXPECT_THROW(exponential_profile(500, 1, 1.0), ContractError);
  EXPECT_THROW(exponential_profile(50, 10, 100.0), ContractError);
}

TEST(ExponentialProfile, PropertyMonotoneAndRatioWithinRounding) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> n_dist(1, 2000), c_dist(2, 300);
  std::uniform_real_distribution<double> f_dist(1.0, 200.0);
  for (int trial = 0; trial < 500; ++trial) {
    const double f = f_dist(rng);
    const int n = std::max(static_cast<int>(std::ceil(f)), n_dist(rng));
    const int c = c_dist(rng);
    const auto counts = exponential_profile(n, c, f);
    ASSERT_EQ(counts.size(), static_cast<std::size_t>(c));
    EXPECT_EQ(counts.front(), n);
    for (int i = 1; i < c; ++i) EXPECT_LE(counts[i], counts[i - 1]);
    for (int v : counts) EXPECT_GE(v, 1);
    // The smallest class is n/f rounded: the ratio is off by at most the
    // rounding of the denominator.
    const double lo = n / (n / f + 0.5), hi = n / std::max(n / f - 0.5, 0.5);
    const double ratio = static_cast<double>(counts.front()) / counts.back();
    EXPECT_GE(ratio, lo - 1e-9);
    EXPECT_LE(ratio, hi + 1e-9);
  }
}

TEST(ParetoProfile, EndpointsExact) {
  const auto c = pareto_profile(1280, 5, 1000, 6.0);
  ASSERT_EQ(c.size(), 1000u);
  EXPECT_EQ(c.front(), 1280);
  EXPECT_EQ(c.back(), 5);
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_LE(c[i], c[i - 1]);
}

TEST(ParetoProfile, InteriorMatchesOracle) {
  // Oracle: expected Lomax order statistics, rescaled, at 40 digits.
  const auto c = pareto_profile(1280, 5, 1000, 6.0);
  EXPECT_EQ((std::vector<int>(c.begin(), c.begin() + 5)),
            (std::vector<int>{1280, 983, 862, 788, 736}));
  EXPECT_EQ(c[100], 238);
  EXPECT_EQ(c[500], 66);
  EXPECT_EQ(sum(c), 104850);
}

TEST(ParetoProfile, DegenerateRange) {
  EXPECT_EQ(pareto_profile(100, 100, 10, 6.0), std::vector<int>(10, 100));
}

TEST(ParetoProfile, RejectsBadArguments) {
  EXPECT_THROW(pareto_profile(5, 10, 10, 6.0), ContractError);
  EXPECT_THROW(pareto_profile(100, 0, 10, 6.0), ContractError);
  EXPECT_THROW(pareto_profile(100, 5, 10, 0.0), ContractError);
}

TEST(ParetoProfile, LargerAlphaIsFlatter) {
  const auto steep = pareto_profile(1000, 10, 50, 1.0);
  const auto flat = pareto_profile(1000, 10, 50, 8.0);
  EXPECT_GT(sum(flat), sum(steep));
}

TEST(ImbalanceProfile, KindsDispatch) {
  EXPECT_EQ(ImbalanceProfile::exponential(100, 20, 100.0).counts(), exponential_profile(100, 20, 100.0));
  EXPECT_EQ(ImbalanceProfile::pareto(1280, 5, 1000, 6.0).counts(), pareto_profile(1280, 5, 1000, 6.0));
  EXPECT_EQ(ImbalanceProfile::from_counts({3, 2, 1}).counts(), (std::vector<int>{3, 2, 1}));
}

TEST(Split, Boundaries) {
  EXPECT_EQ(assign_split(150), Split::many);
  EXPECT_EQ(assign_split(100), Split::many);
  EXPECT_EQ(assign_split(99), Split::medium);
  EXPECT_EQ(assign_split(20), Split::medium);
  EXPECT_EQ(assign_split(19), Split::few);
  EXPECT_EQ(assign_split(1), Split::few);
  EXPECT_THROW(assign_split(0), ContractError);
}

TEST(Split, NamesRoundTrip) {
  for (Split s : kAllSplits) EXPECT_EQ(parse_split(split_name(s)), s);
  EXPECT_THROW(parse_split("tail"), ContractError);
}

TEST(Split, TagsPartitionClasses) {
  const auto counts = exponential_profile(500, 100, 100.0);
  const auto tags = split_tags_for(counts);
  ASSERT_EQ(tags.size(), counts.size());
  std::array<int, 3> n{};
  for (std::size_t c = 0; c < tags.size(); ++c) {
    ++n[static_cast<int>(tags[c])];
    EXPECT_EQ(tags[c], assign_split(counts[c]));
  }
  EXPECT_EQ(n[0] + n[1] + n[2], 100);
  EXPECT_GT(n[0], 0);
  EXPECT_GT(n[1], 0);
  EXPECT_GT(n[2], 0);
}

TEST(LongTailedDataset, InvariantsHold) {
  const auto syn = make_synthetic_longtail(20, 100, 100.0, 16, 3);
  const auto& d = syn.train;
  std::vector<int> counted(d.num_classes(), 0);
  for (const auto& i : d.instances()) ++counted[i.label];
  EXPECT_EQ(counted, d.class_counts());
  for (int c = 1; c < d.num_classes(); ++c) EXPECT_LE(d.class_counts()[c], d.class_counts()[c - 1]);
  EXPECT_GE(d.imbalance_factor(), 1.0);
  EXPECT_DOUBLE_EQ(d.imbalance_factor(), 100.0);
}

TEST(LongTailedDataset, RejectsInvalidInput) {
  std::vector<Instance> bad_label{{1, Image(1, 1, 1), 5}};
  EXPECT_THROW(LongTailedDataset(bad_label, 2), ContractError);
  std::vector<Instance> dup{{1, Image(1, 1, 1), 0}, {1, Image(1, 1, 1), 0}};
  EXPECT_THROW(LongTailedDataset(dup, 1), ContractError);
  std::vector<Instance> increasing{{1, Image(1, 1, 1), 0}, {2, Image(1, 1, 1), 1}, {3, Image(1, 1, 1), 1}};
  EXPECT_THROW(LongTailedDataset(increasing, 2), ContractError);
}

TEST(LongTailedDataset, LookupById) {
  const auto d = balanced_source(3, 4);
  EXPECT_TRUE(d.contains(100001));
  EXPECT_FALSE(d.contains(7));
  EXPECT_EQ(d.by_id(200003).label, 2);
  EXPECT_THROW(d.position_of(7), ContractError);
}

TEST(Subsample, MatchesProfileExactly) {
  const auto full = balanced_source(100, 600);
  const auto counts = exponential_profile(500, 100, 100.0);
  const auto d = subsample_to_profile(full, counts, 11);
  EXPECT_EQ(d.class_counts(), counts);
  EXPECT_EQ(d.size(), static_cast<std::size_t>(sum(counts)));
}

TEST(Subsample, DeterministicInSeed) {
  const auto full = balanced_source(10, 50);
  const auto counts = exponential_profile(40, 10, 10.0);
  EXPECT_EQ(ids_of(subsample_to_profile(full, counts, 5)), ids_of(subsample_to_profile(full, counts, 5)));
  EXPECT_NE(ids_of(subsample_to_profile(full, counts, 5)), ids_of(subsample_to_profile(full, counts, 6)));
}

TEST(Subsample, SingleClassProfile) {
  const auto full = balanced_source(4, 10);
  const auto d = subsample_to_profile(full, std::vector<int>{0, 0, 7, 0}, 1);
  EXPECT_EQ(d.num_classes(), 1);
  EXPECT_EQ(d.class_counts(), std::vector<int>{7});
  for (const auto& i : d.instances()) EXPECT_EQ(i.id / 100000, 2);
}

TEST(Subsample, IdempotentOnOwnOutput) {
  const auto full = balanced_source(10, 50);
  const auto once = subsample_to_profile(full, exponential_profile(40, 10, 10.0), 9);
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    const auto twice = subsample_to_profile(once, once.class_counts(), seed);
    EXPECT_EQ(ids_of(twice), ids_of(once));
    EXPECT_EQ(twice.class_counts(), once.class_counts());
  }
}

TEST(Subsample, InsufficientSourceRejected) {
  const auto full = balanced_source(3, 5);
  EXPECT_THROW(subsample_to_profile(full, std::vector<int>{6, 1, 1}, 0), ContractError);
  EXPECT_THROW(subsample_to_profile(full, std::vector<int>{1, 1}, 0), ContractError);
}

TEST(Synthetic, TinyBalanced) {
  const auto syn = make_synthetic_longtail(2, 10, 1.0, 8, 0);
  EXPECT_EQ(syn.train.size(), 20u);
  EXPECT_EQ(syn.train.class_counts(), (std::vector<int>{10, 10}));
}

TEST(Synthetic, DeskProfile) {
  const auto syn = make_synthetic_longtail(20, 100, 100.0, 16, 0);
  EXPECT_EQ(syn.train.class_counts(), exponential_profile(100, 20, 100.0));
  EXPECT_EQ(*std::min_element(syn.train.class_counts().begin(), syn.train.class_counts().end()), 1);
}

TEST(Synthetic, TestSetBalancedWithTrainTags) {
  const auto syn = make_synthetic_longtail(20, 100, 100.0, 16, 0);
  EXPECT_EQ(syn.test.class_counts(), std::vector<int>(20, syn.spec.test_per_class));
  EXPECT_EQ(syn.test.split_tags(), syn.train.split_tags());
  for (const auto& i : syn.test.instances()) EXPECT_GE(i.id, kSyntheticTestIdBase);
}

TEST(Synthetic, PixelsInUnitRangeAndDeterministic) {
  const auto a = make_synthetic_longtail(6, 20, 4.0, 12, 42);
  const auto b = make_synthetic_longtail(6, 20, 4.0, 12, 42);
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train.instances()[i].payload, b.train.instances()[i].payload);
    for (float v : a.train.instances()[i].payload.pixels) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
  const auto c = make_synthetic_longtail(6, 20, 4.0, 12, 43);
  EXPECT_NE(a.train.instances()[0].payload, c.train.instances()[0].payload);
}

TEST(Synthetic, ClassTemplatesDiffer) {
  // Mean image per class: distinct classes must not share a template.
  const auto syn = make_synthetic_longtail(8, 30, 1.0, 16, 5);
  std::vector<std::vector<double>> mean(8);
  for (const auto& i : syn.train.instances()) {
    auto& m = mean[i.label];
    m.resize(i.payload.pixels.size(), 0.0);
    for (std::size_t k = 0; k < m.size(); ++k) m[k] += i.payload.pixels[k] / 30.0;
  }
  for (int a = 0; a < 8; ++a)
    for (int b = a + 1; b < 8; ++b) {
      double d = 0.0;
      for (std::size_t k = 0; k < mean[a].size(); ++k) d += std::abs(mean[a][k] - mean[b][k]);
      EXPECT_GT(d / mean[a].size(), 0.005) << a << " vs " << b;
    }
}

TEST(Synthetic, RejectsBadArguments) {
  EXPECT_THROW(make_synthetic_longtail(1, 10, 1.0, 8, 0), ContractError);
}

TEST(Manifest, RoundTripWithBlobs) {
  const auto dir = std::filesystem::temp_directory_path() / "ssd_test_manifest_blobs";
  std::filesystem::remove_all(dir);
  const auto syn = make_synthetic_longtail(5, 12, 4.0, 8, 1);
  const auto path = write_dataset(dir, syn.train, syn.test, synthetic_provenance(syn.spec));
  const auto back = read_dataset(path);
  EXPECT_EQ(ids_of(back.train), ids_of(syn.train));
  EXPECT_EQ(back.train.class_counts(), syn.train.class_counts());
  EXPECT_EQ(back.train.split_tags(), syn.train.split_tags());
  EXPECT_EQ(back.test.split_tags(), syn.train.split_tags());
  for (std::size_t i = 0; i < syn.train.size(); ++i)
    EXPECT_EQ(back.train.instances()[i].payload, syn.train.instances()[i].payload);
  std::filesystem::remove_all(dir);
}

TEST(Manifest, SyntheticRegeneratedWithoutBlobs) {
  const auto dir = std::filesystem::temp_directory_path() / "ssd_test_manifest_regen";
  std::filesystem::remove_all(dir);
  const auto syn = make_synthetic_longtail(4, 10, 2.0, 8, 2);
  const auto path = write_dataset(dir, syn.train, syn.test, synthetic_provenance(syn.spec));
  std::filesystem::remove(dir / "train.blob");
  std::filesystem::remove(dir / "test.blob");
  const auto back = read_dataset(path);
  for (std::size_t i = 0; i < syn.test.size(); ++i)
    EXPECT_EQ(back.test.instances()[i].payload, syn.test.instances()[i].payload);
  std::filesystem::remove_all(dir);
}

TEST(Manifest, DescribeCarriesSplitConvention) {
  const auto syn = make_synthetic_longtail(4, 10, 2.0, 8, 2);
  const auto j = synthetic_provenance(syn.spec);
  EXPECT_EQ(synthetic_spec_from_json(j).seed, syn.spec.seed);
  const auto d = describe(syn.train);
  EXPECT_EQ(d.at("class_counts").get<std::vector<int>>(), syn.train.class_counts());
}

TEST(Manifest, MissingFileIsFormatError) {
  EXPECT_THROW(read_dataset("/nonexistent/dataset.json"), FormatError);
}
