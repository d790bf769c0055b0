#pragma once

#include <cstdint>

#include "ssd/datasets/dataset.hpp"

namespace ssd::datasets {

// Desk-scale stand-in for CIFAR-LT style data.
//
// Classes are organised in groups that share part of their appearance, so a
// teacher's soft labels carry real inter-class similarity. Every image also
// carries a top-lit illumination ramp, which makes its orientation
// predictable independently of its label.
struct SyntheticSpec {
  int num_classes = 20;
  int n_max = 100;
  double imbalance_factor = 100.0;
  int image_size = 16;
  std::uint64_t seed = 0;
  int test_per_class = 50;
  int group_size = 4;
  double noise = 0.12;
  int max_shift = 2;
};

struct SyntheticLongTail {
  SyntheticSpec spec;
  LongTailedDataset train;
  LongTailedDataset test;  // balanced; split tags copied from train
};

SyntheticLongTail make_synthetic_longtail(const SyntheticSpec& spec);
SyntheticLongTail make_synthetic_longtail(int num_classes, int n_max,
                                          double imbalance_factor,
                                          int image_size, std::uint64_t seed);

// First id used for held-out instances.
inline constexpr std::int64_t kSyntheticTestIdBase = 10'000'000;

}  // namespace ssd::datasets
