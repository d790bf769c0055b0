#pragma once

#include <cstdint>
#include <vector>

#include "ssd/datasets/dataset.hpp"

namespace ssd::datasets {

// counts[i] = round(n_max * IF^(-i / (C - 1))).
// Requires C >= 2, n_max >= 1, IF >= 1 and n_max >= IF.
std::vector<int> exponential_profile(int n_max, int num_classes,
                                     double imbalance_factor);

// Pareto-shaped decay from n_max (class 0) to n_min (class C - 1).
//
// Class i receives the expected order statistic of a Lomax (Pareto II)
// variable with shape alpha at rank i, x_i = ((i + 0.5) / C)^(-1/alpha) - 1,
// affinely rescaled so that the first and last classes are exactly n_max and
// n_min. With (1280, 5, 1000, 6) this gives ~104.9K samples in total.
std::vector<int> pareto_profile(int n_max, int n_min, int num_classes,
                                double alpha);

struct ImbalanceProfile {
  enum class Kind { exponential, pareto, explicit_counts };

  Kind kind = Kind::exponential;
  int num_classes = 0;
  int n_max = 0;
  double imbalance_factor = 1.0;  // exponential
  int n_min = 1;                  // pareto
  double alpha = 6.0;             // pareto
  std::vector<int> explicit_counts;

  static ImbalanceProfile exponential(int n_max, int num_classes, double imbalance_factor);
  static ImbalanceProfile pareto(int n_max, int n_min, int num_classes, double alpha);
  static ImbalanceProfile from_counts(std::vector<int> counts);

  std::vector<int> counts() const;
};

// Draws counts[c] instances of each source class c without replacement.
//
// Classes with a zero target are dropped; the remaining classes are relabeled
// in order of decreasing count (stable in source class index) and the result
// is stored in increasing instance-id order, so subsampling a dataset to its
// own counts returns it unchanged. Deterministic in `seed`.
LongTailedDataset subsample_to_profile(const LongTailedDataset& full,
                                       const std::vector<int>& counts,
                                       std::uint64_t seed);
LongTailedDataset subsample_to_profile(const LongTailedDataset& full,
                                       const ImbalanceProfile& profile,
                                       std::uint64_t seed);

}  // namespace ssd::datasets
