#include "ssd/datasets/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "ssd/common/error.hpp"

namespace ssd::datasets {

std::vector<int> exponential_profile(int n_max, int num_classes,
                                     double imbalance_factor) {
  require(n_max >= 1, "exponential_profile: n_max must be positive");
  require(num_classes >= 2, "exponential_profile: need at least 2 classes");
  require(std::isfinite(imbalance_factor) && imbalance_factor >= 1.0,
          "exponential_profile: imbalance factor must be >= 1");
  require(n_max >= imbalance_factor,
          "exponential_profile: n_max must be >= imbalance factor so the "
          "smallest class keeps one sample");
  std::vector<int> counts(num_classes);
  for (int i = 0; i < num_classes; ++i) {
    const double exponent = -static_cast<double>(i) / (num_classes - 1);
    counts[i] = static_cast<int>(std::lround(n_max * std::pow(imbalance_factor, exponent)));
  }
  return counts;
}

std::vector<int> pareto_profile(int n_max, int n_min, int num_classes,
                                double alpha) {
  require(n_min >= 1, "pareto_profile: n_min must be >= 1");
  require(n_min <= n_max, "pareto_profile: n_min must not exceed n_max");
  require(num_classes >= 2, "pareto_profile: need at least 2 classes");
  require(std::isfinite(alpha) && alpha > 0.0, "pareto_profile: alpha must be > 0");
  std::vector<int> counts(num_classes, n_max);
  if (n_min == n_max) return counts;

  std::vector<double> rank(num_classes);
  for (int i = 0; i < num_classes; ++i) {
    const double q = (i + 0.5) / num_classes;
    rank[i] = std::pow(q, -1.0 / alpha) - 1.0;
  }
  const double hi = rank.front();
  const double lo = rank.back();
  for (int i = 0; i < num_classes; ++i) {
    const double t = (rank[i] - lo) / (hi - lo);
    counts[i] = static_cast<int>(std::lround(n_min + (n_max - n_min) * t));
  }
  counts.front() = n_max;
  counts.back() = n_min;
  return counts;
}

ImbalanceProfile ImbalanceProfile::exponential(int n_max, int num_classes,
                                               double imbalance_factor) {
  ImbalanceProfile p;
  p.kind = Kind::exponential;
  p.n_max = n_max;
  p.num_classes = num_classes;
  p.imbalance_factor = imbalance_factor;
  return p;
}

ImbalanceProfile ImbalanceProfile::pareto(int n_max, int n_min, int num_classes,
                                          double alpha) {
  ImbalanceProfile p;
  p.kind = Kind::pareto;
  p.n_max = n_max;
  p.n_min = n_min;
  p.num_classes = num_classes;
  p.alpha = alpha;
  return p;
}

ImbalanceProfile ImbalanceProfile::from_counts(std::vector<int> counts) {
  ImbalanceProfile p;
  p.kind = Kind::explicit_counts;
  p.num_classes = static_cast<int>(counts.size());
  p.n_max = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
  p.explicit_counts = std::move(counts);
  return p;
}

std::vector<int> ImbalanceProfile::counts() const {
  switch (kind) {
    case Kind::exponential:
      return exponential_profile(n_max, num_classes, imbalance_factor);
    case Kind::pareto:
      return pareto_profile(n_max, n_min, num_classes, alpha);
    case Kind::explicit_counts:
      for (int c : explicit_counts) require(c >= 0, "profile: counts must be >= 0");
      return explicit_counts;
  }
  return {};
}

LongTailedDataset subsample_to_profile(const LongTailedDataset& full,
                                       const std::vector<int>& counts,
                                       std::uint64_t seed) {
  require(static_cast<int>(counts.size()) == full.num_classes(),
          "subsample_to_profile: profile has " + std::to_string(counts.size()) +
              " classes, dataset has " + std::to_string(full.num_classes()));
  const auto& by_class = full.positions_by_class();
  for (int c = 0; c < full.num_classes(); ++c) {
    require(counts[c] >= 0, "subsample_to_profile: negative target count");
    if (counts[c] > full.class_counts()[c]) {
      throw ContractError("subsample_to_profile: class " + std::to_string(c) + " has " +
                          std::to_string(full.class_counts()[c]) + " samples, profile needs " +
                          std::to_string(counts[c]));
    }
  }

  // New label order: decreasing target count, ties by source class.
  std::vector<int> order;
  for (int c = 0; c < full.num_classes(); ++c)
    if (counts[c] > 0) order.push_back(c);
  require(!order.empty(), "subsample_to_profile: profile selects no instances");
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return counts[a] > counts[b]; });
  std::vector<int> new_label(full.num_classes(), -1);
  for (std::size_t i = 0; i < order.size(); ++i) new_label[order[i]] = static_cast<int>(i);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  for (int c = 0; c < full.num_classes(); ++c) {
    if (counts[c] == 0) continue;
    // Sort candidate ids before shuffling so the draw depends only on the
    // set of source instances, not on their storage order.
    std::vector<std::size_t> pool = by_class[c];
    std::sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
      return full.instances()[a].id < full.instances()[b].id;
    });
    std::shuffle(pool.begin(), pool.end(), rng);
    chosen.insert(chosen.end(), pool.begin(), pool.begin() + counts[c]);
  }
  std::sort(chosen.begin(), chosen.end(), [&](std::size_t a, std::size_t b) {
    return full.instances()[a].id < full.instances()[b].id;
  });

  std::vector<Instance> out;
  out.reserve(chosen.size());
  for (std::size_t pos : chosen) {
    Instance inst = full.instances()[pos];
    inst.label = new_label[inst.label];
    out.push_back(std::move(inst));
  }
  return LongTailedDataset(std::move(out), static_cast<int>(order.size()));
}

LongTailedDataset subsample_to_profile(const LongTailedDataset& full,
                                       const ImbalanceProfile& profile,
                                       std::uint64_t seed) {
  return subsample_to_profile(full, profile.counts(), seed);
}

}  // namespace ssd::datasets
