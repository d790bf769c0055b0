#include "ssd/datasets/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "ssd/common/error.hpp"
#include "ssd/common/seed.hpp"
#include "ssd/datasets/profiles.hpp"

namespace ssd::datasets {
namespace {

constexpr int kChannels = 3;
constexpr double kRampStrength = 0.12;

// Anisotropic oriented Gaussian stroke with an RGB colour.
struct Stroke {
  double cy, cx;
  double sigma_long, sigma_short;
  double theta;
  std::array<double, kChannels> color;
  double amplitude;

  double weight(double y, double x) const {
    const double dy = y - cy;
    const double dx = x - cx;
    const double u = std::cos(theta) * dx + std::sin(theta) * dy;
    const double v = -std::sin(theta) * dx + std::cos(theta) * dy;
    return amplitude * std::exp(-0.5 * (u * u / (sigma_long * sigma_long) +
                                        v * v / (sigma_short * sigma_short)));
  }
};

Stroke random_stroke(std::mt19937_64& rng, int size, double amplitude) {
  std::uniform_real_distribution<double> pos(0.2 * size, 0.8 * size);
  std::uniform_real_distribution<double> longs(0.18 * size, 0.35 * size);
  std::uniform_real_distribution<double> shorts(0.06 * size, 0.12 * size);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Stroke s{};
  s.cy = pos(rng);
  s.cx = pos(rng);
  s.sigma_long = longs(rng);
  s.sigma_short = shorts(rng);
  s.theta = angle(rng);
  for (double& c : s.color) c = unit(rng);
  s.amplitude = amplitude;
  return s;
}

struct ClassTemplate {
  std::vector<Stroke> strokes;
};

std::vector<ClassTemplate> make_templates(const SyntheticSpec& spec) {
  std::mt19937_64 rng(derive_seed(spec.seed, 101));
  const int groups = (spec.num_classes + spec.group_size - 1) / spec.group_size;
  std::vector<std::vector<Stroke>> shared(groups);
  for (auto& g : shared) {
    g.push_back(random_stroke(rng, spec.image_size, 0.55));
    g.push_back(random_stroke(rng, spec.image_size, 0.45));
  }
  std::vector<ClassTemplate> templates(spec.num_classes);
  for (int c = 0; c < spec.num_classes; ++c) {
    templates[c].strokes = shared[c / spec.group_size];
    templates[c].strokes.push_back(random_stroke(rng, spec.image_size, 0.6));
  }
  return templates;
}

Image render(const ClassTemplate& tmpl, const SyntheticSpec& spec,
             std::uint64_t instance_seed) {
  std::mt19937_64 rng(instance_seed);
  std::uniform_int_distribution<int> shift(-spec.max_shift, spec.max_shift);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  std::uniform_real_distribution<double> gain(0.7, 1.3);
  std::normal_distribution<double> noise(0.0, spec.noise);

  const int dy = shift(rng);
  const int dx = shift(rng);
  std::vector<Stroke> strokes = tmpl.strokes;
  for (Stroke& s : strokes) {
    s.cy += dy + jitter(rng);
    s.cx += dx + jitter(rng);
    s.theta += 0.15 * jitter(rng);
    s.amplitude *= gain(rng);
  }

  const int n = spec.image_size;
  Image img(n, n, kChannels);
  for (int y = 0; y < n; ++y) {
    const double ramp = kRampStrength * (1.0 - static_cast<double>(y) / (n - 1));
    for (int x = 0; x < n; ++x) {
      std::array<double, kChannels> value{ramp, ramp, ramp};
      for (const Stroke& s : strokes) {
        const double w = s.weight(y + 0.5, x + 0.5);
        for (int ch = 0; ch < kChannels; ++ch) value[ch] += w * s.color[ch];
      }
      for (int ch = 0; ch < kChannels; ++ch)
        img.at(y, x, ch) =
            static_cast<float>(std::clamp(value[ch] + noise(rng), 0.0, 1.0));
    }
  }
  return img;
}

}  // namespace

SyntheticLongTail make_synthetic_longtail(const SyntheticSpec& spec) {
  require(spec.num_classes >= 2, "make_synthetic_longtail: need at least 2 classes");
  require(spec.image_size >= 4, "make_synthetic_longtail: image_size must be >= 4");
  require(spec.test_per_class >= 1, "make_synthetic_longtail: test_per_class must be >= 1");
  require(spec.group_size >= 1, "make_synthetic_longtail: group_size must be >= 1");
  require(spec.noise >= 0.0, "make_synthetic_longtail: noise must be >= 0");
  require(spec.max_shift >= 0, "make_synthetic_longtail: max_shift must be >= 0");
  const std::vector<int> counts =
      exponential_profile(spec.n_max, spec.num_classes, spec.imbalance_factor);

  const auto templates = make_templates(spec);
  std::vector<Instance> pool;
  pool.reserve(static_cast<std::size_t>(spec.num_classes) * spec.n_max);
  for (int c = 0; c < spec.num_classes; ++c) {
    for (int j = 0; j < spec.n_max; ++j) {
      const std::int64_t id = static_cast<std::int64_t>(c) * spec.n_max + j;
      pool.push_back({id, render(templates[c], spec, derive_seed(spec.seed, 1000 + id)), c});
    }
  }
  LongTailedDataset balanced(std::move(pool), spec.num_classes);
  LongTailedDataset train =
      subsample_to_profile(balanced, counts, derive_seed(spec.seed, 102));

  std::vector<Instance> held_out;
  held_out.reserve(static_cast<std::size_t>(spec.num_classes) * spec.test_per_class);
  for (int c = 0; c < spec.num_classes; ++c) {
    for (int j = 0; j < spec.test_per_class; ++j) {
      const std::int64_t id =
          kSyntheticTestIdBase + static_cast<std::int64_t>(c) * spec.test_per_class + j;
      held_out.push_back({id, render(templates[c], spec, derive_seed(spec.seed, 1000 + id)), c});
    }
  }
  LongTailedDataset test(std::move(held_out), spec.num_classes, train.split_tags());
  return {spec, std::move(train), std::move(test)};
}

SyntheticLongTail make_synthetic_longtail(int num_classes, int n_max,
                                          double imbalance_factor,
                                          int image_size, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.num_classes = num_classes;
  spec.n_max = n_max;
  spec.imbalance_factor = imbalance_factor;
  spec.image_size = image_size;
  spec.seed = seed;
  return make_synthetic_longtail(spec);
}

}  // namespace ssd::datasets
