#include "ssd/sampling/sampler.hpp"

#include <random>
#include <string>

#include "ssd/common/error.hpp"

namespace ssd::sampling {

std::string_view strategy_name(Strategy s) {
  return s == Strategy::instance_balanced ? "instance_balanced" : "class_balanced";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "instance_balanced") return Strategy::instance_balanced;
  if (name == "class_balanced") return Strategy::class_balanced;
  throw ContractError("unknown sampling strategy '" + std::string(name) + "'");
}

std::size_t SamplerSpec::resolved_length(const datasets::LongTailedDataset& dataset) const {
  if (epoch_length) {
    require(*epoch_length > 0, "sampler: epoch_length must be > 0");
    return *epoch_length;
  }
  return dataset.size();
}

std::vector<std::int64_t> instance_balanced_indices(
    const datasets::LongTailedDataset& dataset, const SamplerSpec& spec) {
  require(!dataset.empty(), "instance_balanced_indices: dataset is empty");
  const std::size_t length = spec.resolved_length(dataset);
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  std::vector<std::int64_t> ids(length);
  for (auto& id : ids) id = dataset.instances()[pick(rng)].id;
  return ids;
}

std::vector<std::int64_t> class_balanced_indices(
    const datasets::LongTailedDataset& dataset, const SamplerSpec& spec) {
  require(!dataset.empty(), "class_balanced_indices: dataset is empty");
  const auto& by_class = dataset.positions_by_class();
  for (int c = 0; c < dataset.num_classes(); ++c)
    require(!by_class[c].empty(),
            "class_balanced_indices: class " + std::to_string(c) + " has no instances");
  const std::size_t length = spec.resolved_length(dataset);
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> pick_class(0, dataset.num_classes() - 1);
  std::vector<std::int64_t> ids(length);
  for (auto& id : ids) {
    const auto& members = by_class[pick_class(rng)];
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    id = dataset.instances()[members[pick(rng)]].id;
  }
  return ids;
}

std::vector<std::int64_t> draw(const datasets::LongTailedDataset& dataset,
                               const SamplerSpec& spec) {
  return spec.strategy == Strategy::instance_balanced
             ? instance_balanced_indices(dataset, spec)
             : class_balanced_indices(dataset, spec);
}

}  // namespace ssd::sampling
