#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "ssd/datasets/dataset.hpp"

namespace ssd::sampling {

enum class Strategy { instance_balanced, class_balanced };

std::string_view strategy_name(Strategy s);
Strategy parse_strategy(std::string_view name);

struct SamplerSpec {
  Strategy strategy = Strategy::instance_balanced;
  // Draws per epoch; unset means one draw per training instance (N).
  std::optional<std::size_t> epoch_length;
  std::uint64_t seed = 0;

  std::size_t resolved_length(const datasets::LongTailedDataset& dataset) const;
};

// Both samplers draw with replacement and return instance ids. The sequence
// is a pure function of (dataset, spec).

// Uniform over all N instances: class c appears with probability n_c / N.
std::vector<std::int64_t> instance_balanced_indices(
    const datasets::LongTailedDataset& dataset, const SamplerSpec& spec);

// Class uniform over C, then instance uniform within the class.
// Throws ContractError if any class is empty.
std::vector<std::int64_t> class_balanced_indices(
    const datasets::LongTailedDataset& dataset, const SamplerSpec& spec);

// Dispatches on spec.strategy.
std::vector<std::int64_t> draw(const datasets::LongTailedDataset& dataset,
                               const SamplerSpec& spec);

}  // namespace ssd::sampling
