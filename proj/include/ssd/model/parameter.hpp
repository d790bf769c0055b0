#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ssd::model {

// Named trainable tensor with its gradient accumulator.
//
// `touched` records whether any backward pass wrote into `grad` since the
// last zero_grad(); the optimizer leaves untouched parameters alone, so a
// parameter outside the active loss graph stays byte-identical.
struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> value;
  std::vector<float> grad;
  bool touched = false;
  bool decay = true;

  Parameter() = default;
  Parameter(std::string n, std::vector<std::size_t> s, bool weight_decay = true);

  std::size_t size() const { return value.size(); }

  // Gradient buffer for accumulation; marks the parameter as touched.
  std::span<float> grad_sink() {
    touched = true;
    return grad;
  }
  void zero_grad();
};

using ParameterRefs = std::vector<Parameter*>;
using ConstParameterRefs = std::vector<const Parameter*>;

// U(-bound, bound) weights.
void init_uniform(Parameter& p, float bound, std::mt19937_64& rng);

}  // namespace ssd::model
