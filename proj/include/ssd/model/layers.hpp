#pragma once

#include <random>
#include <string>

#include "ssd/common/matrix.hpp"
#include "ssd/model/parameter.hpp"

namespace ssd::model {

// Bound multipliers for fan-in scaled uniform init: bound = k / sqrt(fan_in).
inline constexpr float kReluInitGain = 2.44948974f;  // sqrt(6): He-uniform
inline constexpr float kHeadInitGain = 1.0f;

// Fully connected layer, y = x W^T + b. weight is [out x in].
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in_features, std::size_t out_features);

  void initialize(std::mt19937_64& rng, float gain);

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }

  Matrix forward(const Matrix& x) const;

  // Accumulates weight/bias gradients; returns dL/dx when requested.
  Matrix backward(const Matrix& x, const Matrix& grad_out, bool input_grad);

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  const Parameter& weight() const { return weight_; }
  const Parameter& bias() const { return bias_; }

  ParameterRefs parameters() { return {&weight_, &bias_}; }
  ConstParameterRefs parameters() const { return {&weight_, &bias_}; }

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  Parameter weight_;
  Parameter bias_;
};

}  // namespace ssd::model
