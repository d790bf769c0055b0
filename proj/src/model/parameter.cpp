#include "ssd/model/parameter.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

namespace ssd::model {

Parameter::Parameter(std::string n, std::vector<std::size_t> s, bool weight_decay)
    : name(std::move(n)), shape(std::move(s)), decay(weight_decay) {
  const std::size_t count =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  value.assign(count, 0.0f);
  grad.assign(count, 0.0f);
}

void Parameter::zero_grad() {
  std::fill(grad.begin(), grad.end(), 0.0f);
  touched = false;
}

void init_uniform(Parameter& p, float bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (float& v : p.value) v = dist(rng);
}

}  // namespace ssd::model
