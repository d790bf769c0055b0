#include "ssd/model/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ssd/common/error.hpp"

namespace ssd::model {

std::vector<double> softmax(std::span<const float> logits, double temperature) {
  require(temperature > 0.0, "softmax: temperature must be > 0");
  require(!logits.empty(), "softmax: empty logits");
  const double inv_t = 1.0 / temperature;
  double hi = -INFINITY;
  for (float z : logits) hi = std::max(hi, static_cast<double>(z) * inv_t);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits[i]) * inv_t - hi);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

double log_sum_exp(std::span<const float> logits, double temperature) {
  require(temperature > 0.0, "log_sum_exp: temperature must be > 0");
  require(!logits.empty(), "log_sum_exp: empty logits");
  const double inv_t = 1.0 / temperature;
  double hi = -INFINITY;
  for (float z : logits) hi = std::max(hi, static_cast<double>(z) * inv_t);
  double sum = 0.0;
  for (float z : logits) sum += std::exp(static_cast<double>(z) * inv_t - hi);
  return hi + std::log(sum);
}

int argmax(std::span<const float> logits) {
  require(!logits.empty(), "argmax: empty logits");
  int best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = static_cast<int>(i);
  return best;
}

double cross_entropy(std::span<const float> logits, int label, std::span<float> grad,
                     double scale) {
  require(label >= 0 && static_cast<std::size_t>(label) < logits.size(),
          "cross_entropy: label " + std::to_string(label) + " outside [0, " +
              std::to_string(logits.size()) + ")");
  const double loss = log_sum_exp(logits) - static_cast<double>(logits[label]);
  if (!grad.empty()) {
    require(grad.size() == logits.size(), "cross_entropy: grad size mismatch");
    const auto p = softmax(logits);
    for (std::size_t i = 0; i < p.size(); ++i)
      grad[i] = static_cast<float>(scale * (p[i] - (static_cast<int>(i) == label ? 1.0 : 0.0)));
  }
  return loss;
}

double mean_cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* grad) {
  require(labels.size() == logits.rows, "mean_cross_entropy: label count mismatch");
  require(logits.rows > 0, "mean_cross_entropy: empty batch");
  if (grad) *grad = Matrix(logits.rows, logits.cols);
  const double scale = 1.0 / static_cast<double>(logits.rows);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    total += cross_entropy(logits.row(i), labels[i],
                           grad ? grad->row(i) : std::span<float>{}, scale);
  }
  return total * scale;
}

}  // namespace ssd::model
