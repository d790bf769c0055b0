#pragma once

#include <span>
#include <vector>

#include "ssd/common/matrix.hpp"

namespace ssd::model {

// softmax(z / T) with max subtraction, accumulated in double.
std::vector<double> softmax(std::span<const float> logits, double temperature = 1.0);

// log sum_k exp(z_k / T).
double log_sum_exp(std::span<const float> logits, double temperature = 1.0);

// Index of the largest logit; ties resolve to the lowest index.
int argmax(std::span<const float> logits);

// -log softmax(z)_label. When grad is non-empty it receives
// scale * (softmax(z) - onehot(label)) (overwritten, not accumulated).
double cross_entropy(std::span<const float> logits, int label,
                     std::span<float> grad = {}, double scale = 1.0);

// Mean cross-entropy over rows; grad (if given) is d(mean)/dlogits.
double mean_cross_entropy(const Matrix& logits, std::span<const int> labels,
                          Matrix* grad = nullptr);

}  // namespace ssd::model
