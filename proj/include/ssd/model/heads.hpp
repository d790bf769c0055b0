#pragma once

#include <random>
#include <span>
#include <vector>

#include "ssd/common/matrix.hpp"
#include "ssd/model/layers.hpp"

namespace ssd::model {

// Linear classifier over backbone features: logits [batch x C].
using LinearHead = Linear;

// Learnable per-class logit scales, parameterised as scale = exp(log_scale)
// so they stay positive. Initialised to 1.
class LWSScales {
 public:
  LWSScales() = default;
  explicit LWSScales(std::size_t num_classes);

  std::size_t size() const { return log_scale_.size(); }
  std::vector<float> values() const;
  void reset();

  Parameter& log_scale() { return log_scale_; }
  const Parameter& log_scale() const { return log_scale_; }

 private:
  Parameter log_scale_;
};

// logit[b][c] = scales[c] * (w_c . f_b + b_c). The scale multiplies the bias
// too, so LWS is a pure per-class rescaling of the plain head's logits.
Matrix lws_forward(const Matrix& features, const LinearHead& head,
                   std::span<const float> scales);
Matrix lws_forward(const Matrix& features, const LinearHead& head,
                   const LWSScales& scales);

// Accumulates dL/dlog_scale given the plain head logits and dL/dlogits of
// the rescaled output.
void lws_backward_scales(const Matrix& raw_logits, const Matrix& grad_logits,
                         LWSScales& scales);

// Two-layer MLP with L2-normalised output, used for instance discrimination.
class ProjectionHead {
 public:
  struct Tape {
    Matrix input;
    Matrix hidden_pre;
    Matrix hidden;
    Matrix output;  // before normalisation
    std::vector<float> norms;
  };

  ProjectionHead() = default;
  ProjectionHead(const std::string& name, std::size_t in_features, std::size_t hidden,
                 std::size_t out_features);

  void initialize(std::mt19937_64& rng);
  std::size_t out_features() const { return fc2_.out_features(); }

  // Rows of the result have unit L2 norm.
  Matrix forward(const Matrix& features) const;
  Matrix forward(const Matrix& features, Tape& tape) const;

  // dL/dfeatures given dL/d(normalised embedding).
  Matrix backward(const Tape& tape, const Matrix& grad_embedding);

  ParameterRefs parameters();
  ConstParameterRefs parameters() const;

 private:
  Linear fc1_;
  Linear fc2_;
};

}  // namespace ssd::model
