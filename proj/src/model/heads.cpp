#include "ssd/model/heads.hpp"

#include <cmath>

#include "ssd/common/error.hpp"
#include "ssd/kernels/kernels.hpp"

namespace ssd::model {

LWSScales::LWSScales(std::size_t num_classes)
    : log_scale_("lws.log_scale", {num_classes}, false) {}

std::vector<float> LWSScales::values() const {
  std::vector<float> out(log_scale_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(log_scale_.value[i]);
  return out;
}

void LWSScales::reset() {
  std::fill(log_scale_.value.begin(), log_scale_.value.end(), 0.0f);
}

Matrix lws_forward(const Matrix& features, const LinearHead& head,
                   std::span<const float> scales) {
  require(scales.size() == head.out_features(),
          "lws_forward: " + std::to_string(scales.size()) + " scales for " +
              std::to_string(head.out_features()) + " classes");
  Matrix logits = head.forward(features);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    auto row = logits.row(i);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] *= scales[c];
  }
  return logits;
}

Matrix lws_forward(const Matrix& features, const LinearHead& head, const LWSScales& scales) {
  const auto values = scales.values();
  return lws_forward(features, head, values);
}

void lws_backward_scales(const Matrix& raw_logits, const Matrix& grad_logits,
                         LWSScales& scales) {
  require(raw_logits.rows == grad_logits.rows && raw_logits.cols == grad_logits.cols &&
              raw_logits.cols == scales.size(),
          "lws_backward_scales: shape mismatch");
  const auto values = scales.values();
  auto grad = scales.log_scale().grad_sink();
  for (std::size_t i = 0; i < raw_logits.rows; ++i) {
    const auto raw = raw_logits.row(i);
    const auto g = grad_logits.row(i);
    for (std::size_t c = 0; c < raw.size(); ++c) grad[c] += g[c] * raw[c] * values[c];
  }
}

ProjectionHead::ProjectionHead(const std::string& name, std::size_t in_features,
                               std::size_t hidden, std::size_t out_features)
    : fc1_(name + ".fc1", in_features, hidden), fc2_(name + ".fc2", hidden, out_features) {}

void ProjectionHead::initialize(std::mt19937_64& rng) {
  fc1_.initialize(rng, kReluInitGain);
  fc2_.initialize(rng, kHeadInitGain);
}

Matrix ProjectionHead::forward(const Matrix& features) const {
  Tape tape;
  return forward(features, tape);
}

Matrix ProjectionHead::forward(const Matrix& features, Tape& tape) const {
  tape.input = features;
  tape.hidden_pre = fc1_.forward(features);
  tape.hidden = Matrix(tape.hidden_pre.rows, tape.hidden_pre.cols);
  kernels::relu(tape.hidden_pre.data, tape.hidden.data);
  tape.output = fc2_.forward(tape.hidden);
  Matrix v = tape.output;
  tape.norms.assign(v.rows, 0.0f);
  for (std::size_t i = 0; i < v.rows; ++i) {
    auto row = v.row(i);
    double sq = 0.0;
    for (float x : row) sq += static_cast<double>(x) * x;
    const float norm = static_cast<float>(std::sqrt(sq));
    if (!(norm > 0.0f)) throw ContractError("projection head produced a zero-norm embedding");
    tape.norms[i] = norm;
    for (float& x : row) x /= norm;
  }
  return v;
}

Matrix ProjectionHead::backward(const Tape& tape, const Matrix& grad_embedding) {
  // v = h / |h|  =>  dL/dh = (g - v (v . g)) / |h|
  Matrix grad_out(grad_embedding.rows, grad_embedding.cols);
  for (std::size_t i = 0; i < grad_embedding.rows; ++i) {
    const auto h = tape.output.row(i);
    const auto g = grad_embedding.row(i);
    const float norm = tape.norms[i];
    double vg = 0.0;
    for (std::size_t j = 0; j < h.size(); ++j) vg += static_cast<double>(h[j] / norm) * g[j];
    auto out = grad_out.row(i);
    for (std::size_t j = 0; j < h.size(); ++j)
      out[j] = static_cast<float>((g[j] - (h[j] / norm) * vg) / norm);
  }
  Matrix grad_hidden = fc2_.backward(tape.hidden, grad_out, true);
  Matrix grad_hidden_pre(grad_hidden.rows, grad_hidden.cols);
  kernels::relu_backward(tape.hidden_pre.data, grad_hidden.data, grad_hidden_pre.data);
  return fc1_.backward(tape.input, grad_hidden_pre, true);
}

ParameterRefs ProjectionHead::parameters() {
  ParameterRefs out = fc1_.parameters();
  for (Parameter* p : fc2_.parameters()) out.push_back(p);
  return out;
}

ConstParameterRefs ProjectionHead::parameters() const {
  ConstParameterRefs out = fc1_.parameters();
  for (const Parameter* p : fc2_.parameters()) out.push_back(p);
  return out;
}

}  // namespace ssd::model
