#include <cmath>
#include <string>

#include "ssd/common/error.hpp"
#include "ssd/distill/distill.hpp"
#include "ssd/model/losses.hpp"

namespace ssd::distill {
namespace {

constexpr double kDistributionTolerance = 1e-4;

void require_distribution(std::span<const float> y) {
  double sum = 0.0;
  for (float v : y) {
    require(std::isfinite(v) && v >= 0.0f, "kd_loss: soft target has a negative or non-finite entry");
    sum += v;
  }
  require(std::abs(sum - 1.0) <= kDistributionTolerance,
          "kd_loss: soft target sums to " + std::to_string(sum) + ", not 1");
}

void add_scaled(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

double kd_loss(std::span<const float> y_soft, std::span<const float> z_soft,
               double temperature, std::span<float> grad, double scale) {
  require(temperature > 0.0, "kd_loss: T must be > 0");
  require(y_soft.size() == z_soft.size() && !y_soft.empty(), "kd_loss: size mismatch");
  require_distribution(y_soft);
  const double lse = model::log_sum_exp(z_soft, temperature);
  double cross = 0.0;
  for (std::size_t i = 0; i < y_soft.size(); ++i) {
    if (y_soft[i] == 0.0f) continue;
    cross -= static_cast<double>(y_soft[i]) * (static_cast<double>(z_soft[i]) / temperature - lse);
  }
  if (!grad.empty()) {
    require(grad.size() == z_soft.size(), "kd_loss: grad size mismatch");
    const auto q = model::softmax(z_soft, temperature);
    for (std::size_t i = 0; i < q.size(); ++i)
      grad[i] = static_cast<float>(scale * temperature * (q[i] - y_soft[i]));
  }
  return temperature * temperature * cross;
}

HybridLoss hybrid_loss(int y_hard, std::span<const float> z_hard,
                       std::span<const float> y_soft, std::span<const float> z_soft,
                       double temperature, double lambda1, double lambda2,
                       std::span<float> grad_hard, std::span<float> grad_soft) {
  HybridLoss out;
  out.ce = model::cross_entropy(z_hard, y_hard, grad_hard, lambda1);
  out.kd = kd_loss(y_soft, z_soft, temperature, grad_soft, lambda2);
  out.total = lambda1 * out.ce + lambda2 * out.kd;
  return out;
}

std::string_view mode_name(DistillMode mode) {
  switch (mode) {
    case DistillMode::dual:
      return "dual";
    case DistillMode::coupled:
      return "coupled";
    case DistillMode::single:
      return "single";
  }
  return "?";
}

DistillMode parse_mode(std::string_view name) {
  if (name == "dual") return DistillMode::dual;
  if (name == "coupled") return DistillMode::coupled;
  if (name == "single") return DistillMode::single;
  throw ContractError("unknown distill mode '" + std::string(name) +
                      "' (expected dual, coupled or single)");
}

LossWiring apply_distill_mode(DistillMode mode) {
  using model::HeadSelector;
  switch (mode) {
    case DistillMode::dual:
      return {HeadSelector::hard, HeadSelector::soft, HeadSelector::soft};
    case DistillMode::coupled:
      return {HeadSelector::soft, HeadSelector::soft, HeadSelector::soft};
    case DistillMode::single:
      return {std::nullopt, HeadSelector::soft, HeadSelector::soft};
  }
  throw ContractError("invalid distill mode");
}

HybridBatch hybrid_backward(model::ModelBundle& bundle, const LossWiring& wiring,
                            const Matrix& features, std::span<const int> labels,
                            const Matrix& soft_targets, double temperature, double lambda1,
                            double lambda2) {
  using model::HeadSelector;
  const std::size_t b = features.rows;
  require(b > 0, "hybrid_backward: empty batch");
  require(labels.size() == b, "hybrid_backward: label count mismatch");
  auto head_of = [&](HeadSelector h) -> model::LinearHead& {
    require(h != HeadSelector::lws, "hybrid_backward: losses act on plain heads");
    return h == HeadSelector::hard ? bundle.hard_head : bundle.soft_head;
  };
  const double inv_b = 1.0 / static_cast<double>(b);

  HybridBatch out;
  out.grad_features = Matrix(b, features.cols);
  Matrix ce_grad, kd_grad;
  if (wiring.ce_head && lambda1 != 0.0) {
    out.hard_logits = head_of(*wiring.ce_head).forward(features);
    ce_grad = Matrix(b, out.hard_logits.cols);
    for (std::size_t i = 0; i < b; ++i)
      out.ce += model::cross_entropy(out.hard_logits.row(i), labels[i], ce_grad.row(i),
                                     lambda1 * inv_b);
    out.ce *= inv_b;
  }
  if (wiring.kd_head && lambda2 != 0.0) {
    require(soft_targets.rows == b, "hybrid_backward: soft target count mismatch");
    out.soft_logits = head_of(*wiring.kd_head).forward(features);
    require(soft_targets.cols == out.soft_logits.cols, "hybrid_backward: soft target width");
    kd_grad = Matrix(b, out.soft_logits.cols);
    for (std::size_t i = 0; i < b; ++i)
      out.kd += kd_loss(soft_targets.row(i), out.soft_logits.row(i), temperature,
                        kd_grad.row(i), lambda2 * inv_b);
    out.kd *= inv_b;
  }
  out.total = lambda1 * out.ce + lambda2 * out.kd;

  const bool has_ce = ce_grad.rows > 0;
  const bool has_kd = kd_grad.rows > 0;
  if (has_ce && has_kd && *wiring.ce_head == *wiring.kd_head) {
    add_scaled(ce_grad, kd_grad);
    add_scaled(out.grad_features, head_of(*wiring.ce_head).backward(features, ce_grad, true));
  } else {
    if (has_ce)
      add_scaled(out.grad_features, head_of(*wiring.ce_head).backward(features, ce_grad, true));
    if (has_kd)
      add_scaled(out.grad_features, head_of(*wiring.kd_head).backward(features, kd_grad, true));
  }
  return out;
}

}  // namespace ssd::distill
