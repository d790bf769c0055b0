#include "ssd/model/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ssd/common/error.hpp"
#include "ssd/kernels/kernels.hpp"

namespace ssd::model {

std::string_view schedule_name(Schedule s) {
  switch (s) {
    case Schedule::constant:
      return "constant";
    case Schedule::step:
      return "step";
    case Schedule::cosine:
      return "cosine";
  }
  return "?";
}

Schedule parse_schedule(std::string_view name) {
  if (name == "constant") return Schedule::constant;
  if (name == "step") return Schedule::step;
  if (name == "cosine") return Schedule::cosine;
  throw ContractError("unknown lr schedule '" + std::string(name) + "'");
}

double scheduled_lr(const OptimizerConfig& config, std::size_t step,
                    std::size_t total_steps, std::size_t steps_per_epoch) {
  const double epoch = steps_per_epoch ? static_cast<double>(step) / steps_per_epoch : 0.0;
  double lr = config.lr;
  switch (config.schedule) {
    case Schedule::constant:
      break;
    case Schedule::step:
      if (config.step_epochs > 0)
        lr *= std::pow(config.gamma, std::floor(epoch / config.step_epochs));
      break;
    case Schedule::cosine:
      if (total_steps > 0)
        lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                                    static_cast<double>(total_steps)));
      break;
  }
  if (config.warmup_epochs > 0.0 && epoch < config.warmup_epochs)
    lr *= (epoch + 1.0 / std::max<std::size_t>(steps_per_epoch, 1)) / config.warmup_epochs;
  return lr;
}

Sgd::Sgd(ParameterRefs params, double momentum, double weight_decay)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
  velocity_.reserve(params_.size());
  for (const Parameter* p : params_) {
    require(p != nullptr, "sgd: null parameter");
    velocity_.emplace_back(p->size(), 0.0f);
  }
}

void Sgd::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Sgd::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (!p.touched) continue;
    kernels::sgd_momentum(p.value, p.grad, velocity_[i], static_cast<float>(lr),
                          static_cast<float>(momentum_),
                          p.decay ? static_cast<float>(weight_decay_) : 0.0f);
  }
}

}  // namespace ssd::model
