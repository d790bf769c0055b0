#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "ssd/model/parameter.hpp"

namespace ssd::model {

enum class Schedule { constant, step, cosine };

std::string_view schedule_name(Schedule s);
Schedule parse_schedule(std::string_view name);

struct OptimizerConfig {
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  Schedule schedule = Schedule::cosine;
  int step_epochs = 10;  // step schedule: decay every step_epochs
  double gamma = 0.1;    // step schedule: decay factor
  double warmup_epochs = 0.0;

  bool operator==(const OptimizerConfig&) const = default;
};

// Learning rate at `step` of `total_steps` (steps_per_epoch maps epochs).
double scheduled_lr(const OptimizerConfig& config, std::size_t step,
                    std::size_t total_steps, std::size_t steps_per_epoch);

// SGD with heavy-ball momentum and L2 weight decay (skipped for parameters
// with decay == false). Parameters whose gradient was not touched since the
// last zero_grad() are not updated at all.
class Sgd {
 public:
  Sgd(ParameterRefs params, double momentum, double weight_decay);

  void zero_grad();
  void step(double lr);

  const ParameterRefs& parameters() const { return params_; }

 private:
  ParameterRefs params_;
  std::vector<std::vector<float>> velocity_;
  double momentum_;
  double weight_decay_;
};

}  // namespace ssd::model
