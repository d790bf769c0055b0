#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "ssd/datasets/synthetic.hpp"
#include "ssd/distill/distill.hpp"
#include "ssd/model/bundle.hpp"
#include "ssd/model/optimizer.hpp"
#include "ssd/sampling/sampler.hpp"

namespace ssd::pipeline {

enum class Stage { I = 1, II = 2, III = 3, IV = 4 };
enum class SelfSupTask { none, rotation, instance_discrimination };

std::string_view stage_name(Stage s);  // "I" .. "IV"
Stage parse_stage(std::string_view name);
std::string_view task_name(SelfSupTask t);
SelfSupTask parse_task(std::string_view name);

struct StageConfig {
  Stage stage = Stage::I;
  int epochs = 1;
  std::size_t batch_size = 32;
  model::OptimizerConfig optimizer;
  sampling::SamplerSpec sampler;
  bool augment = true;  // weak crop/flip on the supervised branch (stages I and III)

  // stage I
  SelfSupTask selfsup_task = SelfSupTask::none;
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  std::size_t queue_size = 4096;
  double tau = 0.2;
  double key_momentum = 0.99;

  // stages II and III
  double temperature = distill::kDefaultTemperature;
  distill::DistillMode distill_mode = distill::DistillMode::dual;
  double lambda1 = 1.0;
  double lambda2 = 1.0;

  std::uint64_t seed = 0;
};

// Sampling strategy per stage: I and III instance-balanced, II and IV
// class-balanced. Also rejects non-positive sizes and rates.
void validate(const StageConfig& config);

// Defaults for a stage, with seeds derived from the master seed.
StageConfig default_stage_config(Stage stage, std::uint64_t master_seed);

nlohmann::json to_json(const StageConfig& config);
// Missing keys take the stage defaults for master_seed.
StageConfig stage_config_from_json(const nlohmann::json& j, Stage stage,
                                   std::uint64_t master_seed);

// SHA-256 of the canonical JSON form.
std::string config_hash(const StageConfig& config);

struct MasterConfig {
  std::uint64_t seed = 0;
  datasets::SyntheticSpec dataset;
  model::ModelConfig model;
  StageConfig stage1 = default_stage_config(Stage::I, 0);
  StageConfig stage2 = default_stage_config(Stage::II, 0);
  StageConfig stage3 = default_stage_config(Stage::III, 0);
  StageConfig stage4 = default_stage_config(Stage::IV, 0);
  bool run_stage4 = true;
};

// dataset.seed defaults to the master seed; stage seeds derive from it.
MasterConfig master_config_from_json(const nlohmann::json& j);
MasterConfig load_master_config(const std::filesystem::path& path);
nlohmann::json to_json(const MasterConfig& config);

// Re-seeds the whole configuration (dataset and every stage) from `seed`,
// preserving every other field.
MasterConfig with_seed(const MasterConfig& config, std::uint64_t seed);

}  // namespace ssd::pipeline
