#include "ssd/pipeline/config.hpp"

#include <fstream>

#include "ssd/common/error.hpp"
#include "ssd/common/hash.hpp"
#include "ssd/common/seed.hpp"
#include "ssd/datasets/manifest.hpp"

namespace ssd::pipeline {

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::I:
      return "I";
    case Stage::II:
      return "II";
    case Stage::III:
      return "III";
    case Stage::IV:
      return "IV";
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  if (name == "I" || name == "1") return Stage::I;
  if (name == "II" || name == "2") return Stage::II;
  if (name == "III" || name == "3") return Stage::III;
  if (name == "IV" || name == "4") return Stage::IV;
  throw ContractError("unknown stage '" + std::string(name) + "'");
}

std::string_view task_name(SelfSupTask t) {
  switch (t) {
    case SelfSupTask::none:
      return "none";
    case SelfSupTask::rotation:
      return "rotation";
    case SelfSupTask::instance_discrimination:
      return "instance_discrimination";
  }
  return "?";
}

SelfSupTask parse_task(std::string_view name) {
  if (name == "none") return SelfSupTask::none;
  if (name == "rotation") return SelfSupTask::rotation;
  if (name == "instance_discrimination") return SelfSupTask::instance_discrimination;
  throw ContractError("unknown self-supervised task '" + std::string(name) + "'");
}

void validate(const StageConfig& c) {
  const auto s = std::string(stage_name(c.stage));
  const bool balanced = c.stage == Stage::II || c.stage == Stage::IV;
  const auto want = balanced ? sampling::Strategy::class_balanced
                             : sampling::Strategy::instance_balanced;
  require(c.sampler.strategy == want, "stage " + s + " must use " +
                                          std::string(sampling::strategy_name(want)) +
                                          " sampling");
  require(c.epochs >= 0, "stage " + s + ": epochs must be >= 0");
  require(c.batch_size >= 1, "stage " + s + ": batch_size must be >= 1");
  require(!c.sampler.epoch_length || *c.sampler.epoch_length > 0,
          "stage " + s + ": epoch_length must be > 0");
  require(c.optimizer.lr >= 0.0 && c.optimizer.momentum >= 0.0 && c.optimizer.momentum < 1.0 &&
              c.optimizer.weight_decay >= 0.0,
          "stage " + s + ": invalid optimizer settings");
  require(c.temperature > 0.0, "stage " + s + ": temperature must be > 0");
  require(c.tau > 0.0, "stage " + s + ": tau must be > 0");
  require(c.key_momentum >= 0.0 && c.key_momentum <= 1.0,
          "stage " + s + ": key momentum must be in [0,1]");
  require(c.queue_size >= 1, "stage " + s + ": queue_size must be >= 1");
  if (c.stage != Stage::I)
    require(c.selfsup_task == SelfSupTask::none,
            "stage " + s + ": self-supervision belongs to stage I only");
}

StageConfig default_stage_config(Stage stage, std::uint64_t master_seed) {
  StageConfig c;
  c.stage = stage;
  c.seed = derive_seed(master_seed, static_cast<std::uint64_t>(stage));
  c.sampler.seed = derive_seed(c.seed, 7);
  switch (stage) {
    case Stage::I:
    case Stage::III:
      c.epochs = 30;
      c.batch_size = 32;
      c.optimizer.lr = 0.05;
      c.sampler.strategy = sampling::Strategy::instance_balanced;
      break;
    case Stage::II:
    case Stage::IV:
      c.epochs = 10;
      c.batch_size = 64;
      c.optimizer.lr = 0.1;
      c.optimizer.weight_decay = 0.0;
      c.optimizer.schedule = model::Schedule::constant;
      c.augment = false;
      c.sampler.strategy = sampling::Strategy::class_balanced;
      break;
  }
  if (stage == Stage::I) c.selfsup_task = SelfSupTask::rotation;
  return c;
}

nlohmann::json to_json(const StageConfig& c) {
  nlohmann::json sampler = {{"strategy", std::string(sampling::strategy_name(c.sampler.strategy))},
                            {"seed", c.sampler.seed}};
  sampler["epoch_length"] =
      c.sampler.epoch_length ? nlohmann::json(*c.sampler.epoch_length) : nlohmann::json();
  return {{"stage", std::string(stage_name(c.stage))},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"optimizer",
           {{"lr", c.optimizer.lr},
            {"momentum", c.optimizer.momentum},
            {"weight_decay", c.optimizer.weight_decay},
            {"schedule", std::string(model::schedule_name(c.optimizer.schedule))},
            {"step_epochs", c.optimizer.step_epochs},
            {"gamma", c.optimizer.gamma},
            {"warmup_epochs", c.optimizer.warmup_epochs}}},
          {"sampler", sampler},
          {"augment", c.augment},
          {"selfsup_task", std::string(task_name(c.selfsup_task))},
          {"alpha1", c.alpha1},
          {"alpha2", c.alpha2},
          {"queue_size", c.queue_size},
          {"tau", c.tau},
          {"key_momentum", c.key_momentum},
          {"temperature", c.temperature},
          {"distill_mode", std::string(distill::mode_name(c.distill_mode))},
          {"lambda1", c.lambda1},
          {"lambda2", c.lambda2},
          {"seed", c.seed}};
}

StageConfig stage_config_from_json(const nlohmann::json& j, Stage stage,
                                   std::uint64_t master_seed) {
  StageConfig c = default_stage_config(stage, master_seed);
  if (j.contains("stage"))
    require(parse_stage(j.at("stage").get<std::string>()) == stage,
            "stage section names stage " + j.at("stage").get<std::string>() + ", expected " +
                std::string(stage_name(stage)));
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    c.optimizer.lr = o.value("lr", c.optimizer.lr);
    c.optimizer.momentum = o.value("momentum", c.optimizer.momentum);
    c.optimizer.weight_decay = o.value("weight_decay", c.optimizer.weight_decay);
    if (o.contains("schedule"))
      c.optimizer.schedule = model::parse_schedule(o.at("schedule").get<std::string>());
    c.optimizer.step_epochs = o.value("step_epochs", c.optimizer.step_epochs);
    c.optimizer.gamma = o.value("gamma", c.optimizer.gamma);
    c.optimizer.warmup_epochs = o.value("warmup_epochs", c.optimizer.warmup_epochs);
  }
  if (j.contains("seed")) {
    c.seed = j.at("seed").get<std::uint64_t>();
    c.sampler.seed = derive_seed(c.seed, 7);
  }
  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    if (s.contains("strategy"))
      c.sampler.strategy = sampling::parse_strategy(s.at("strategy").get<std::string>());
    if (s.contains("seed")) c.sampler.seed = s.at("seed").get<std::uint64_t>();
    if (s.contains("epoch_length") && !s.at("epoch_length").is_null())
      c.sampler.epoch_length = s.at("epoch_length").get<std::size_t>();
  }
  c.augment = j.value("augment", c.augment);
  if (j.contains("selfsup_task"))
    c.selfsup_task = parse_task(j.at("selfsup_task").get<std::string>());
  c.alpha1 = j.value("alpha1", c.alpha1);
  c.alpha2 = j.value("alpha2", c.alpha2);
  c.queue_size = j.value("queue_size", c.queue_size);
  c.tau = j.value("tau", c.tau);
  c.key_momentum = j.value("key_momentum", c.key_momentum);
  c.temperature = j.value("temperature", c.temperature);
  if (j.contains("distill_mode"))
    c.distill_mode = distill::parse_mode(j.at("distill_mode").get<std::string>());
  c.lambda1 = j.value("lambda1", c.lambda1);
  c.lambda2 = j.value("lambda2", c.lambda2);
  validate(c);
  return c;
}

std::string config_hash(const StageConfig& config) {
  return sha256_hex(std::string_view(to_json(config).dump()));
}

MasterConfig master_config_from_json(const nlohmann::json& j) {
  MasterConfig m;
  m.seed = j.value("seed", std::uint64_t{0});
  m.dataset.seed = m.seed;
  if (j.contains("dataset")) {
    auto d = j.at("dataset");
    if (!d.contains("seed")) d["seed"] = m.seed;
    m.dataset = datasets::synthetic_spec_from_json(d);
  }
  if (j.contains("model")) m.model = model::model_config_from_json(j.at("model"));
  m.model.num_classes = m.dataset.num_classes;
  m.model.backbone.image_size = m.dataset.image_size;
  const nlohmann::json empty = nlohmann::json::object();
  auto section = [&](const char* key) -> const nlohmann::json& {
    return j.contains(key) ? j.at(key) : empty;
  };
  m.stage1 = stage_config_from_json(section("stage1"), Stage::I, m.seed);
  m.stage2 = stage_config_from_json(section("stage2"), Stage::II, m.seed);
  m.stage3 = stage_config_from_json(section("stage3"), Stage::III, m.seed);
  m.stage4 = stage_config_from_json(section("stage4"), Stage::IV, m.seed);
  m.run_stage4 = j.value("run_stage4", true);
  return m;
}

MasterConfig load_master_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("config '" + path.string() + "' not found");
  try {
    return master_config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ContractError("config '" + path.string() + "': " + e.what());
  }
}

nlohmann::json to_json(const MasterConfig& m) {
  return {{"seed", m.seed},
          {"dataset", datasets::synthetic_provenance(m.dataset)},
          {"model", model::to_json(m.model)},
          {"stage1", to_json(m.stage1)},
          {"stage2", to_json(m.stage2)},
          {"stage3", to_json(m.stage3)},
          {"stage4", to_json(m.stage4)},
          {"run_stage4", m.run_stage4}};
}

MasterConfig with_seed(const MasterConfig& config, std::uint64_t seed) {
  MasterConfig m = config;
  m.seed = seed;
  m.dataset.seed = seed;
  for (StageConfig* s : {&m.stage1, &m.stage2, &m.stage3, &m.stage4}) {
    s->seed = derive_seed(seed, static_cast<std::uint64_t>(s->stage));
    s->sampler.seed = derive_seed(s->seed, 7);
  }
  return m;
}

}  // namespace ssd::pipeline
