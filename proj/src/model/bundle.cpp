#include "ssd/model/bundle.hpp"

#include <random>
#include <string>

#include "ssd/common/error.hpp"
#include "ssd/common/seed.hpp"

namespace ssd::model {

nlohmann::json to_json(const ModelConfig& config) {
  return {{"image_size", config.backbone.image_size},
          {"in_channels", config.backbone.in_channels},
          {"channels", config.backbone.channels},
          {"normalize", config.backbone.normalize},
          {"num_classes", config.num_classes},
          {"embed_dim", config.embed_dim}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.backbone.image_size = j.value("image_size", c.backbone.image_size);
  c.backbone.in_channels = j.value("in_channels", c.backbone.in_channels);
  c.backbone.channels = j.value("channels", c.backbone.channels);
  c.backbone.normalize = j.value("normalize", c.backbone.normalize);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  require(c.num_classes >= 2, "model: num_classes must be >= 2");
  require(c.embed_dim >= 1, "model: embed_dim must be positive");
  return c;
}

ModelBundle::ModelBundle(ModelConfig cfg, std::uint64_t seed) : config(std::move(cfg)) {
  require(config.num_classes >= 2, "model: num_classes must be >= 2");
  require(config.embed_dim >= 1, "model: embed_dim must be positive");
  backbone = Backbone(config.backbone);
  const std::size_t f = backbone.feature_dim();
  const auto c = static_cast<std::size_t>(config.num_classes);
  hard_head = LinearHead("head.hard", f, c);
  soft_head = LinearHead("head.soft", f, c);
  rotation_head = LinearHead("head.rotation", f, kRotationClasses);
  projection = ProjectionHead("projection", f, f, static_cast<std::size_t>(config.embed_dim));
  scales = LWSScales(c);

  std::mt19937_64 rng_backbone(derive_seed(seed, 1));
  std::mt19937_64 rng_hard(derive_seed(seed, 2));
  std::mt19937_64 rng_soft(derive_seed(seed, 3));
  std::mt19937_64 rng_rotation(derive_seed(seed, 4));
  std::mt19937_64 rng_projection(derive_seed(seed, 5));
  backbone.initialize(rng_backbone);
  hard_head.initialize(rng_hard, kHeadInitGain);
  soft_head.initialize(rng_soft, kHeadInitGain);
  rotation_head.initialize(rng_rotation, kHeadInitGain);
  projection.initialize(rng_projection);

  key_backbone = backbone;
  key_projection = projection;
  for (Parameter* p : key_encoder_parameters()) p->name = "key." + p->name;
}

ParameterRefs ModelBundle::parameters() {
  ParameterRefs out = backbone.parameters();
  for (auto* group : {&hard_head, &soft_head, &rotation_head})
    for (Parameter* p : group->parameters()) out.push_back(p);
  for (Parameter* p : projection.parameters()) out.push_back(p);
  for (Parameter* p : key_encoder_parameters()) out.push_back(p);
  out.push_back(&scales.log_scale());
  return out;
}

ConstParameterRefs ModelBundle::parameters() const {
  auto refs = const_cast<ModelBundle*>(this)->parameters();
  return {refs.begin(), refs.end()};
}

ParameterRefs ModelBundle::query_encoder_parameters() {
  ParameterRefs out = backbone.parameters();
  for (Parameter* p : projection.parameters()) out.push_back(p);
  return out;
}

ParameterRefs ModelBundle::key_encoder_parameters() {
  ParameterRefs out = key_backbone.parameters();
  for (Parameter* p : key_projection.parameters()) out.push_back(p);
  return out;
}

ModelBundle reinitialize(const ModelBundle& bundle, std::uint64_t seed) {
  return ModelBundle(bundle.config, seed);
}

ParameterRefs freeze_backbone_train_scales(ModelBundle& bundle) {
  bundle.scales.reset();
  return {&bundle.scales.log_scale()};
}

std::string_view head_name(HeadSelector h) {
  switch (h) {
    case HeadSelector::hard:
      return "hard";
    case HeadSelector::soft:
      return "soft";
    case HeadSelector::lws:
      return "lws";
  }
  return "?";
}

HeadSelector parse_head(std::string_view name) {
  if (name == "hard") return HeadSelector::hard;
  if (name == "soft") return HeadSelector::soft;
  if (name == "lws") return HeadSelector::lws;
  throw ContractError("unknown head selector '" + std::string(name) +
                      "' (expected hard, soft or lws)");
}

Matrix head_logits(const ModelBundle& bundle, HeadSelector head, const Matrix& features) {
  switch (head) {
    case HeadSelector::hard:
      return bundle.hard_head.forward(features);
    case HeadSelector::soft:
      return bundle.soft_head.forward(features);
    case HeadSelector::lws:
      return lws_forward(features, bundle.hard_head, bundle.scales);
  }
  throw ContractError("invalid head selector");
}

}  // namespace ssd::model
