#pragma once

#include <cstdint>
#include <string_view>

#include <json.hpp>
#include "ssd/common/matrix.hpp"
#include "ssd/model/backbone.hpp"
#include "ssd/model/heads.hpp"

namespace ssd::model {

struct ModelConfig {
  BackboneConfig backbone;
  int num_classes = 20;
  int embed_dim = 128;  // instance-discrimination embedding

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

inline constexpr int kRotationClasses = 4;

// Everything a stage can train or read.
//
// hard_head is the only classifier during stage I, the LWS teacher head in
// stage II and G_hard in stage III; soft_head is G_soft. The key_* members are
// the momentum encoder for instance discrimination.
struct ModelBundle {
  ModelConfig config;
  Backbone backbone;
  LinearHead hard_head;
  LinearHead soft_head;
  LinearHead rotation_head;
  ProjectionHead projection;
  Backbone key_backbone;
  ProjectionHead key_projection;
  LWSScales scales;

  ModelBundle() = default;
  // Fresh parameters; each component draws from its own derived seed.
  ModelBundle(ModelConfig config, std::uint64_t seed);

  // Stable order, unique names.
  ParameterRefs parameters();
  ConstParameterRefs parameters() const;

  // Momentum encoder pairs: query side and key side, aligned.
  ParameterRefs query_encoder_parameters();
  ParameterRefs key_encoder_parameters();
};

// A new bundle with the same configuration and fresh weights.
ModelBundle reinitialize(const ModelBundle& bundle, std::uint64_t seed);

// Trainable set for classifier re-balancing: the LWS scales, reset to 1.
// Nothing else is returned, so nothing else can move.
ParameterRefs freeze_backbone_train_scales(ModelBundle& bundle);

enum class HeadSelector { hard, soft, lws };

std::string_view head_name(HeadSelector h);
HeadSelector parse_head(std::string_view name);

// Logits from backbone features; lws applies the scales to hard_head.
Matrix head_logits(const ModelBundle& bundle, HeadSelector head, const Matrix& features);

}  // namespace ssd::model
