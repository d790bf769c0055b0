#pragma once

#include <random>
#include <span>
#include <vector>

#include "ssd/common/image.hpp"
#include "ssd/common/matrix.hpp"
#include "ssd/model/parameter.hpp"

namespace ssd::model {

// Small CNN: a stack of 3x3 "same" convolutions with ReLU, 2x2 average
// pooling after every block but the last, then global average pooling.
// With `normalize`, each conv output is standardised per image over all of
// its channels and positions, then scaled and shifted per channel, before
// the ReLU. The statistics never mix images, so there is no train/eval mode.
struct BackboneConfig {
  int image_size = 16;
  int in_channels = 3;
  std::vector<int> channels{16, 32, 64};
  bool normalize = true;

  bool operator==(const BackboneConfig&) const = default;
};

// Activations kept by a training-mode forward pass, one entry per image.
struct BackboneTape {
  struct Block {
    std::vector<float> columns;  // im2col of the block input
    std::vector<float> pre;      // ReLU input
    std::vector<float> normed;   // standardised conv output (normalize only)
    float inv_std = 1.0f;
  };
  std::vector<std::vector<Block>> images;
};

class Backbone {
 public:
  Backbone() = default;
  explicit Backbone(BackboneConfig config);

  void initialize(std::mt19937_64& rng);

  const BackboneConfig& config() const { return config_; }
  std::size_t feature_dim() const;

  // Images must be image_size x image_size x in_channels. Output is
  // [batch x feature_dim]; the forward pass has no stochastic layers, so
  // repeated evaluation is deterministic.
  Matrix forward(std::span<const Image* const> batch) const;
  Matrix forward(std::span<const Image* const> batch, BackboneTape& tape) const;

  // Accumulates parameter gradients for dL/dfeatures.
  void backward(const BackboneTape& tape, const Matrix& grad_features);

  ParameterRefs parameters();
  ConstParameterRefs parameters() const;

 private:
  struct Block {
    int in_channels = 0;
    int out_channels = 0;
    int size = 0;  // input height == width
    bool pool = false;
    Parameter weight;  // [out x in*9]
    Parameter bias;    // [out]
    Parameter gain;    // [out], normalize only
    Parameter shift;   // [out], normalize only
  };

  std::vector<float> forward_image(const Image& image,
                                   std::vector<BackboneTape::Block>* tape) const;

  BackboneConfig config_;
  std::vector<Block> blocks_;
};

}  // namespace ssd::model
