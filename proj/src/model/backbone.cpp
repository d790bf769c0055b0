#include "ssd/model/backbone.hpp"

#include <cmath>
#include <string>

#include "ssd/common/error.hpp"
#include "ssd/kernels/kernels.hpp"
#include "ssd/model/layers.hpp"

namespace ssd::model {
namespace {

constexpr int kKernel = 3;
constexpr int kTaps = kKernel * kKernel;
constexpr double kNormEpsilon = 1e-5;

// [c x h x w] -> [c*9 x h*w], zero padding of one pixel.
void im2col(const float* in, int channels, int size, float* col) {
  const int hw = size * size;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kKernel; ++ky) {
      for (int kx = 0; kx < kKernel; ++kx) {
        float* dst = col + static_cast<std::size_t>((c * kTaps + ky * kKernel + kx)) * hw;
        for (int y = 0; y < size; ++y) {
          const int sy = y + ky - 1;
          for (int x = 0; x < size; ++x) {
            const int sx = x + kx - 1;
            dst[y * size + x] = (sy < 0 || sy >= size || sx < 0 || sx >= size)
                                    ? 0.0f
                                    : in[(c * size + sy) * size + sx];
          }
        }
      }
    }
  }
}

void col2im(const float* col, int channels, int size, float* out) {
  const int hw = size * size;
  std::fill(out, out + static_cast<std::size_t>(channels) * hw, 0.0f);
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kKernel; ++ky) {
      for (int kx = 0; kx < kKernel; ++kx) {
        const float* src =
            col + static_cast<std::size_t>((c * kTaps + ky * kKernel + kx)) * hw;
        for (int y = 0; y < size; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= size) continue;
          for (int x = 0; x < size; ++x) {
            const int sx = x + kx - 1;
            if (sx < 0 || sx >= size) continue;
            out[(c * size + sy) * size + sx] += src[y * size + x];
          }
        }
      }
    }
  }
}

// 2x2 stride-2 average; a trailing odd row/column is dropped.
std::vector<float> avg_pool(const std::vector<float>& in, int channels, int size) {
  const int out_size = size / 2;
  std::vector<float> out(static_cast<std::size_t>(channels) * out_size * out_size);
  for (int c = 0; c < channels; ++c) {
    const float* src = in.data() + static_cast<std::size_t>(c) * size * size;
    float* dst = out.data() + static_cast<std::size_t>(c) * out_size * out_size;
    for (int y = 0; y < out_size; ++y) {
      for (int x = 0; x < out_size; ++x) {
        const float* p = src + (2 * y) * size + 2 * x;
        dst[y * out_size + x] = 0.25f * (p[0] + p[1] + p[size] + p[size + 1]);
      }
    }
  }
  return out;
}

std::vector<float> avg_pool_backward(const std::vector<float>& grad, int channels, int size) {
  const int out_size = size / 2;
  std::vector<float> out(static_cast<std::size_t>(channels) * size * size, 0.0f);
  for (int c = 0; c < channels; ++c) {
    const float* src = grad.data() + static_cast<std::size_t>(c) * out_size * out_size;
    float* dst = out.data() + static_cast<std::size_t>(c) * size * size;
    for (int y = 0; y < out_size; ++y) {
      for (int x = 0; x < out_size; ++x) {
        const float g = 0.25f * src[y * out_size + x];
        float* p = dst + (2 * y) * size + 2 * x;
        p[0] = g;
        p[1] = g;
        p[size] = g;
        p[size + 1] = g;
      }
    }
  }
  return out;
}

}  // namespace

Backbone::Backbone(BackboneConfig config) : config_(std::move(config)) {
  require(config_.image_size >= 1, "backbone: image_size must be positive");
  require(config_.in_channels >= 1, "backbone: in_channels must be positive");
  require(!config_.channels.empty(), "backbone: need at least one conv block");
  int in_c = config_.in_channels;
  int size = config_.image_size;
  for (std::size_t b = 0; b < config_.channels.size(); ++b) {
    const int out_c = config_.channels[b];
    require(out_c >= 1, "backbone: channel counts must be positive");
    Block block;
    block.in_channels = in_c;
    block.out_channels = out_c;
    block.size = size;
    block.pool = b + 1 < config_.channels.size();
    const std::string name = "backbone.conv" + std::to_string(b);
    block.weight = Parameter(name + ".weight",
                             {static_cast<std::size_t>(out_c),
                              static_cast<std::size_t>(in_c * kTaps)});
    block.bias = Parameter(name + ".bias", {static_cast<std::size_t>(out_c)}, false);
    if (config_.normalize) {
      block.gain = Parameter(name + ".norm_gain", {static_cast<std::size_t>(out_c)}, false);
      block.shift = Parameter(name + ".norm_shift", {static_cast<std::size_t>(out_c)}, false);
    }
    if (block.pool) {
      size /= 2;
      require(size >= 1, "backbone: image too small for the number of pooling stages");
    }
    in_c = out_c;
    blocks_.push_back(std::move(block));
  }
}

void Backbone::initialize(std::mt19937_64& rng) {
  for (Block& b : blocks_) {
    const float fan_in = static_cast<float>(b.in_channels * kTaps);
    init_uniform(b.weight, kReluInitGain / std::sqrt(fan_in), rng);
    std::fill(b.bias.value.begin(), b.bias.value.end(), 0.0f);
    std::fill(b.gain.value.begin(), b.gain.value.end(), 1.0f);
    std::fill(b.shift.value.begin(), b.shift.value.end(), 0.0f);
  }
}

std::size_t Backbone::feature_dim() const {
  return config_.channels.empty() ? 0 : static_cast<std::size_t>(config_.channels.back());
}

std::vector<float> Backbone::forward_image(const Image& image,
                                           std::vector<BackboneTape::Block>* tape) const {
  require(image.height == config_.image_size && image.width == config_.image_size &&
              image.channels == config_.in_channels,
          "backbone: expected " + std::to_string(config_.image_size) + "x" +
              std::to_string(config_.image_size) + "x" + std::to_string(config_.in_channels) +
              " image, got " + std::to_string(image.height) + "x" +
              std::to_string(image.width) + "x" + std::to_string(image.channels));
  const int size0 = config_.image_size;
  std::vector<float> x(static_cast<std::size_t>(config_.in_channels) * size0 * size0);
  for (int y = 0; y < size0; ++y)
    for (int xx = 0; xx < size0; ++xx)
      for (int c = 0; c < config_.in_channels; ++c)
        x[(static_cast<std::size_t>(c) * size0 + y) * size0 + xx] = image.at(y, xx, c);

  if (tape) tape->resize(blocks_.size());
  for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
    const Block& b = blocks_[bi];
    const std::size_t hw = static_cast<std::size_t>(b.size) * b.size;
    const std::size_t taps = static_cast<std::size_t>(b.in_channels) * kTaps;
    std::vector<float> col(taps * hw);
    im2col(x.data(), b.in_channels, b.size, col.data());
    std::vector<float> pre(static_cast<std::size_t>(b.out_channels) * hw);
    kernels::gemm_nn(b.out_channels, hw, taps, b.weight.value, col, pre, false);
    for (int c = 0; c < b.out_channels; ++c) {
      float* row = pre.data() + c * hw;
      const float bias = b.bias.value[c];
      for (std::size_t i = 0; i < hw; ++i) row[i] += bias;
    }
    std::vector<float> normed;
    float inv_std = 1.0f;
    if (config_.normalize) {
      double sum = 0.0, sq = 0.0;
      for (float v : pre) sum += v;
      const double mean = sum / static_cast<double>(pre.size());
      for (float v : pre) sq += (v - mean) * (v - mean);
      inv_std = static_cast<float>(1.0 / std::sqrt(sq / pre.size() + kNormEpsilon));
      normed.resize(pre.size());
      for (int c = 0; c < b.out_channels; ++c) {
        const float g = b.gain.value[c];
        const float s = b.shift.value[c];
        for (std::size_t i = c * hw; i < (c + 1) * hw; ++i) {
          normed[i] = static_cast<float>(pre[i] - mean) * inv_std;
          pre[i] = g * normed[i] + s;
        }
      }
    }
    std::vector<float> act(pre.size());
    kernels::relu(pre, act);
    x = b.pool ? avg_pool(act, b.out_channels, b.size) : std::move(act);
    if (tape) {
      (*tape)[bi].columns = std::move(col);
      (*tape)[bi].pre = std::move(pre);
      (*tape)[bi].normed = std::move(normed);
      (*tape)[bi].inv_std = inv_std;
    }
  }

  const Block& last = blocks_.back();
  const std::size_t hw = static_cast<std::size_t>(last.size) * last.size;
  std::vector<float> feature(last.out_channels);
  for (int c = 0; c < last.out_channels; ++c) {
    float sum = 0.0f;
    for (std::size_t i = 0; i < hw; ++i) sum += x[c * hw + i];
    feature[c] = sum / static_cast<float>(hw);
  }
  return feature;
}

Matrix Backbone::forward(std::span<const Image* const> batch) const {
  Matrix out(batch.size(), feature_dim());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto f = forward_image(*batch[i], nullptr);
    std::copy(f.begin(), f.end(), out.row(i).begin());
  }
  return out;
}

Matrix Backbone::forward(std::span<const Image* const> batch, BackboneTape& tape) const {
  Matrix out(batch.size(), feature_dim());
  tape.images.assign(batch.size(), {});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto f = forward_image(*batch[i], &tape.images[i]);
    std::copy(f.begin(), f.end(), out.row(i).begin());
  }
  return out;
}

void Backbone::backward(const BackboneTape& tape, const Matrix& grad_features) {
  require(grad_features.rows == tape.images.size() && grad_features.cols == feature_dim(),
          "backbone: backward shape mismatch");
  std::vector<std::span<float>> weight_grad;
  std::vector<std::span<float>> bias_grad;
  std::vector<std::span<float>> gain_grad;
  std::vector<std::span<float>> shift_grad;
  for (Block& b : blocks_) {
    weight_grad.push_back(b.weight.grad_sink());
    bias_grad.push_back(b.bias.grad_sink());
    if (config_.normalize) {
      gain_grad.push_back(b.gain.grad_sink());
      shift_grad.push_back(b.shift.grad_sink());
    }
  }

  for (std::size_t img = 0; img < tape.images.size(); ++img) {
    const auto& blocks_tape = tape.images[img];
    const Block& last = blocks_.back();
    const std::size_t last_hw = static_cast<std::size_t>(last.size) * last.size;
    std::vector<float> grad(static_cast<std::size_t>(last.out_channels) * last_hw);
    const auto gf = grad_features.row(img);
    for (int c = 0; c < last.out_channels; ++c) {
      const float g = gf[c] / static_cast<float>(last_hw);
      std::fill(grad.begin() + c * last_hw, grad.begin() + (c + 1) * last_hw, g);
    }

    for (std::size_t bi = blocks_.size(); bi-- > 0;) {
      const Block& b = blocks_[bi];
      const std::size_t hw = static_cast<std::size_t>(b.size) * b.size;
      const std::size_t taps = static_cast<std::size_t>(b.in_channels) * kTaps;
      if (b.pool) grad = avg_pool_backward(grad, b.out_channels, b.size);
      std::vector<float> grad_pre(grad.size());
      kernels::relu_backward(blocks_tape[bi].pre, grad, grad_pre);
      if (config_.normalize) {
        // Through y = g * xhat + s and xhat = (pre - mean) * inv_std.
        const auto& xhat = blocks_tape[bi].normed;
        double mean_dx = 0.0, mean_dx_xhat = 0.0;
        for (int c = 0; c < b.out_channels; ++c) {
          float dg = 0.0f, ds = 0.0f;
          for (std::size_t i = c * hw; i < (c + 1) * hw; ++i) {
            dg += grad_pre[i] * xhat[i];
            ds += grad_pre[i];
            grad_pre[i] *= b.gain.value[c];
            mean_dx += grad_pre[i];
            mean_dx_xhat += static_cast<double>(grad_pre[i]) * xhat[i];
          }
          gain_grad[bi][c] += dg;
          shift_grad[bi][c] += ds;
        }
        const double n = static_cast<double>(grad_pre.size());
        mean_dx /= n;
        mean_dx_xhat /= n;
        const float inv_std = blocks_tape[bi].inv_std;
        for (std::size_t i = 0; i < grad_pre.size(); ++i)
          grad_pre[i] = static_cast<float>((grad_pre[i] - mean_dx - xhat[i] * mean_dx_xhat) * inv_std);
      }
      kernels::gemm_nt(b.out_channels, taps, hw, grad_pre, blocks_tape[bi].columns,
                       weight_grad[bi], true);
      for (int c = 0; c < b.out_channels; ++c) {
        float sum = 0.0f;
        for (std::size_t i = 0; i < hw; ++i) sum += grad_pre[c * hw + i];
        bias_grad[bi][c] += sum;
      }
      if (bi == 0) break;
      std::vector<float> grad_col(taps * hw);
      kernels::gemm_tn(taps, hw, b.out_channels, b.weight.value, grad_pre, grad_col, false);
      grad.assign(static_cast<std::size_t>(b.in_channels) * hw, 0.0f);
      col2im(grad_col.data(), b.in_channels, b.size, grad.data());
    }
  }
}

ParameterRefs Backbone::parameters() {
  ParameterRefs out;
  for (Block& b : blocks_) {
    out.push_back(&b.weight);
    out.push_back(&b.bias);
    if (config_.normalize) {
      out.push_back(&b.gain);
      out.push_back(&b.shift);
    }
  }
  return out;
}

ConstParameterRefs Backbone::parameters() const {
  ConstParameterRefs out;
  for (const Block& b : blocks_) {
    out.push_back(&b.weight);
    out.push_back(&b.bias);
    if (config_.normalize) {
      out.push_back(&b.gain);
      out.push_back(&b.shift);
    }
  }
  return out;
}

}  // namespace ssd::model
