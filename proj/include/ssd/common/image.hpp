#pragma once

#include <cstddef>
#include <vector>

namespace ssd {

// Height x width x channels, interleaved (HWC), values nominally in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, fill) {}

  std::size_t index(int y, int x, int ch) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + ch;
  }
  float& at(int y, int x, int ch) { return pixels[index(y, x, ch)]; }
  float at(int y, int x, int ch) const { return pixels[index(y, x, ch)]; }

  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  bool operator==(const Image&) const = default;
};

}  // namespace ssd
