#include <algorithm>

#include "ssd/selfsup/selfsup.hpp"

namespace ssd::selfsup {

AugmentConfig weak_augment() { return AugmentConfig{}; }

AugmentConfig strong_augment() {
  AugmentConfig c;
  c.max_shift = 3;
  c.brightness = 0.2;
  c.contrast = 0.3;
  c.saturation = 0.5;
  return c;
}

Image augment(const Image& image, const AugmentConfig& config, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> shift(-config.max_shift, config.max_shift);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int dy = shift(rng);
  const int dx = shift(rng);
  const bool flip = config.horizontal_flip && unit(rng) < 0.5;
  const double b = config.brightness * (2.0 * unit(rng) - 1.0);
  const double c = 1.0 + config.contrast * (2.0 * unit(rng) - 1.0);
  const double s = config.saturation * unit(rng);

  Image out(image.height, image.width, image.channels);
  for (int y = 0; y < image.height; ++y) {
    const int sy = y - dy;
    if (sy < 0 || sy >= image.height) continue;
    for (int x = 0; x < image.width; ++x) {
      int sx = x - dx;
      if (sx < 0 || sx >= image.width) continue;
      if (flip) sx = image.width - 1 - sx;
      double grey = 0.0;
      for (int ch = 0; ch < image.channels; ++ch) grey += image.at(sy, sx, ch);
      grey /= image.channels;
      for (int ch = 0; ch < image.channels; ++ch) {
        double v = image.at(sy, sx, ch);
        v = (1.0 - s) * v + s * grey;
        v = (v - 0.5) * c + 0.5 + b;
        out.at(y, x, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace ssd::selfsup
