#include <cmath>
#include <string>

#include "ssd/common/error.hpp"
#include "ssd/model/losses.hpp"
#include "ssd/selfsup/selfsup.hpp"

namespace ssd::selfsup {

Image rotate_image(const Image& image, int k) {
  require(image.height == image.width,
          "rotate_image: needs a square image, got " + std::to_string(image.height) + "x" +
              std::to_string(image.width));
  require(k >= 0 && k <= 3, "rotate_image: k must be in {0,1,2,3}, got " + std::to_string(k));
  Image cur = image;
  const int n = image.height;
  for (int step = 0; step < k; ++step) {
    Image next(n, n, image.channels);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int c = 0; c < image.channels; ++c) next.at(i, j, c) = cur.at(j, n - 1 - i, c);
    cur = std::move(next);
  }
  return cur;
}

RotationBatch make_rotation_batch(std::span<const Image* const> images, std::mt19937_64& rng) {
  RotationBatch batch;
  batch.rotated_images.reserve(images.size());
  batch.rotation_labels.reserve(images.size());
  std::uniform_int_distribution<int> pick(0, 3);
  for (const Image* img : images) {
    const int k = pick(rng);
    batch.rotated_images.push_back(rotate_image(*img, k));
    batch.rotation_labels.push_back(k);
  }
  return batch;
}

double rotation_loss(const Matrix& logits4, std::span<const int> labels, Matrix* grad) {
  require(logits4.cols == 4, "rotation_loss: logits must have 4 columns, got " +
                                 std::to_string(logits4.cols));
  for (int y : labels)
    require(y >= 0 && y <= 3, "rotation_loss: label " + std::to_string(y) + " outside {0..3}");
  return model::mean_cross_entropy(logits4, labels, grad);
}

double stage1_joint_loss(double sup_loss, double self_loss, double alpha1, double alpha2) {
  require(std::isfinite(sup_loss) && std::isfinite(self_loss),
          "stage1_joint_loss: non-finite component loss");
  return alpha1 * sup_loss + alpha2 * self_loss;
}

}  // namespace ssd::selfsup
