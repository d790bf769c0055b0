#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ssd/common/image.hpp"
#include "ssd/common/matrix.hpp"
#include "ssd/model/parameter.hpp"

namespace ssd::selfsup {

// ---- rotation prediction -------------------------------------------------

// Rotates counter-clockwise by k * 90 degrees: for k = 1,
// out(i, j) = in(j, H - 1 - i). Non-square images are rejected.
Image rotate_image(const Image& image, int k);

struct RotationBatch {
  std::vector<Image> rotated_images;
  std::vector<int> rotation_labels;  // k in {0, 1, 2, 3}
};

// One uniformly drawn rotation per image.
RotationBatch make_rotation_batch(std::span<const Image* const> images, std::mt19937_64& rng);

// Mean 4-way cross-entropy; grad (optional) receives d(mean)/dlogits.
double rotation_loss(const Matrix& logits4, std::span<const int> labels,
                     Matrix* grad = nullptr);

// ---- instance discrimination --------------------------------------------

struct InfoNceGrad {
  std::vector<double> v;
  std::vector<double> v_pos;
};

// -log( e^{v.v+/tau} / (e^{v.v+/tau} + sum_k e^{v.n_k/tau}) ) for one query.
// negatives is [K x D]; K = 0 gives exactly 0. Embeddings must be unit norm
// (tolerance 1e-3); a zero vector is a ContractError.
double info_nce_loss(std::span<const float> v, std::span<const float> v_pos,
                     const Matrix& negatives, double tau, InfoNceGrad* grad = nullptr);

// Mean over a batch of queries with their keys; keys and the queue are
// treated as constants, grad_queries (optional) is d(mean)/dqueries.
double info_nce_batch(const Matrix& queries, const Matrix& keys, const Matrix& queue,
                      double tau, Matrix* grad_queries = nullptr);

// FIFO of K unit-norm keys stored as a ring; `head` is the slot that the
// next push overwrites first, so it always holds the oldest entry.
struct ContrastiveState {
  Matrix queue;  // [K x embed_dim]
  std::size_t head = 0;
  double tau = 0.2;
  double momentum = 0.999;

  std::size_t size() const { return queue.rows; }
  std::size_t embed_dim() const { return queue.cols; }
};

inline constexpr double kReferenceTau = 0.2;
inline constexpr std::size_t kReferenceQueueSize = 65536;
inline constexpr double kReferenceMomentum = 0.999;

// Queue filled with random unit vectors.
ContrastiveState make_contrastive_state(std::size_t queue_size, std::size_t embed_dim,
                                        double tau, double momentum, std::uint64_t seed);

// Evicts the |batch| oldest rows. Throws if the batch is larger than K or a
// row is not unit norm.
void queue_push(ContrastiveState& state, const Matrix& embeddings);

// Queue rows from oldest to newest.
Matrix ordered_queue(const ContrastiveState& state);

// key <- m * key + (1 - m) * query for every aligned pair.
void momentum_update(std::span<model::Parameter* const> key,
                     std::span<model::Parameter* const> query, double m);
void momentum_update(std::span<float> key, std::span<const float> query, double m);

// ---- joint objective -----------------------------------------------------

// alpha1 * sup + alpha2 * self; both inputs must be finite.
double stage1_joint_loss(double sup_loss, double self_loss, double alpha1, double alpha2);

// ---- augmentation --------------------------------------------------------

struct AugmentConfig {
  int max_shift = 2;           // random translation with zero fill
  bool horizontal_flip = true;
  double brightness = 0.0;     // +-brightness additive jitter
  double contrast = 0.0;       // 1 +- contrast multiplicative jitter
  double saturation = 0.0;     // blend towards grey by up to this fraction
};

AugmentConfig weak_augment();
AugmentConfig strong_augment();

Image augment(const Image& image, const AugmentConfig& config, std::mt19937_64& rng);

}  // namespace ssd::selfsup
