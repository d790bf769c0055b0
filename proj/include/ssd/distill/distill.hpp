#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssd/common/matrix.hpp"
#include "ssd/datasets/dataset.hpp"
#include "ssd/model/bundle.hpp"

namespace ssd::distill {

inline constexpr double kDefaultTemperature = 2.0;

// exp(z_i / T) / sum_k exp(z_k / T) with max subtraction.
// Throws for T <= 0 or non-finite logits.
std::vector<double> softmax_with_temperature(std::span<const float> z, double temperature);

// Teacher distributions, one row per training instance, rows sorted by id.
struct SoftLabelSet {
  int num_classes = 0;
  double temperature = kDefaultTemperature;
  std::string teacher_hash;
  std::vector<std::int64_t> ids;
  Matrix probabilities;  // [N x C]

  std::size_t size() const { return ids.size(); }
  bool contains(std::int64_t id) const;
  std::span<const float> row(std::int64_t id) const;  // throws if absent

  bool operator==(const SoftLabelSet&) const = default;
};

// Teacher logits are the LWS-rescaled head outputs; scales must be given and
// sized to the head.
SoftLabelSet generate_soft_labels(const datasets::LongTailedDataset& dataset,
                                  const model::Backbone& teacher_backbone,
                                  const model::LinearHead& teacher_head,
                                  const model::LWSScales* scales, double temperature,
                                  std::string teacher_hash);

// -T^2 sum_i y_i log softmax(z / T)_i. y must be a distribution (entries
// >= 0, sum within 1e-4 of 1). grad (optional) receives scale * T * (q - y).
double kd_loss(std::span<const float> y_soft, std::span<const float> z_soft,
               double temperature, std::span<float> grad = {}, double scale = 1.0);

struct HybridLoss {
  double total = 0.0;
  double ce = 0.0;
  double kd = 0.0;
};

// lambda1 * CE(y_hard, z_hard) + lambda2 * KD(y_soft, z_soft, T).
HybridLoss hybrid_loss(int y_hard, std::span<const float> z_hard,
                       std::span<const float> y_soft, std::span<const float> z_soft,
                       double temperature, double lambda1, double lambda2,
                       std::span<float> grad_hard = {}, std::span<float> grad_soft = {});

enum class DistillMode { dual, coupled, single };

std::string_view mode_name(DistillMode mode);
DistillMode parse_mode(std::string_view name);

// Which head each loss term acts on; nullopt means the term is off.
struct LossWiring {
  std::optional<model::HeadSelector> ce_head;
  std::optional<model::HeadSelector> kd_head;
  model::HeadSelector eval_head = model::HeadSelector::soft;
};

// dual: CE on G_hard, KD on G_soft. coupled: both on G_soft. single: KD only.
LossWiring apply_distill_mode(DistillMode mode);

struct HybridBatch {
  double ce = 0.0;  // batch means, before lambda weighting
  double kd = 0.0;
  double total = 0.0;
  Matrix grad_features;
  Matrix hard_logits;  // logits of the CE head ([0 x 0] if CE is off)
  Matrix soft_logits;  // logits of the KD head
};

// Batch-mean hybrid loss through the wired heads. Head gradients are
// accumulated into the bundle; the gradient with respect to the shared
// features is returned for the backbone.
HybridBatch hybrid_backward(model::ModelBundle& bundle, const LossWiring& wiring,
                            const Matrix& features, std::span<const int> labels,
                            const Matrix& soft_targets, double temperature, double lambda1,
                            double lambda2);

// Per-class sum of soft mass over all instances.
std::vector<double> aggregate_distilled_distribution(const SoftLabelSet& soft_labels);

// max / min of a positive series (inf if some entry is 0).
double max_min_ratio(std::span<const double> series);

inline constexpr std::uint32_t kSoftLabelVersion = 1;

// "SSDSOFT\0", u32 version, u32 C, u64 N, f64 T, teacher hash, then
// (i64 id, C x f32) rows in id order.
std::string encode_soft_labels(const SoftLabelSet& set);
SoftLabelSet decode_soft_labels(const std::string& bytes);
void write_soft_labels(const std::filesystem::path& path, const SoftLabelSet& set);
SoftLabelSet read_soft_labels(const std::filesystem::path& path);
std::string soft_labels_hash(const SoftLabelSet& set);

}  // namespace ssd::distill
