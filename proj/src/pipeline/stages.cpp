#include <array>
#include <cmath>
#include <string>

#include "ssd/common/error.hpp"
#include "ssd/common/seed.hpp"
#include "ssd/model/losses.hpp"
#include "ssd/model/optimizer.hpp"
#include "ssd/pipeline/pipeline.hpp"
#include "ssd/selfsup/selfsup.hpp"

namespace ssd::pipeline {
namespace {

using datasets::LongTailedDataset;
using datasets::Split;
using model::Checkpoint;
using model::ModelBundle;

constexpr std::size_t kAll = 3;
constexpr std::size_t kFeatureBatch = 128;
constexpr std::uint64_t kAugmentTag = 11;
constexpr std::uint64_t kRotationTag = 12;
constexpr std::uint64_t kQueueTag = 13;
constexpr std::uint64_t kInitTag = 14;

// Per-split running accuracy and loss over the draws of one epoch.
struct Tally {
  std::array<std::size_t, 4> correct{};
  std::array<std::size_t, 4> total{};
  std::array<double, 4> loss{};

  void add(Split s, bool ok, double l) {
    for (std::size_t k : {static_cast<std::size_t>(s), kAll}) {
      correct[k] += ok ? 1 : 0;
      total[k] += 1;
      loss[k] += l;
    }
  }
};

void emit(MetricsLog* log, Stage stage, int epoch, const std::string& prefix, const Tally& t) {
  if (!log) return;
  for (std::size_t k = 0; k < 4; ++k) {
    const std::string split =
        k == kAll ? "all" : std::string(datasets::split_name(static_cast<Split>(k)));
    if (t.total[k] == 0) continue;
    const double n = static_cast<double>(t.total[k]);
    log->record({std::string(stage_name(stage)), epoch, split, prefix + "_accuracy",
                 static_cast<double>(t.correct[k]) / n});
    log->record({std::string(stage_name(stage)), epoch, split, prefix + "_loss", t.loss[k] / n});
  }
}

void check_finite(double loss, Stage stage, int epoch, std::size_t step) {
  if (!std::isfinite(loss))
    throw DivergenceError("stage " + std::string(stage_name(stage)) + ": non-finite loss at epoch " +
                          std::to_string(epoch) + ", step " + std::to_string(step));
}

std::vector<std::int64_t> epoch_ids(const LongTailedDataset& train, const StageConfig& c,
                                    int epoch) {
  sampling::SamplerSpec spec = c.sampler;
  spec.seed = derive_seed(c.sampler.seed, static_cast<std::uint64_t>(epoch));
  return sampling::draw(train, spec);
}

std::size_t steps_per_epoch(const LongTailedDataset& train, const StageConfig& c) {
  const std::size_t n = c.sampler.resolved_length(train);
  return (n + c.batch_size - 1) / c.batch_size;
}


Matrix per_row_ce(const Matrix& logits, std::span<const int> labels, double scale,
                  std::vector<double>& losses) {
  Matrix grad(logits.rows, logits.cols);
  losses.resize(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i)
    losses[i] = model::cross_entropy(logits.row(i), labels[i], grad.row(i), scale);
  return grad;
}

void add_into(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

Checkpoint finish(const ModelBundle& bundle, const StageConfig& c, const std::string& parent) {
  Checkpoint ckpt = model::capture(bundle);
  ckpt.metadata["stage"] = std::string(stage_name(c.stage));
  ckpt.metadata["epochs"] = std::to_string(c.epochs);
  ckpt.metadata["seed"] = std::to_string(c.seed);
  ckpt.metadata["config"] = to_json(c).dump();
  ckpt.metadata["config_hash"] = config_hash(c);
  ckpt.metadata["parent_hash"] = parent;
  return ckpt;
}

void require_stage(const Checkpoint& ckpt, Stage want, const char* who) {
  const auto it = ckpt.metadata.find("stage");
  require(it != ckpt.metadata.end() && it->second == stage_name(want),
          std::string(who) + ": expected a stage " + std::string(stage_name(want)) +
              " checkpoint, got " +
              (it == ckpt.metadata.end() ? std::string("none") : "stage " + it->second));
}

void require_classes(const ModelBundle& b, const LongTailedDataset& train, const char* who) {
  require(b.config.num_classes == train.num_classes(),
          std::string(who) + ": model has " + std::to_string(b.config.num_classes) +
              " classes, dataset has " + std::to_string(train.num_classes()));
}

// Frozen features of every training instance, indexed by storage position.
Matrix all_features(const ModelBundle& b, const LongTailedDataset& train) {
  Matrix out(train.size(), b.backbone.feature_dim());
  const auto& inst = train.instances();
  for (std::size_t start = 0; start < inst.size(); start += kFeatureBatch) {
    const std::size_t end = std::min(inst.size(), start + kFeatureBatch);
    std::vector<const Image*> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&inst[i].payload);
    const Matrix f = b.backbone.forward(batch);
    std::copy(f.data.begin(), f.data.end(), out.row(start).begin());
  }
  return out;
}

// Learnable weight scaling on hard_head over frozen features.
void train_lws(ModelBundle& bundle, const LongTailedDataset& train, const StageConfig& c,
               MetricsLog* log) {
  validate(c);
  require_classes(bundle, train, "lws");
  model::ParameterRefs params = model::freeze_backbone_train_scales(bundle);
  model::Sgd opt(params, c.optimizer.momentum, c.optimizer.weight_decay);
  const Matrix feats = all_features(bundle, train);
  const std::size_t spe = steps_per_epoch(train, c);
  const std::size_t total_steps = spe * static_cast<std::size_t>(c.epochs);
  std::size_t step = 0;
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    const auto ids = epoch_ids(train, c, epoch);
    Tally tally;
    for (std::size_t start = 0; start < ids.size(); start += c.batch_size, ++step) {
      const std::size_t end = std::min(ids.size(), start + c.batch_size);
      Matrix f(end - start, feats.cols);
      std::vector<int> labels;
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t pos = train.position_of(ids[i]);
        const auto src = feats.row(pos);
        std::copy(src.begin(), src.end(), f.row(i - start).begin());
        labels.push_back(train.instances()[pos].label);
      }
      const Matrix raw = bundle.hard_head.forward(f);
      const Matrix logits = model::lws_forward(f, bundle.hard_head, bundle.scales);
      std::vector<double> losses;
      const Matrix grad = per_row_ce(logits, labels, 1.0 / static_cast<double>(f.rows), losses);
      double mean = 0.0;
      for (std::size_t i = 0; i < losses.size(); ++i) {
        mean += losses[i];
        tally.add(train.split_tags()[labels[i]],
                  model::argmax(logits.row(i)) == labels[i], losses[i]);
      }
      check_finite(mean, c.stage, epoch, step);
      opt.zero_grad();
      model::lws_backward_scales(raw, grad, bundle.scales);
      opt.step(model::scheduled_lr(c.optimizer, step, total_steps, spe));
    }
    emit(log, c.stage, epoch, "lws", tally);
  }
}

std::vector<Image> batch_images(const LongTailedDataset& train,
                                std::span<const std::int64_t> ids, bool augment,
                                const selfsup::AugmentConfig& aug, std::mt19937_64& rng,
                                std::vector<int>& labels) {
  std::vector<Image> out;
  out.reserve(ids.size());
  labels.clear();
  for (std::int64_t id : ids) {
    const auto& inst = train.by_id(id);
    out.push_back(augment ? selfsup::augment(inst.payload, aug, rng) : inst.payload);
    labels.push_back(inst.label);
  }
  return out;
}

std::vector<const Image*> pointers(const std::vector<Image>& images) {
  std::vector<const Image*> out;
  out.reserve(images.size());
  for (const auto& im : images) out.push_back(&im);
  return out;
}

}  // namespace

Checkpoint run_stage1(const LongTailedDataset& train, const model::ModelConfig& model_config,
                      const StageConfig& c, MetricsLog* log) {
  validate(c);
  require(c.stage == Stage::I, "run_stage1: config is for stage " + std::string(stage_name(c.stage)));
  require(!train.empty(), "run_stage1: empty training set");
  ModelBundle bundle(model_config, derive_seed(c.seed, kInitTag));
  require_classes(bundle, train, "run_stage1");

  const bool rotation = c.selfsup_task == SelfSupTask::rotation;
  const bool instdisc = c.selfsup_task == SelfSupTask::instance_discrimination;
  model::ParameterRefs params = bundle.backbone.parameters();
  for (auto* p : bundle.hard_head.parameters()) params.push_back(p);
  if (rotation)
    for (auto* p : bundle.rotation_head.parameters()) params.push_back(p);
  if (instdisc)
    for (auto* p : bundle.projection.parameters()) params.push_back(p);
  model::Sgd opt(params, c.optimizer.momentum, c.optimizer.weight_decay);

  std::optional<selfsup::ContrastiveState> queue;
  if (instdisc)
    queue = selfsup::make_contrastive_state(c.queue_size, bundle.projection.out_features(), c.tau,
                                            c.key_momentum, derive_seed(c.seed, kQueueTag));
  const auto aug = instdisc ? selfsup::strong_augment() : selfsup::weak_augment();

  const std::size_t spe = steps_per_epoch(train, c);
  const std::size_t total_steps = spe * static_cast<std::size_t>(c.epochs);
  std::size_t step = 0;
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    const auto ids = epoch_ids(train, c, epoch);
    std::mt19937_64 rng(derive_seed(derive_seed(c.seed, kAugmentTag), epoch));
    std::mt19937_64 rot_rng(derive_seed(derive_seed(c.seed, kRotationTag), epoch));
    Tally sup, self;
    for (std::size_t start = 0; start < ids.size(); start += c.batch_size, ++step) {
      const std::size_t end = std::min(ids.size(), start + c.batch_size);
      const std::span<const std::int64_t> batch_ids(ids.data() + start, end - start);
      std::vector<int> labels;
      const auto images = batch_images(train, batch_ids, c.augment || instdisc, aug, rng, labels);
      const auto ptrs = pointers(images);
      const double inv_b = 1.0 / static_cast<double>(images.size());
      opt.zero_grad();

      model::BackboneTape tape;
      const Matrix feats = bundle.backbone.forward(ptrs, tape);
      const Matrix logits = bundle.hard_head.forward(feats);
      std::vector<double> sup_losses;
      const Matrix g_logits = per_row_ce(logits, labels, c.alpha1 * inv_b, sup_losses);
      Matrix g_feats = bundle.hard_head.backward(feats, g_logits, true);
      double sup_loss = 0.0;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        sup_loss += sup_losses[i] * inv_b;
        sup.add(train.split_tags()[labels[i]], model::argmax(logits.row(i)) == labels[i],
                sup_losses[i]);
      }

      double self_loss = 0.0;
      if (rotation) {
        const auto rb = selfsup::make_rotation_batch(ptrs, rot_rng);
        const auto rptrs = pointers(rb.rotated_images);
        model::BackboneTape rtape;
        const Matrix rfeats = bundle.backbone.forward(rptrs, rtape);
        const Matrix rlogits = bundle.rotation_head.forward(rfeats);
        std::vector<double> rot_losses;
        const Matrix g_r = per_row_ce(rlogits, rb.rotation_labels, c.alpha2 * inv_b, rot_losses);
        for (std::size_t i = 0; i < labels.size(); ++i) {
          self_loss += rot_losses[i] * inv_b;
          self.add(train.split_tags()[labels[i]],
                   model::argmax(rlogits.row(i)) == rb.rotation_labels[i], rot_losses[i]);
        }
        const Matrix g_rfeats = bundle.rotation_head.backward(rfeats, g_r, true);
        bundle.backbone.backward(rtape, g_rfeats);
      } else if (instdisc) {
        std::vector<int> unused;
        const auto key_images = batch_images(train, batch_ids, true, aug, rng, unused);
        const Matrix keys =
            bundle.key_projection.forward(bundle.key_backbone.forward(pointers(key_images)));
        model::ProjectionHead::Tape ptape;
        const Matrix q = bundle.projection.forward(feats, ptape);
        Matrix g_q;
        self_loss = selfsup::info_nce_batch(q, keys, queue->queue, queue->tau, &g_q);
        for (float& v : g_q.data) v = static_cast<float>(v * c.alpha2);
        add_into(g_feats, bundle.projection.backward(ptape, g_q));
        for (std::size_t i = 0; i < labels.size(); ++i) {
          // Instance-level accuracy: the positive key outscores every queue entry.
          const auto qi = q.row(i);
          double pos = 0.0;
          for (std::size_t d = 0; d < qi.size(); ++d) pos += qi[d] * keys(i, d);
          bool ok = true;
          for (std::size_t k = 0; k < queue->size() && ok; ++k) {
            double s = 0.0;
            const auto row = queue->queue.row(k);
            for (std::size_t d = 0; d < qi.size(); ++d) s += qi[d] * row[d];
            ok = s < pos;
          }
          self.add(train.split_tags()[labels[i]], ok, self_loss);
        }
        selfsup::queue_push(*queue, keys);
      }
      bundle.backbone.backward(tape, g_feats);
      check_finite(selfsup::stage1_joint_loss(sup_loss, self_loss, c.alpha1, c.alpha2), c.stage,
                   epoch, step);
      opt.step(model::scheduled_lr(c.optimizer, step, total_steps, spe));
      if (instdisc) {
        const auto key = bundle.key_encoder_parameters();
        const auto query = bundle.query_encoder_parameters();
        selfsup::momentum_update(key, query, c.key_momentum);
      }
    }
    emit(log, c.stage, epoch, "sup", sup);
    if (rotation || instdisc) emit(log, c.stage, epoch, "self", self);
  }

  Checkpoint ckpt = finish(bundle, c, "");
  ckpt.metadata["selfsup_task"] = std::string(task_name(c.selfsup_task));
  if (queue) {
    ckpt.arrays.push_back({"selfsup.queue", {queue->size(), queue->embed_dim()}, queue->queue.data});
    ckpt.metadata["selfsup.queue_head"] = std::to_string(queue->head);
  }
  return ckpt;
}

Stage2Result run_stage2(const LongTailedDataset& train, const Checkpoint& stage1,
                        const StageConfig& c, MetricsLog* log) {
  validate(c);
  require(c.stage == Stage::II, "run_stage2: config is for stage " + std::string(stage_name(c.stage)));
  require_stage(stage1, Stage::I, "run_stage2");
  ModelBundle bundle = model::restore_bundle(stage1);
  train_lws(bundle, train, c, log);
  Stage2Result out;
  out.checkpoint = finish(bundle, c, model::checkpoint_hash(stage1));
  out.checkpoint.metadata["temperature"] = std::to_string(c.temperature);
  out.soft_labels =
      distill::generate_soft_labels(train, bundle.backbone, bundle.hard_head, &bundle.scales,
                                    c.temperature, model::checkpoint_hash(out.checkpoint));
  return out;
}

Checkpoint run_stage3(const LongTailedDataset& train, const distill::SoftLabelSet& soft,
                      const Checkpoint& teacher, const StageConfig& c, MetricsLog* log) {
  validate(c);
  require(c.stage == Stage::III, "run_stage3: config is for stage " + std::string(stage_name(c.stage)));
  require_stage(teacher, Stage::II, "run_stage3");
  const std::string teacher_hash = model::checkpoint_hash(teacher);
  require(soft.teacher_hash == teacher_hash,
          "run_stage3: soft labels come from teacher " + soft.teacher_hash.substr(0, 12) +
              ", not from the given stage II checkpoint " + teacher_hash.substr(0, 12));
  require(soft.num_classes == train.num_classes(), "run_stage3: soft-label class count mismatch");
  for (const auto& inst : train.instances())
    require(soft.contains(inst.id),
            "run_stage3: instance " + std::to_string(inst.id) + " has no soft label");

  const ModelBundle teacher_bundle = model::restore_bundle(teacher);
  ModelBundle bundle = model::reinitialize(teacher_bundle, derive_seed(c.seed, kInitTag));
  const auto wiring = distill::apply_distill_mode(c.distill_mode);

  model::ParameterRefs params = bundle.backbone.parameters();
  for (auto* p : bundle.hard_head.parameters()) params.push_back(p);
  for (auto* p : bundle.soft_head.parameters()) params.push_back(p);
  model::Sgd opt(params, c.optimizer.momentum, c.optimizer.weight_decay);
  const auto aug = selfsup::weak_augment();

  const std::size_t spe = steps_per_epoch(train, c);
  const std::size_t total_steps = spe * static_cast<std::size_t>(c.epochs);
  std::size_t step = 0;
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    const auto ids = epoch_ids(train, c, epoch);
    std::mt19937_64 rng(derive_seed(derive_seed(c.seed, kAugmentTag), epoch));
    Tally hard_t, soft_t;
    for (std::size_t start = 0; start < ids.size(); start += c.batch_size, ++step) {
      const std::size_t end = std::min(ids.size(), start + c.batch_size);
      const std::span<const std::int64_t> batch_ids(ids.data() + start, end - start);
      std::vector<int> labels;
      const auto images = batch_images(train, batch_ids, c.augment, aug, rng, labels);
      Matrix targets(batch_ids.size(), static_cast<std::size_t>(soft.num_classes));
      for (std::size_t i = 0; i < batch_ids.size(); ++i) {
        const auto row = soft.row(batch_ids[i]);
        std::copy(row.begin(), row.end(), targets.row(i).begin());
      }
      opt.zero_grad();
      model::BackboneTape tape;
      const Matrix feats = bundle.backbone.forward(pointers(images), tape);
      const Matrix hard_logits = bundle.hard_head.forward(feats);
      const Matrix soft_logits = bundle.soft_head.forward(feats);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        const Split s = train.split_tags()[labels[i]];
        hard_t.add(s, model::argmax(hard_logits.row(i)) == labels[i],
                   model::cross_entropy(hard_logits.row(i), labels[i]));
        soft_t.add(s, model::argmax(soft_logits.row(i)) == labels[i],
                   distill::kd_loss(targets.row(i), soft_logits.row(i), c.temperature));
      }
      const auto out = distill::hybrid_backward(bundle, wiring, feats, labels, targets,
                                                c.temperature, c.lambda1, c.lambda2);
      bundle.backbone.backward(tape, out.grad_features);
      check_finite(out.total, c.stage, epoch, step);
      opt.step(model::scheduled_lr(c.optimizer, step, total_steps, spe));

    }
    emit(log, c.stage, epoch, "hard", hard_t);
    emit(log, c.stage, epoch, "soft", soft_t);
  }
  Checkpoint ckpt = finish(bundle, c, teacher_hash);
  ckpt.metadata["distill_mode"] = std::string(distill::mode_name(c.distill_mode));
  ckpt.metadata["temperature"] = std::to_string(c.temperature);
  return ckpt;
}

Checkpoint run_stage4(const LongTailedDataset& train, const Checkpoint& stage3,
                      const StageConfig& c, MetricsLog* log) {
  validate(c);
  require(c.stage == Stage::IV, "run_stage4: config is for stage " + std::string(stage_name(c.stage)));
  require_stage(stage3, Stage::III, "run_stage4");
  require(stage3.meta("distill_mode") == "dual",
          "run_stage4: needs a dual-mode stage III checkpoint (G_hard is not trained in " +
              stage3.meta("distill_mode") + " mode)");
  ModelBundle bundle = model::restore_bundle(stage3);
  train_lws(bundle, train, c, log);
  Checkpoint ckpt = finish(bundle, c, model::checkpoint_hash(stage3));
  ckpt.metadata["distill_mode"] = stage3.meta("distill_mode");
  return ckpt;
}

model::HeadSelector default_head(const Checkpoint& ckpt) {
  const Stage s = parse_stage(ckpt.meta("stage"));
  switch (s) {
    case Stage::I:
      return model::HeadSelector::hard;
    case Stage::II:
    case Stage::IV:
      return model::HeadSelector::lws;
    case Stage::III:
      return distill::apply_distill_mode(distill::parse_mode(ckpt.meta("distill_mode"))).eval_head;
  }
  return model::HeadSelector::hard;
}

}  // namespace ssd::pipeline
