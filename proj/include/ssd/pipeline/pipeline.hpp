#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssd/datasets/dataset.hpp"
#include "ssd/datasets/manifest.hpp"
#include "ssd/distill/distill.hpp"
#include "ssd/eval/eval.hpp"
#include "ssd/model/checkpoint.hpp"
#include "ssd/pipeline/config.hpp"

namespace ssd::pipeline {

struct MetricRecord {
  std::string stage;
  int epoch = 0;
  std::string split;  // many, medium, few or all
  std::string metric;
  double value = 0.0;

  bool operator==(const MetricRecord&) const = default;
};

nlohmann::json to_json(const MetricRecord& r);

// Append-only metric sink; records are kept in memory and, when a path is
// given, written as one JSON object per line.
class MetricsLog {
 public:
  MetricsLog() = default;
  explicit MetricsLog(const std::filesystem::path& path, bool truncate = true);

  void record(MetricRecord r);
  const std::vector<MetricRecord>& records() const { return records_; }

 private:
  std::vector<MetricRecord> records_;
  std::optional<std::ofstream> out_;
};

// Stage I: CE on hard_head jointly with the configured self-supervised task.
model::Checkpoint run_stage1(const datasets::LongTailedDataset& train,
                             const model::ModelConfig& model_config,
                             const StageConfig& config, MetricsLog* log = nullptr);

struct Stage2Result {
  model::Checkpoint checkpoint;
  distill::SoftLabelSet soft_labels;
};

// Stage II: LWS on top of frozen stage-I features, class-balanced; then soft
// labels at config.temperature from the rescaled head.
Stage2Result run_stage2(const datasets::LongTailedDataset& train,
                        const model::Checkpoint& stage1, const StageConfig& config,
                        MetricsLog* log = nullptr);

// Stage III: re-initialised network trained on hard labels and soft labels
// according to config.distill_mode. The soft labels must name `teacher`
// (the stage-II checkpoint) and cover every training instance.
model::Checkpoint run_stage3(const datasets::LongTailedDataset& train,
                             const distill::SoftLabelSet& soft_labels,
                             const model::Checkpoint& teacher, const StageConfig& config,
                             MetricsLog* log = nullptr);

// Stage IV: LWS on G_hard of a dual-mode stage-III checkpoint.
model::Checkpoint run_stage4(const datasets::LongTailedDataset& train,
                             const model::Checkpoint& stage3, const StageConfig& config,
                             MetricsLog* log = nullptr);

// Head that a checkpoint of the given stage is evaluated with.
model::HeadSelector default_head(const model::Checkpoint& ckpt);

struct StageRecord {
  Stage stage = Stage::I;
  std::string config_hash;
  std::string input_hash;  // config + upstream artifacts
  std::string checkpoint;  // paths relative to the run directory
  std::string checkpoint_hash;
  std::string metrics;
  std::string soft_labels;
  std::string soft_labels_hash;
  std::vector<std::string> reports;
};

struct RunManifest {
  std::string dataset_manifest;
  std::string dataset_hash;
  std::vector<StageRecord> stages;
  std::string final_report;  // path of the final EvalReport
  nlohmann::json evaluations = nlohmann::json::object();  // name -> EvalReport

  const StageRecord* find(Stage s) const;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

// Content hash of a dataset description (ids, labels and counts).
std::string dataset_hash(const datasets::LongTailedDataset& dataset);

// I -> II -> III -> (IV) in `dir`. A stage whose input hash and checkpoint
// match the manifest already in `dir` is loaded instead of retrained.
// Evaluations: stage1 (hard), stage2 (lws), stage3_hard, stage3_soft and
// stage4 (lws). Failures are rethrown with the stage id prefixed.
RunManifest run_full(const datasets::DatasetPair& data, const MasterConfig& config,
                     const std::filesystem::path& dir, std::ostream* progress = nullptr);

// Builds the synthetic dataset described by config.dataset into dir/dataset.
RunManifest run_full(const MasterConfig& config, const std::filesystem::path& dir,
                     std::ostream* progress = nullptr);

}  // namespace ssd::pipeline
