#include <fstream>

#include "ssd/common/error.hpp"
#include "ssd/common/hash.hpp"
#include "ssd/datasets/manifest.hpp"
#include "ssd/pipeline/pipeline.hpp"

namespace ssd::pipeline {
namespace fs = std::filesystem;

nlohmann::json to_json(const MetricRecord& r) {
  return {{"stage", r.stage}, {"epoch", r.epoch}, {"split", r.split},
          {"metric", r.metric}, {"value", r.value}};
}

MetricsLog::MetricsLog(const fs::path& path, bool truncate) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  out_.emplace(path, truncate ? std::ios::trunc : std::ios::app);
  if (!*out_) throw FormatError("cannot open metrics log '" + path.string() + "'");
}

void MetricsLog::record(MetricRecord r) {
  if (out_) *out_ << to_json(r).dump() << '\n' << std::flush;
  records_.push_back(std::move(r));
}

const StageRecord* RunManifest::find(Stage s) const {
  for (const auto& r : stages)
    if (r.stage == s) return &r;
  return nullptr;
}

nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& r : m.stages) {
    stages.push_back({{"stage", std::string(stage_name(r.stage))},
                      {"config_hash", r.config_hash},
                      {"input_hash", r.input_hash},
                      {"checkpoint", r.checkpoint},
                      {"checkpoint_hash", r.checkpoint_hash},
                      {"metrics", r.metrics},
                      {"soft_labels", r.soft_labels},
                      {"soft_labels_hash", r.soft_labels_hash},
                      {"reports", r.reports}});
  }
  return {{"format", "ssd-run"},
          {"version", 1},
          {"dataset_manifest", m.dataset_manifest},
          {"dataset_hash", m.dataset_hash},
          {"split_convention", std::string(datasets::kSplitConvention)},
          {"stages", stages},
          {"final_report", m.final_report},
          {"evaluations", m.evaluations}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  m.dataset_manifest = j.at("dataset_manifest").get<std::string>();
  m.dataset_hash = j.at("dataset_hash").get<std::string>();
  for (const auto& s : j.at("stages")) {
    StageRecord r;
    r.stage = parse_stage(s.at("stage").get<std::string>());
    r.config_hash = s.at("config_hash").get<std::string>();
    r.input_hash = s.at("input_hash").get<std::string>();
    r.checkpoint = s.at("checkpoint").get<std::string>();
    r.checkpoint_hash = s.at("checkpoint_hash").get<std::string>();
    r.metrics = s.value("metrics", "");
    r.soft_labels = s.value("soft_labels", "");
    r.soft_labels_hash = s.value("soft_labels_hash", "");
    r.reports = s.value("reports", std::vector<std::string>{});
    m.stages.push_back(std::move(r));
  }
  m.final_report = j.value("final_report", "");
  m.evaluations = j.value("evaluations", nlohmann::json::object());
  return m;
}

std::string dataset_hash(const datasets::LongTailedDataset& dataset) {
  return sha256_hex(std::string_view(datasets::describe(dataset).dump()));
}

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

std::optional<RunManifest> previous_manifest(const fs::path& dir) {
  const auto path = dir / "manifest.json";
  if (!fs::exists(path)) return std::nullopt;
  try {
    std::ifstream in(path);
    return manifest_from_json(nlohmann::json::parse(in));
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable manifest: retrain everything
  }
}

// A stored stage is reused only if its inputs match and its checkpoint
// still hashes to the recorded value.
std::optional<model::Checkpoint> reusable(const std::optional<RunManifest>& prev, Stage s,
                                          const std::string& input_hash, const fs::path& dir) {
  if (!prev) return std::nullopt;
  const StageRecord* r = prev->find(s);
  if (!r || r->input_hash != input_hash || !fs::exists(dir / r->checkpoint)) return std::nullopt;
  try {
    auto ckpt = model::read_checkpoint(dir / r->checkpoint);
    if (model::checkpoint_hash(ckpt) != r->checkpoint_hash) return std::nullopt;
    return ckpt;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

template <typename F>
auto with_stage(Stage s, F&& f) -> decltype(f()) {
  const std::string prefix = "stage " + std::string(stage_name(s)) + " failed: ";
  try {
    return f();
  } catch (const DivergenceError& e) {
    throw DivergenceError(prefix + e.what());
  } catch (const ContractError& e) {
    throw ContractError(prefix + e.what());
  } catch (const FormatError& e) {
    throw FormatError(prefix + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(prefix + e.what());
  }
}

std::string chain(std::initializer_list<std::string> parts) {
  std::string joined;
  for (const auto& p : parts) joined += p + "\n";
  return sha256_hex(std::string_view(joined));
}

}  // namespace

RunManifest run_full(const datasets::DatasetPair& data, const MasterConfig& config,
                     const fs::path& dir, std::ostream* progress) {
  validate(config.stage1);
  validate(config.stage2);
  validate(config.stage3);
  validate(config.stage4);
  require(config.stage1.stage == Stage::I && config.stage2.stage == Stage::II &&
              config.stage3.stage == Stage::III && config.stage4.stage == Stage::IV,
          "run_full: stage sections out of order");
  require(!config.run_stage4 || config.stage3.distill_mode == distill::DistillMode::dual,
          "run_full: stage IV needs stage III in dual mode");
  require(config.model.num_classes == data.train.num_classes(),
          "run_full: model and dataset disagree on the number of classes");

  fs::create_directories(dir);
  const auto prev = previous_manifest(dir);
  auto say = [&](const std::string& msg) {
    if (progress) *progress << msg << std::endl;
  };

  RunManifest m;
  m.dataset_hash = dataset_hash(data.train);
  const fs::path dataset_manifest = dir / "dataset" / "dataset.json";
  if (!prev || prev->dataset_hash != m.dataset_hash || !fs::exists(dataset_manifest))
    datasets::write_dataset(dir / "dataset", data.train, data.test, data.provenance);
  m.dataset_manifest = "dataset/dataset.json";

  auto stage_paths = [&](Stage s, StageRecord& r) {
    const std::string n = "stage" + std::to_string(static_cast<int>(s));
    r.stage = s;
    r.checkpoint = "checkpoints/" + n + ".ckpt";
    r.metrics = "metrics/" + n + ".jsonl";
  };
  auto run_or_reuse = [&](Stage s, StageRecord& r, const std::string& chash,
                          const std::string& input_hash,
                          auto&& train) -> model::Checkpoint {
    stage_paths(s, r);
    r.config_hash = chash;
    r.input_hash = input_hash;
    if (auto reused = reusable(prev, s, input_hash, dir)) {
      say("stage " + std::string(stage_name(s)) + ": inputs unchanged, reusing checkpoint");
      r.checkpoint_hash = model::checkpoint_hash(*reused);
      return *reused;
    }
    say("stage " + std::string(stage_name(s)) + ": training");
    MetricsLog log(dir / r.metrics);
    model::Checkpoint ckpt = with_stage(s, [&] { return train(log); });
    model::write_checkpoint(dir / r.checkpoint, ckpt);
    r.checkpoint_hash = model::checkpoint_hash(ckpt);
    return ckpt;
  };
  auto evaluate_into = [&](StageRecord& r, const std::string& name, const model::Checkpoint& ckpt,
                           model::HeadSelector head, const std::string& chash) {
    const auto bundle = model::restore_bundle(ckpt);
    auto report = eval::evaluate(bundle, head, data.test, data.train.split_tags());
    report.checkpoint_hash = model::checkpoint_hash(ckpt);
    report.config_hash = chash;
    const std::string path = "reports/" + name + ".json";
    write_json(dir / path, eval::to_json(report));
    r.reports.push_back(path);
    m.evaluations[name] = eval::to_json(report);
    say("  " + name + ": overall " + std::to_string(report.overall_top1));
    return path;
  };

  // I
  StageRecord r1;
  const std::string h1 = config_hash(config.stage1);
  const model::Checkpoint c1 = run_or_reuse(
      Stage::I, r1, h1, chain({h1, model::to_json(config.model).dump(), m.dataset_hash}),
      [&](MetricsLog& log) { return run_stage1(data.train, config.model, config.stage1, &log); });
  evaluate_into(r1, "stage1", c1, model::HeadSelector::hard, h1);
  m.stages.push_back(r1);

  // II
  StageRecord r2;
  const std::string h2 = config_hash(config.stage2);
  const std::string in2 = chain({h2, r1.checkpoint_hash, m.dataset_hash});
  std::optional<distill::SoftLabelSet> soft;
  const fs::path soft_path = dir / "soft_labels" / "stage2.soft";
  const model::Checkpoint c2 = run_or_reuse(Stage::II, r2, h2, in2, [&](MetricsLog& log) {
    auto res = run_stage2(data.train, c1, config.stage2, &log);
    soft = std::move(res.soft_labels);
    return res.checkpoint;
  });
  if (!soft) {
    // Reused checkpoint: the stored soft labels must still belong to it.
    const StageRecord* old = prev ? prev->find(Stage::II) : nullptr;
    if (old && fs::exists(soft_path)) {
      auto stored = distill::read_soft_labels(soft_path);
      if (distill::soft_labels_hash(stored) == old->soft_labels_hash &&
          stored.teacher_hash == r2.checkpoint_hash)
        soft = std::move(stored);
    }
    if (!soft) {
      const auto teacher = model::restore_bundle(c2);
      soft = distill::generate_soft_labels(data.train, teacher.backbone, teacher.hard_head,
                                           &teacher.scales, config.stage2.temperature,
                                           r2.checkpoint_hash);
    }
  }
  distill::write_soft_labels(soft_path, *soft);
  r2.soft_labels = "soft_labels/stage2.soft";
  r2.soft_labels_hash = distill::soft_labels_hash(*soft);
  evaluate_into(r2, "stage2", c2, model::HeadSelector::lws, h2);
  write_json(dir / "reports" / "distribution.json",
             eval::to_json(eval::distribution_report(data.train, &*soft)));
  r2.reports.push_back("reports/distribution.json");
  m.stages.push_back(r2);

  // III
  StageRecord r3;
  const std::string h3 = config_hash(config.stage3);
  const model::Checkpoint c3 = run_or_reuse(
      Stage::III, r3, h3, chain({h3, r2.checkpoint_hash, r2.soft_labels_hash, m.dataset_hash}),
      [&](MetricsLog& log) { return run_stage3(data.train, *soft, c2, config.stage3, &log); });
  const std::string soft_report =
      evaluate_into(r3, "stage3_soft", c3, model::HeadSelector::soft, h3);
  evaluate_into(r3, "stage3_hard", c3, model::HeadSelector::hard, h3);
  m.stages.push_back(r3);
  m.final_report = soft_report;

  // IV
  if (config.run_stage4) {
    StageRecord r4;
    const std::string h4 = config_hash(config.stage4);
    const model::Checkpoint c4 = run_or_reuse(
        Stage::IV, r4, h4, chain({h4, r3.checkpoint_hash, m.dataset_hash}),
        [&](MetricsLog& log) { return run_stage4(data.train, c3, config.stage4, &log); });
    m.final_report = evaluate_into(r4, "stage4", c4, model::HeadSelector::lws, h4);
    m.stages.push_back(r4);
  }

  write_json(dir / "config.json", to_json(config));
  write_json(dir / "manifest.json", to_json(m));
  return m;
}

RunManifest run_full(const MasterConfig& config, const fs::path& dir, std::ostream* progress) {
  auto data = datasets::make_synthetic_longtail(config.dataset);
  datasets::DatasetPair pair{std::move(data.train), std::move(data.test),
                             datasets::synthetic_provenance(config.dataset)};
  return run_full(pair, config, dir, progress);
}

}  // namespace ssd::pipeline
