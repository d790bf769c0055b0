// Command-line driver for the multi-stage long-tail training pipeline.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ssd/common/error.hpp"
#include "ssd/datasets/manifest.hpp"
#include "ssd/datasets/synthetic.hpp"
#include "ssd/distill/distill.hpp"
#include "ssd/eval/eval.hpp"
#include "ssd/model/checkpoint.hpp"
#include "ssd/pipeline/pipeline.hpp"

namespace fs = std::filesystem;
using namespace ssd;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string dataset;
  std::string checkpoint;
  std::string teacher;
  std::string soft_labels;
  std::string head;
  std::string out;
  std::string metrics;
};

pipeline::MasterConfig load_config(const Common& o) {
  pipeline::MasterConfig cfg;
  if (!o.config.empty()) cfg = pipeline::load_master_config(o.config);
  else cfg = pipeline::master_config_from_json(nlohmann::json::object());
  if (o.seed) cfg = pipeline::with_seed(cfg, *o.seed);
  return cfg;
}

datasets::DatasetPair load_data(const Common& o, const pipeline::MasterConfig& cfg) {
  if (!o.dataset.empty()) return datasets::read_dataset(o.dataset);
  auto data = datasets::make_synthetic_longtail(cfg.dataset);
  return {std::move(data.train), std::move(data.test), datasets::synthetic_provenance(cfg.dataset)};
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << text;
}

std::optional<pipeline::MetricsLog> open_log(const Common& o) {
  if (o.metrics.empty()) return std::nullopt;
  return std::optional<pipeline::MetricsLog>(std::in_place, o.metrics);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-stage long-tail training: self-supervision, re-balancing, distillation"};
  app.require_subcommand(1);
  Common o;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "master config (JSON)");
    cmd->add_option("--seed", o.seed, "override the master seed");
  };
  auto add_dataset = [&](CLI::App* cmd) {
    cmd->add_option("--dataset", o.dataset,
                    "dataset manifest (default: synthetic data from the config)");
  };

  auto* build = app.add_subcommand("build-dataset", "write the configured dataset to a directory");
  add_config(build);
  build->add_option("--out", o.out, "output directory")->required();

  auto* s1 = app.add_subcommand("stage1", "supervised + self-supervised representation learning");
  add_config(s1);
  add_dataset(s1);
  s1->add_option("--out", o.out, "checkpoint to write")->required();
  s1->add_option("--metrics", o.metrics, "metrics log (JSON lines)");

  auto* s2 = app.add_subcommand("stage2", "LWS on frozen features, then soft labels");
  add_config(s2);
  add_dataset(s2);
  s2->add_option("--checkpoint", o.checkpoint, "stage I checkpoint")->required();
  s2->add_option("--out", o.out, "checkpoint to write")->required();
  s2->add_option("--soft-labels", o.soft_labels, "soft-label file to write")->required();
  s2->add_option("--metrics", o.metrics, "metrics log (JSON lines)");

  auto* s3 = app.add_subcommand("stage3", "re-initialised training with hard and soft labels");
  add_config(s3);
  add_dataset(s3);
  s3->add_option("--teacher", o.teacher, "stage II checkpoint")->required();
  s3->add_option("--soft-labels", o.soft_labels, "soft labels from stage II")->required();
  s3->add_option("--out", o.out, "checkpoint to write")->required();
  s3->add_option("--metrics", o.metrics, "metrics log (JSON lines)");

  auto* s4 = app.add_subcommand("stage4", "LWS on G_hard of a stage III checkpoint");
  add_config(s4);
  add_dataset(s4);
  s4->add_option("--checkpoint", o.checkpoint, "stage III checkpoint")->required();
  s4->add_option("--out", o.out, "checkpoint to write")->required();
  s4->add_option("--metrics", o.metrics, "metrics log (JSON lines)");

  auto* all = app.add_subcommand("run-all", "stages I to IV with stage-level resume");
  add_config(all);
  add_dataset(all);
  all->add_option("--out", o.out, "run directory")->required();

  auto* ev = app.add_subcommand("evaluate", "balanced test-set accuracy, overall and per split");
  add_config(ev);
  add_dataset(ev);
  ev->add_option("--checkpoint", o.checkpoint, "checkpoint to evaluate")->required();
  ev->add_option("--head", o.head, "hard, soft or lws (default: the stage's own head)");
  ev->add_option("--out", o.out, "report path (JSON); '-' or empty prints the table");

  auto* dist = app.add_subcommand("report-distribution",
                                  "original, re-balanced and distilled class distributions");
  add_config(dist);
  add_dataset(dist);
  dist->add_option("--soft-labels", o.soft_labels, "soft labels to aggregate");
  dist->add_option("--out", o.out, "report path (JSON); '-' or empty prints the table");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = load_config(o);
    if (build->parsed()) {
      auto data = load_data(o, cfg);
      const auto path = datasets::write_dataset(o.out, data.train, data.test, data.provenance);
      std::cout << path.string() << "\n";
    } else if (s1->parsed()) {
      const auto data = load_data(o, cfg);
      auto log = open_log(o);
      const auto ckpt =
          pipeline::run_stage1(data.train, cfg.model, cfg.stage1, log ? &*log : nullptr);
      model::write_checkpoint(o.out, ckpt);
      std::cout << model::checkpoint_hash(ckpt) << "\n";
    } else if (s2->parsed()) {
      const auto data = load_data(o, cfg);
      auto log = open_log(o);
      const auto res = pipeline::run_stage2(data.train, model::read_checkpoint(o.checkpoint),
                                            cfg.stage2, log ? &*log : nullptr);
      model::write_checkpoint(o.out, res.checkpoint);
      distill::write_soft_labels(o.soft_labels, res.soft_labels);
      std::cout << model::checkpoint_hash(res.checkpoint) << "\n";
    } else if (s3->parsed()) {
      const auto data = load_data(o, cfg);
      auto log = open_log(o);
      const auto ckpt = pipeline::run_stage3(data.train, distill::read_soft_labels(o.soft_labels),
                                             model::read_checkpoint(o.teacher), cfg.stage3,
                                             log ? &*log : nullptr);
      model::write_checkpoint(o.out, ckpt);
      std::cout << model::checkpoint_hash(ckpt) << "\n";
    } else if (s4->parsed()) {
      const auto data = load_data(o, cfg);
      auto log = open_log(o);
      const auto ckpt = pipeline::run_stage4(data.train, model::read_checkpoint(o.checkpoint),
                                             cfg.stage4, log ? &*log : nullptr);
      model::write_checkpoint(o.out, ckpt);
      std::cout << model::checkpoint_hash(ckpt) << "\n";
    } else if (all->parsed()) {
      const auto m = o.dataset.empty() ? pipeline::run_full(cfg, o.out, &std::cerr)
                                       : pipeline::run_full(load_data(o, cfg), cfg, o.out, &std::cerr);
      std::cout << (fs::path(o.out) / m.final_report).string() << "\n";
    } else if (ev->parsed()) {
      const auto data = load_data(o, cfg);
      const auto ckpt = model::read_checkpoint(o.checkpoint);
      const auto head = o.head.empty() ? pipeline::default_head(ckpt) : model::parse_head(o.head);
      auto report = eval::evaluate(model::restore_bundle(ckpt), head, data.test,
                                   data.train.split_tags());
      report.checkpoint_hash = model::checkpoint_hash(ckpt);
      if (auto it = ckpt.metadata.find("config_hash"); it != ckpt.metadata.end())
        report.config_hash = it->second;
      if (o.out.empty() || o.out == "-") write_text("-", eval::to_table(report));
      else write_text(o.out, eval::to_json(report).dump(2) + "\n");
    } else if (dist->parsed()) {
      const auto data = load_data(o, cfg);
      std::optional<distill::SoftLabelSet> soft;
      if (!o.soft_labels.empty()) soft = distill::read_soft_labels(o.soft_labels);
      const auto report = eval::distribution_report(data.train, soft ? &*soft : nullptr);
      if (o.out.empty() || o.out == "-") write_text("-", eval::to_table(report));
      else write_text(o.out, eval::to_json(report).dump(2) + "\n");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
