// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Desk-scale experiments use configs/desk.json.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "fd.hpp"
#include "ssd/common/seed.hpp"
#include "ssd/datasets/synthetic.hpp"
#include "ssd/distill/distill.hpp"
#include "ssd/eval/eval.hpp"
#include "ssd/datasets/manifest.hpp"
#include "ssd/model/bundle.hpp"
#include "ssd/model/checkpoint.hpp"
#include "ssd/model/losses.hpp"
#include "ssd/model/optimizer.hpp"
#include "ssd/pipeline/pipeline.hpp"
#include "ssd/sampling/sampler.hpp"
#include "ssd/selfsup/selfsup.hpp"
#include "stats.hpp"

#ifndef SSD_DESK_CONFIG
#error "SSD_DESK_CONFIG must point at the desk-scale configuration"
#endif

namespace fs = std::filesystem;
using namespace ssd;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("criterion %d %s: %s (%s)\n", id, name, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<float> random_unit(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(d);
  double s = 0.0;
  for (double& x : v) {
    x = n(rng);
    s += x * x;
  }
  std::vector<float> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = static_cast<float>(v[i] / std::sqrt(s));
  return out;
}

// ---- 1 ----------------------------------------------------------------------

void sampler_laws() {
  const auto t0 = Clock::now();
  const auto syn = datasets::make_synthetic_longtail(20, 100, 100.0, 4, 0);
  const auto& d = syn.train;
  auto histogram = [&](sampling::Strategy s) {
    sampling::SamplerSpec spec;
    spec.strategy = s;
    spec.epoch_length = 100000;
    spec.seed = 2024;
    std::vector<std::size_t> h(d.num_classes(), 0);
    for (auto id : sampling::draw(d, spec)) ++h[d.by_id(id).label];
    return h;
  };
  const std::vector<double> uniform(d.num_classes(), 1.0 / d.num_classes());
  std::vector<double> proportional;
  for (int c : d.class_counts()) proportional.push_back(static_cast<double>(c) / d.size());
  const double p_cb = testing::chi_square_p_value(histogram(sampling::Strategy::class_balanced), uniform);
  const double p_ib =
      testing::chi_square_p_value(histogram(sampling::Strategy::instance_balanced), proportional);
  const double t = seconds_since(t0);
  report(1, "sampler laws", p_cb > 0.01 && p_ib > 0.01 && t < 10.0,
         fmt("class-balanced p=%.4f, instance-balanced p=%.4f, 1e5 draws each, %.2fs", p_cb, p_ib, t));
}

// ---- 2 ----------------------------------------------------------------------

void loss_correctness() {
  // Oracle values evaluated with 30-digit arithmetic.
  constexpr double kKdGolden = 3.72107868256693830;
  constexpr double kInfoNceGolden = 0.006715348489118069;
  bool ok = true;
  std::string detail;

  const std::vector<float> y{0.6f, 0.3f, 0.1f}, z{1.0f, 0.0f, -1.0f};
  const double kd = distill::kd_loss(y, z, 2.0);
  const double kd_err = testing::relative_diff(kd, kKdGolden);
  ok &= kd_err < 1e-6;

  std::vector<float> e0(4, 0.0f), e1(4, 0.0f);
  e0[0] = 1.0f;
  e1[1] = 1.0f;
  Matrix neg(1, 4);
  std::copy(e1.begin(), e1.end(), neg.row(0).begin());
  const double nce = selfsup::info_nce_loss(e0, e0, neg, 0.2);
  const double nce_err = testing::relative_diff(nce, kInfoNceGolden);
  ok &= nce_err < 1e-6;
  ok &= selfsup::info_nce_loss(e0, e0, Matrix(0, 4), 0.2) == 0.0;

  double uniform_err = 0.0;
  for (int c : {2, 4, 10, 100})
    for (double t : {1.0, 2.0, 4.0}) {
      const std::vector<float> yu(c, 1.0f / c), zu(c, 0.25f);
      uniform_err = std::max(uniform_err, testing::relative_diff(distill::kd_loss(yu, zu, t),
                                                                 t * t * std::log(double(c))));
    }
  ok &= uniform_err < 1e-6;

  std::mt19937_64 rng(99);
  std::normal_distribution<float> n(0.0f, 2.0f);
  double kd_fd = 0.0, nce_fd = 0.0;
  for (int point = 0; point < 10; ++point) {
    std::vector<float> zs(8), ys(8);
    for (float& v : zs) v = n(rng);
    const auto teacher = distill::softmax_with_temperature(std::vector<float>{n(rng), n(rng), n(rng), n(rng),
                                                                              n(rng), n(rng), n(rng), n(rng)},
                                                           2.0);
    for (int i = 0; i < 8; ++i) ys[i] = static_cast<float>(teacher[i]);
    std::vector<float> g(8);
    distill::kd_loss(ys, zs, 2.0, g);
    const auto num = testing::numeric_gradient(zs, [&] { return distill::kd_loss(ys, zs, 2.0); });
    kd_fd = std::max(kd_fd, testing::relative_error(g, num));

    auto v = random_unit(16, rng);
    const auto p = random_unit(16, rng);
    Matrix negs(32, 16);
    for (std::size_t k = 0; k < 32; ++k) {
      const auto u = random_unit(16, rng);
      std::copy(u.begin(), u.end(), negs.row(k).begin());
    }
    selfsup::InfoNceGrad ng;
    selfsup::info_nce_loss(v, p, negs, 0.2, &ng);
    const auto nv =
        testing::numeric_gradient(v, [&] { return selfsup::info_nce_loss(v, p, negs, 0.2); }, 2e-4f);
    nce_fd = std::max(nce_fd, testing::relative_error(ng.v, nv));
  }
  ok &= kd_fd < 1e-4 && nce_fd < 1e-4;
  detail = fmt("kd=%.12f rel.err %.1e, info_nce=%.12f rel.err %.1e, uniform T^2 lnC rel.err %.1e, "
               "max FD rel.err kd %.1e / info_nce %.1e",
               kd, kd_err, nce, nce_err, uniform_err, kd_fd, nce_fd);
  report(2, "loss correctness", ok, detail);
}

// ---- 3 ----------------------------------------------------------------------

void temperature_flattening() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> len(2, 50);
  std::normal_distribution<float> n(0.0f, 3.0f);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<float> z(len(rng));
    for (float& v : z) v = n(rng);
    double prev = -1.0;
    for (double t : {0.5, 1.0, 2.0, 4.0}) {
      double h = 0.0;
      for (double p : distill::softmax_with_temperature(z, t))
        if (p > 0.0) h -= p * std::log(p);
      if (h < prev) ++violations;
      prev = h;
    }
  }
  report(3, "temperature flattening", violations == 0,
         fmt("%d violations over 1000 vectors, T in {0.5,1,2,4}", violations));
}

// ---- 4 ----------------------------------------------------------------------

bool arrays_equal(const model::Checkpoint& a, const model::Checkpoint& b, const std::string& prefix) {
  for (const auto& arr : a.arrays) {
    if (arr.name.rfind(prefix, 0) != 0) continue;
    const auto* other = b.find(arr.name);
    if (!other || !(*other == arr)) return false;
  }
  return true;
}

void stage_contracts() {
  auto cfg = pipeline::master_config_from_json(
      {{"seed", 4},
       {"dataset", {{"num_classes", 6}, {"n_max", 30}, {"imbalance_factor", 10.0}, {"image_size", 8}}},
       {"model", {{"backbone", {{"channels", {4, 8}}}}, {"embed_dim", 8}}},
       {"stage1", {{"epochs", 2}}},
       {"stage2", {{"epochs", 2}}},
       {"stage3", {{"epochs", 2}}},
       {"stage4", {{"epochs", 2}}}});
  const auto data = datasets::make_synthetic_longtail(cfg.dataset);
  const auto s1 = pipeline::run_stage1(data.train, cfg.model, cfg.stage1);
  const auto s2 = pipeline::run_stage2(data.train, s1, cfg.stage2);
  const auto s3 = pipeline::run_stage3(data.train, s2.soft_labels, s2.checkpoint, cfg.stage3);
  const auto s4 = pipeline::run_stage4(data.train, s3, cfg.stage4);

  const bool ii_frozen = arrays_equal(s1, s2.checkpoint, "backbone.");
  const bool iv_frozen = arrays_equal(s3, s4, "backbone.");

  std::size_t shared = 0, compared = 0;
  for (const auto& arr : s3.arrays) {
    if (arr.name.rfind("backbone.", 0) != 0 && arr.name.rfind("head.hard", 0) != 0 &&
        arr.name.rfind("head.soft", 0) != 0)
      continue;
    const auto& old = *s1.find(arr.name);
    for (std::size_t i = 0; i < arr.data.size(); ++i, ++compared) shared += arr.data[i] == old.data[i];
  }

  // Single optimizer steps on a dual-mode bundle with the loss terms switched
  // on and off; each head must see exactly its own term.
  auto bundle = model::restore_bundle(s3);
  std::mt19937_64 rng(5);
  std::vector<const Image*> images;
  std::vector<int> labels;
  Matrix targets(8, cfg.model.num_classes);
  for (std::size_t i = 0; i < 8; ++i) {
    const auto& inst = data.train.instances()[i * 7 % data.train.size()];
    images.push_back(&inst.payload);
    labels.push_back(inst.label);
    const auto row = s2.soft_labels.row(inst.id);
    std::copy(row.begin(), row.end(), targets.row(i).begin());
  }
  const auto wiring = distill::apply_distill_mode(distill::DistillMode::dual);
  auto step = [&](double l1, double l2) {
    auto b = bundle;
    model::Sgd opt(b.parameters(), 0.9, 5e-4);
    opt.zero_grad();
    model::BackboneTape tape;
    const Matrix f = b.backbone.forward(images, tape);
    const auto out = distill::hybrid_backward(b, wiring, f, labels, targets, 2.0, l1, l2);
    b.backbone.backward(tape, out.grad_features);
    opt.step(0.05);
    return model::capture(b);
  };
  const auto before = model::capture(bundle);
  const auto both = step(1.0, 1.0), ce_only = step(1.0, 0.0), kd_only = step(0.0, 1.0);
  const bool kd_skips_hard = arrays_equal(before, kd_only, "head.hard.");
  const bool ce_skips_soft = arrays_equal(before, ce_only, "head.soft.");
  const bool hard_is_ce = arrays_equal(ce_only, both, "head.hard.");
  const bool soft_is_kd = arrays_equal(kd_only, both, "head.soft.");
  const bool moved = !arrays_equal(before, both, "head.hard.") && !arrays_equal(before, both, "head.soft.");

  report(4, "stage contracts",
         ii_frozen && iv_frozen && shared == 0 && kd_skips_hard && ce_skips_soft && hard_is_ce &&
             soft_is_kd && moved,
         fmt("II backbone identical=%d, IV backbone identical=%d, III values shared with I: %zu/%zu, "
             "KD step leaves G_hard=%d, CE step leaves G_soft=%d, G_hard update CE-only=%d, "
             "G_soft update KD-only=%d",
             ii_frozen, iv_frozen, shared, compared, kd_skips_hard, ce_skips_soft, hard_is_ce,
             soft_is_kd));
}

// ---- 5-8 --------------------------------------------------------------------

struct SeedResult {
  double stage1 = 0, stage2 = 0, iii_soft = 0, iii_hard = 0, iv = 0, ce = 0, single = 0, coupled = 0;
  double iii_soft_few = 0, iv_few = 0, ce_few = 0;
  double ratio_t1 = 0, ratio_t2 = 0, original_ratio = 0;
  nlohmann::json evaluations;
};

double overall(const nlohmann::json& r) { return r.at("overall_top1").get<double>(); }
double few(const nlohmann::json& r) {
  const auto& v = r.at("split_top1").at("few");
  return v.is_null() ? 0.0 : v.get<double>();
}

SeedResult run_seed(const pipeline::MasterConfig& base, std::uint64_t seed, const fs::path& dir) {
  const auto cfg = pipeline::with_seed(base, seed);
  SeedResult r;
  const auto m = pipeline::run_full(cfg, dir);
  r.evaluations = m.evaluations;
  r.stage1 = overall(m.evaluations.at("stage1"));
  r.stage2 = overall(m.evaluations.at("stage2"));
  r.iii_soft = overall(m.evaluations.at("stage3_soft"));
  r.iii_hard = overall(m.evaluations.at("stage3_hard"));
  r.iv = overall(m.evaluations.at("stage4"));
  r.iii_soft_few = few(m.evaluations.at("stage3_soft"));
  r.iv_few = few(m.evaluations.at("stage4"));

  const auto data = datasets::read_dataset(dir / m.dataset_manifest);  // train/test pair
  const auto teacher = model::read_checkpoint(dir / m.find(pipeline::Stage::II)->checkpoint);
  const auto soft = distill::read_soft_labels(dir / m.find(pipeline::Stage::II)->soft_labels);

  // Teacher soft mass at T=2 (the stored labels) and T=1.
  const auto tb = model::restore_bundle(teacher);
  const auto t1 = distill::generate_soft_labels(data.train, tb.backbone, tb.hard_head, &tb.scales, 1.0,
                                                soft.teacher_hash);
  r.ratio_t2 = distill::max_min_ratio(distill::aggregate_distilled_distribution(soft));
  r.ratio_t1 = distill::max_min_ratio(distill::aggregate_distilled_distribution(t1));
  r.original_ratio = data.train.imbalance_factor();

  // CE baseline: stage I without self-supervision.
  auto ce_cfg = cfg.stage1;
  ce_cfg.selfsup_task = pipeline::SelfSupTask::none;
  const auto ce = model::restore_bundle(pipeline::run_stage1(data.train, cfg.model, ce_cfg));
  const auto ce_report = eval::evaluate(ce, model::HeadSelector::hard, data.test, data.train.split_tags());
  r.ce = ce_report.overall_top1;
  r.ce_few = ce_report.split(datasets::Split::few).value_or(0.0);

  // Ablation modes against the same teacher.
  for (auto mode : {distill::DistillMode::single, distill::DistillMode::coupled}) {
    auto c3 = cfg.stage3;
    c3.distill_mode = mode;
    const auto ck = model::restore_bundle(pipeline::run_stage3(data.train, soft, teacher, c3));
    const double acc =
        eval::evaluate(ck, model::HeadSelector::soft, data.test, data.train.split_tags()).overall_top1;
    (mode == distill::DistillMode::single ? r.single : r.coupled) = acc;
  }
  return r;
}

void desk_experiments() {
  const auto base = pipeline::load_master_config(SSD_DESK_CONFIG);
  const fs::path root = fs::temp_directory_path() / "ssd_acceptance";
  fs::remove_all(root);

  const auto t0 = Clock::now();
  std::vector<SeedResult> results;
  double teacher_time = 0.0;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const auto ts = Clock::now();
    results.push_back(run_seed(base, seed, root / ("seed" + std::to_string(seed))));
    if (seed == 0) teacher_time = seconds_since(ts);
    const auto& r = results.back();
    std::printf("  seed %llu: CE %.1f | I %.1f | II %.1f | III-hard %.1f | III-soft %.1f | IV %.1f | "
                "single %.1f | coupled %.1f | few CE %.1f III-soft %.1f IV %.1f\n",
                static_cast<unsigned long long>(seed), 100 * r.ce, 100 * r.stage1, 100 * r.stage2,
                100 * r.iii_hard, 100 * r.iii_soft, 100 * r.iv, 100 * r.single, 100 * r.coupled,
                100 * r.ce_few, 100 * r.iii_soft_few, 100 * r.iv_few);
    std::fflush(stdout);
  }
  const double total_time = seconds_since(t0);
  auto mean = [&](double SeedResult::*f) {
    double s = 0.0;
    for (const auto& r : results) s += r.*f;
    return 100.0 * s / results.size();
  };

  // 5: directionality on the seed-0 teacher.
  const auto& r0 = results[0];
  report(5, "distilled distribution directionality",
         r0.ratio_t2 < r0.original_ratio && r0.ratio_t2 < r0.ratio_t1 && teacher_time < 600.0,
         fmt("max/min soft mass T=2 %.2f, T=1 %.2f, original IF %.0f, teacher pipeline %.0fs", r0.ratio_t2,
             r0.ratio_t1, r0.original_ratio, teacher_time));

  // 6: end-to-end gain.
  const double ce = mean(&SeedResult::ce), soft = mean(&SeedResult::iii_soft), iv = mean(&SeedResult::iv);
  const double ce_few = mean(&SeedResult::ce_few), iv_few = mean(&SeedResult::iv_few),
               soft_few = mean(&SeedResult::iii_soft_few);
  report(6, "end-to-end directional gain",
         iv >= soft - 0.5 && soft >= ce + 2.0 && iv_few > ce_few && soft_few > ce_few && total_time <= 1800.0,
         fmt("mean overall CE %.2f, stage-I %.2f, III-soft %.2f, IV %.2f; few-shot CE %.2f, III-soft %.2f, "
             "IV %.2f; %.0fs",
             ce, mean(&SeedResult::stage1), soft, iv, ce_few, soft_few, iv_few, total_time));

  // 7: ablation ordering.
  const double single = mean(&SeedResult::single), coupled = mean(&SeedResult::coupled);
  report(7, "ablation-mode ordering", soft >= single && single >= coupled,
         fmt("mean overall dual-soft %.2f, single %.2f, coupled %.2f", soft, single, coupled));

  // 8: determinism of run-all.
  const auto again = pipeline::run_full(pipeline::with_seed(base, 0), root / "seed0_again");
  const bool same = again.evaluations == r0.evaluations;
  report(8, "determinism", same,
         fmt("two run-all executions with seed 0: final reports %s", same ? "identical" : "differ"));
  fs::remove_all(root);
}

// ---- 9 ----------------------------------------------------------------------

void rotation_momentum_algebra() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> u(-4.0f, 4.0f);
  int rotation_failures = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 17, c = 1 + trial % 4;
    Image img(n, n, c);
    for (float& p : img.pixels) p = u(rng);
    Image x = img;
    for (int k = 0; k < 4; ++k) x = selfsup::rotate_image(x, 1);
    rotation_failures += !(x == img);
  }
  double worst = 0.0;
  bool endpoints = true;
  for (double m : {0.0, 0.999, 1.0}) {
    std::vector<float> key(1000), query(1000);
    for (auto& v : key) v = u(rng);
    for (auto& v : query) v = u(rng);
    const auto orig = key;
    selfsup::momentum_update(key, query, m);
    for (std::size_t i = 0; i < key.size(); ++i) {
      const double exact = m * orig[i] + (1.0 - m) * query[i];
      const double scale = std::max(std::abs(orig[i]), std::abs(query[i]));
      worst = std::max(worst, std::abs(key[i] - exact) / (scale * std::numeric_limits<float>::epsilon()));
    }
    if (m == 0.0) endpoints &= key == query;
    if (m == 1.0) endpoints &= key == orig;
  }
  report(9, "rotation/momentum algebra", rotation_failures == 0 && endpoints && worst <= 2.0,
         fmt("%d of 200 images changed by four 90-degree turns; momentum worst error %.2f float ulps, "
             "m=0/m=1 exact=%d",
             rotation_failures, worst, endpoints));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  sampler_laws();
  loss_correctness();
  temperature_flattening();
  stage_contracts();
  desk_experiments();
  rotation_momentum_algebra();
  std::printf("%d of 9 criteria failed, %.0fs total\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
