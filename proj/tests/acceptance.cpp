// Acceptance checks, one result line per criterion. Pass criterion numbers
// as arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "test_helpers.hpp"
#include "yoeo/cli.hpp"
#include "yoeo/error.hpp"
#include "yoeo/metrics.hpp"
#include "yoeo/network.hpp"
#include "yoeo/pipeline.hpp"
#include "yoeo/scene_io.hpp"

using namespace yoeo;
using namespace yoeo::test;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::uint64_t kSuiteSeed = 20240601;
constexpr int kSuiteScenes = 200;

// Pinned after the first seeded baseline run (observed 100% on the suite).
constexpr double kNoisyA10Bound = 90.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const std::vector<Scene>& suite() {
  static const std::vector<Scene> scenes = [] {
    GenConfig cfg;
    cfg.rng_seed = kSuiteSeed;
    std::vector<Scene> out;
    for (int i = 0; i < kSuiteScenes; ++i) out.push_back(generate_scene(cfg, i));
    return out;
  }();
  return scenes;
}

// ------------------------------------------------------------------ 1

Outcome umeyama_exactness() {
  Rng rng(101);
  double worst = 0.0, slowest = 0.0, total = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Sim3Transform truth = random_sim3(rng);
    const PointCloud src = random_cloud(rng, 100);
    const PointCloud dst = yoeo::apply(truth, src);
    const auto t0 = Clock::now();
    const Sim3Transform est = umeyama_align(src, dst);
    const double ms = seconds_since(t0) * 1e3;
    slowest = std::max(slowest, ms);
    total += ms;
    worst = std::max(worst, max_component_error(est, truth));
  }
  const double mean = total / 1000;
  return {worst < 1e-9 && mean < 1.0,
          fmt("1000 trials, max component error %.2e (< 1e-9), mean %.4f ms/trial (< 1 ms), slowest %.4f ms", worst,
              mean, slowest)};
}

// ------------------------------------------------------------------ 2

Outcome ransac_robustness() {
  Rng rng(202);
  int ok = 0;
  double worst_re = 0.0, worst_te = 0.0;
  RansacParams params;
  params.inlier_threshold = 0.01;
  for (int trial = 0; trial < 500; ++trial) {
    const Sim3Transform truth(rng.uniform(0.2, 0.8), random_rotation(rng),
                              Vec3(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(0.8, 1.6)));
    const PointCloud src = random_cloud(rng, 100, 0.5);
    PointCloud dst = yoeo::apply(truth, src);
    Vec3 center = Vec3::Zero();
    for (const auto& p : dst) center += p / 100.0;
    for (int i = 0; i < 30; ++i) {
      const int k = (i * 37 + trial) % 100;  // scattered positions
      dst[k] = center + Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    }
    params.rng_seed = derive_seed(202, trial);
    try {
      const RansacResult r = ransac_align(src, dst, params);
      const double re = rotation_geodesic_deg(r.transform.rotation, truth.rotation);
      const double te = (r.transform.translation - truth.translation).norm();
      worst_re = std::max(worst_re, re);
      worst_te = std::max(worst_te, te);
      ok += re < 1.0 && te < 0.005;
    } catch (const Error&) {
    }
  }
  return {ok >= 495, fmt("%d/500 trials with Re < 1 deg and Te < 5 mm (need >= 495); worst Re %.2e deg, Te %.2e m",
                         ok, worst_re, worst_te)};
}

// ------------------------------------------------------------------ 3

Outcome npcs_quantization() {
  double worst_axis = 0.0;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < kNumBins; ++b) {
      for (int k = 0; k <= 100; ++k) {
        Vec3 c = Vec3::Constant(0.5);
        c[a] = std::min(1.0, (b + k / 100.0) / kNumBins);
        worst_axis = std::max(worst_axis, std::abs(decode_bins(encode_bins(c))[a] - c[a]));
      }
    }
  }

  RansacParams params;
  params.inlier_threshold = 0.01;
  int fixtures = 0, ok = 0;
  double worst_ratio = 0.0;
  for (const Scene& scene : suite()) {
    std::map<int, std::pair<std::vector<NpcsCoord>, PointCloud>> per_instance;
    for (std::size_t i = 0; i < scene.size(); ++i) {
      const int id = scene.gt_instance[i];
      if (id < 0) continue;
      per_instance[id].first.push_back(decode_bins(encode_bins(*scene.gt_npcs[i])));
      per_instance[id].second.push_back(scene.points[i]);
    }
    for (const auto& [id, data] : per_instance) {
      ++fixtures;
      params.rng_seed = derive_seed(303, fixtures);
      try {
        const PoseResult r = recover_pose(data.first, data.second, std::nullopt, params);
        const double te = (r.transform.translation - scene.instances[id].pose.translation).norm();
        worst_ratio = std::max(worst_ratio, te / r.transform.scale);
        ok += te < r.transform.scale * 0.01;
      } catch (const Error&) {
      }
    }
  }
  const bool pass = worst_axis <= 0.005 + 1e-12 && ok == fixtures;
  return {pass, fmt("max per-axis decode(encode) error %.6f (<= 0.005) over 3x100 bins; %d/%d part fixtures with "
                    "Te < 0.01 scale (worst Te/scale %.5f)",
                    worst_axis, ok, fixtures, worst_ratio)};
}

// ------------------------------------------------------------------ 4

Outcome clustering_correctness() {
  int exact = 0;
  double smallest_sep = 1e9;
  for (const Scene& scene : suite()) {
    const PointCloud centroids = instance_centroids(scene);
    double min_sep = 1e9;
    for (std::size_t a = 0; a < centroids.size(); ++a) {
      for (std::size_t b = a + 1; b < centroids.size(); ++b) {
        if (scene.instances[a].semantic_class == scene.instances[b].semantic_class) {
          min_sep = std::min(min_sep, (centroids[a] - centroids[b]).norm());
        }
      }
    }
    smallest_sep = std::min(smallest_sep, min_sep);
    ClusterParams params;
    params.bandwidth = std::min(0.05, 0.5 * min_sep);

    std::set<std::vector<std::size_t>> truth, found;
    std::vector<std::vector<std::size_t>> members(scene.instances.size());
    for (std::size_t i = 0; i < scene.size(); ++i) {
      if (scene.gt_instance[i] >= 0) members[scene.gt_instance[i]].push_back(i);
    }
    truth.insert(members.begin(), members.end());
    try {
      for (const auto& inst : cluster_instances(scene.points, oracle_predict(scene, OracleNoise{}), params)) {
        found.insert(inst.point_indices);
      }
    } catch (const Error&) {
    }
    exact += found == truth;
  }
  return {exact == kSuiteScenes,
          fmt("%d/%d scenes partitioned exactly (smallest same-class centroid separation %.3f m)", exact, kSuiteScenes,
              smallest_sep)};
}

// ------------------------------------------------------------------ 5

Outcome loss_gradient_fidelity() {
  Rng rng(505);
  double worst_value = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.uniform_int(1, 40);
    const RowMatrix probs = softmax_rows(random_matrix(rng, n, kNumClasses, 3.0));
    std::vector<int> labels(n);
    for (auto& l : labels) l = rng.uniform_int(0, kNumClasses - 1);
    const FocalLossParams fp{rng.uniform(0.05, 1.0), rng.uniform(0.0, 4.0)};
    worst_value = std::max(worst_value, std::abs(loss_semantic(probs, labels, fp) - focal_oracle(probs, labels, fp.alpha, fp.gamma)));

    const RowMatrix a = random_matrix(rng, n, 3, 0.1), b = random_matrix(rng, n, 3, 0.1);
    std::vector<bool> mask(n);
    for (int i = 0; i < n; ++i) mask[i] = i == 0 || rng.uniform() < 0.5;
    worst_value = std::max(worst_value, std::abs(loss_center(a, b, mask) - center_oracle(a, b, mask)));

    const RowMatrix logits = random_matrix(rng, n, kNpcsLogits, 4.0);
    std::vector<BinnedCoord> bins(n);
    for (auto& bc : bins) bc = BinnedCoord{{rng.uniform_int(0, 99), rng.uniform_int(0, 99), rng.uniform_int(0, 99)}};
    worst_value = std::max(worst_value, std::abs(loss_npcs(logits, bins, mask) - npcs_oracle(logits, bins, mask)));
  }

  double worst_grad = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    worst_grad = std::max(worst_grad, gradient_check(seed, ActiveHeads{}, 1));
    worst_grad = std::max(worst_grad, gradient_check(seed, ActiveHeads{true, false, false}, 3));
    worst_grad = std::max(worst_grad, gradient_check(seed, ActiveHeads{false, true, false}, 3));
    worst_grad = std::max(worst_grad, gradient_check(seed, ActiveHeads{false, false, true}, 3));
  }
  return {worst_value < 1e-9 && worst_grad < 1e-4,
          fmt("loss vs oracle max |diff| %.2e (< 1e-9) over 3x50 inputs; gradient vs central differences max rel. "
              "error %.2e (< 1e-4) over 50 micro-inputs",
              worst_value, worst_grad)};
}

// ------------------------------------------------------------------ 6

std::vector<EvalReport> g_reports;  // every report produced, for criterion 9

struct ToyBenchmark {
  static constexpr int kScenes = 100;
  static constexpr int kTrain = 80;
  static constexpr int kPointsPerScene = 1024;
  static constexpr int kTrainPoints = 384;
  static constexpr int kEpochs = 60;

  std::vector<Scene> scenes;
  std::vector<TrainingExample> train, val;

  ToyBenchmark() {
    GenConfig cfg;
    cfg.rng_seed = 606;
    cfg.points_per_scene = kPointsPerScene;
    cfg.min_part_points = 40;
    cfg.drawers = {1, 1};
    cfg.lids = {0, 1};
    cfg.handles = {0, 0};
    cfg.body_extents_min = Vec3::Constant(0.40);
    cfg.body_extents_max = Vec3::Constant(0.42);
    cfg.layout_jitter = 0.25;
    cfg.camera_distance_min = 1.2;
    cfg.camera_distance_max = 1.25;
    cfg.camera_elevation_min_deg = 20.0;
    cfg.camera_elevation_max_deg = 25.0;
    cfg.camera_azimuth_max_deg = 5.0;
    for (int i = 0; i < kScenes; ++i) scenes.push_back(generate_scene(cfg, i));
    for (int i = 0; i < kScenes; ++i) {
      auto ex = make_training_example(scenes[i], 16, i < kTrain ? kTrainPoints : 0, derive_seed(607, i));
      (i < kTrain ? train : val).push_back(std::move(ex));
    }
  }
};

std::vector<SceneEvaluation> evaluate_network(const ToyBenchmark& bench, const ModelParams& sem,
                                              const ModelParams& off, const ModelParams& npcs) {
  std::vector<SceneEvaluation> evals;
  PipelineParams pp;
  for (int i = ToyBenchmark::kTrain; i < ToyBenchmark::kScenes; ++i) {
    const Scene& scene = bench.scenes[i];
    const RowMatrix features = point_features(scene.points, sem.neighbors);
    PerPointPrediction pred = forward_features(sem, features);
    if (&off != &sem) pred.offsets = forward_features(off, features).offsets;
    if (&npcs != &sem) pred.npcs_logits = forward_features(npcs, features).npcs_logits;
    pp.ransac.rng_seed = derive_seed(608, i);
    evals.push_back(evaluate_scene(estimate_parts(scene.points, pred, pp), scene));
  }
  return evals;
}

// Mean Re of both runs over the parts that both of them matched.
std::pair<double, double> common_re(const std::vector<SceneEvaluation>& a, const std::vector<SceneEvaluation>& b,
                                    int& count) {
  double sa = 0.0, sb = 0.0;
  count = 0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    for (std::size_t g = 0; g < a[s].per_gt.size(); ++g) {
      if (!a[s].per_gt[g] || !b[s].per_gt[g]) continue;
      sa += a[s].per_gt[g]->re_deg;
      sb += b[s].per_gt[g]->re_deg;
      ++count;
    }
  }
  return {count ? sa / count : 0.0, count ? sb / count : 0.0};
}

Outcome joint_vs_individual() {
  const auto t0 = Clock::now();
  const ToyBenchmark bench;
  const ModelParams init = ModelParams::random(609);
  TrainConfig cfg;
  cfg.epochs = ToyBenchmark::kEpochs;
  cfg.rng_seed = 610;

  const ModelParams joint = train(init, bench.train, cfg).params;
  std::vector<ModelParams> single;
  for (const ActiveHeads heads : {ActiveHeads{true, false, false}, ActiveHeads{false, true, false},
                                  ActiveHeads{false, false, true}}) {
    cfg.heads = heads;
    single.push_back(train(init, bench.train, cfg).params);
  }
  const auto co_evals = evaluate_network(bench, joint, joint, joint);
  const auto ind_evals = evaluate_network(bench, single[0], single[1], single[2]);
  const EvalReport co = summarize(co_evals);
  const EvalReport ind = summarize(ind_evals);
  int common = 0;
  const auto [co_common, ind_common] = common_re(co_evals, ind_evals, common);
  g_reports.push_back(co);
  g_reports.push_back(ind);

  const FocalLossParams focal;
  const LossWeights w;
  const double joint_val = evaluate_losses(joint, bench.val, focal, w).total;
  const double ind_val = evaluate_losses(single[0], bench.val, focal, w).semantic +
                         evaluate_losses(single[1], bench.val, focal, w).center +
                         evaluate_losses(single[2], bench.val, focal, w).npcs;
  const double minutes = seconds_since(t0) / 60.0;
  const bool pass = co.matched > 0 && ind.matched > 0 && co.overall.a10 >= ind.overall.a10 &&
                    co.overall.re_deg <= ind.overall.re_deg && minutes < 10.0;
  return {pass, fmt("co-trained vs individual: A10 %.1f%% vs %.1f%%, mean Re %.2f vs %.2f deg (matched %zu vs %zu of "
                    "%zu; on the %d parts both matched %.2f vs %.2f deg); val loss %.4f vs %.4f; %.2f min (< 10)",
                    co.overall.a10, ind.overall.a10, co.overall.re_deg, ind.overall.re_deg, co.matched, ind.matched,
                    co.overall.gt, common, co_common, ind_common, joint_val, ind_val, minutes)};
}

// ------------------------------------------------------------------ 7

EvalReport oracle_report(const OracleNoise& noise) {
  std::vector<SceneEvaluation> evals;
  PipelineParams pp;
  for (std::size_t i = 0; i < suite().size(); ++i) {
    const Scene& scene = suite()[i];
    OracleNoise n = noise;
    n.rng_seed = derive_seed(noise.rng_seed, i);
    pp.ransac.rng_seed = derive_seed(707, i);
    evals.push_back(evaluate_scene(estimate_parts(scene.points, oracle_predict(scene, n), pp), scene));
  }
  return summarize(evals);
}

Outcome oracle_pipeline() {
  const EvalReport clean = oracle_report(OracleNoise{});
  OracleNoise noise;
  noise.offset_sigma = 0.005;
  noise.npcs_sigma = 0.01;
  noise.rng_seed = 708;
  const EvalReport noisy = oracle_report(noise);
  g_reports.push_back(clean);
  g_reports.push_back(noisy);
  const bool pass = clean.overall.a5 == 100.0 && clean.overall.re_deg < 0.5 && noisy.overall.a10 >= kNoisyA10Bound;
  return {pass, fmt("zero noise: A5 %.1f%% (= 100), mean Re %.3f deg (< 0.5) over %zu parts; sigma 5 mm / 0.01: "
                    "A10 %.1f%% (>= %.0f)",
                    clean.overall.a5, clean.overall.re_deg, clean.overall.gt, noisy.overall.a10, kNoisyA10Bound)};
}

// ------------------------------------------------------------------ 8

Outcome throughput() {
  std::vector<Scene> scenes;
  for (const Scene& s : suite()) {
    if (s.size() == 4096 && s.instances.size() <= 4) scenes.push_back(s);
  }
  std::map<const Scene*, PerPointPrediction> preds;
  for (const Scene& s : scenes) preds.emplace(&s, oracle_predict(s, OracleNoise{}));
  const PipelineParams pp;
  const double hz = benchmark_throughput([&](const Scene& s) { estimate_parts(s.points, preds.at(&s), pp); }, scenes, 5);
  const double ms = 1000.0 / hz;
  return {ms < 5.0, fmt("%.3f ms median per 4096-point scene (< 5 ms), %.0f Hz over %zu scenes", ms, hz, scenes.size())};
}

// ------------------------------------------------------------------ 9

Outcome metric_consistency() {
  int reports = 0, ordered = 0;
  for (const EvalReport& r : g_reports) {
    ++reports;
    bool ok = r.overall.a5 <= r.overall.a10;
    for (const auto& [cls, m] : r.per_class) ok = ok && m.a5 <= m.a10;
    ordered += ok;
  }
  struct Fixture {
    OrientedBox a, b;
    double analytic;
  };
  const Vec3 unit(1, 1, 1);
  const std::vector<Fixture> fixtures = {
      {{Vec3::Zero(), Rotation3(), unit}, {Vec3(0.5, 0, 0), Rotation3(), unit}, 0.5 / 1.5},
      {{Vec3::Zero(), Rotation3(), unit}, {Vec3(0.5, 0.5, 0), Rotation3(), unit}, 0.25 / 1.75},
      {{Vec3::Zero(), Rotation3(), unit}, {Vec3(0.1, -0.1, 0.2), Rotation3(), unit * 0.5}, 0.125},
      {{Vec3::Zero(), Rotation3(), Vec3(2, 1, 1)}, {Vec3::Zero(), Rotation3::rot_z(deg(90)), Vec3(1, 2, 1)}, 1.0},
      {{Vec3::Zero(), Rotation3(), unit}, {Vec3(1.5, 0, 0), Rotation3::rot_x(deg(30)), unit}, 0.0},
  };
  double worst = 0.0;
  for (const auto& f : fixtures) worst = std::max(worst, std::abs(box_iou_mc(f.a, f.b) - f.analytic));
  const bool pass = reports > 0 && ordered == reports && worst <= 0.02;
  return {pass, fmt("A5 <= A10 on %d/%d reports (overall and per class); MC iou3d max deviation %.4f (<= 0.02) on %zu "
                    "closed-form fixtures",
                    ordered, reports, worst, fixtures.size())};
}

// ------------------------------------------------------------------ 10

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), dir).string()] = std::string((std::istreambuf_iterator<char>(in)), {});
  }
  return files;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "yoeo_acceptance_determinism";
  const fs::path work = root / "run";
  auto run_all = [&]() {
    fs::remove_all(work);
    fs::create_directories(work);
    const std::string w = work.string();
    const std::vector<std::vector<std::string>> commands = {
        {"generate", "--seed", "11", "--count", "6", "--points-per-scene", "1024", "--jobs", "2", "--out", w + "/data"},
        {"train", "--seed", "12", "--data", w + "/data", "--epochs", "3", "--train-points", "256", "--out", w + "/train"},
        {"infer", "--seed", "13", "--data", w + "/data", "--weights", w + "/train/weights.bin", "--jobs", "2", "--out",
         w + "/infer"},
        {"infer", "--seed", "14", "--data", w + "/data", "--oracle", "--offset-sigma", "0.005", "--npcs-sigma", "0.01",
         "--flip-prob", "0.02", "--jobs", "3", "--out", w + "/oracle"},
        {"eval", "--seed", "15", "--data", w + "/data", "--pred", w + "/oracle/predictions.json", "--out", w + "/eval"},
    };
    std::ostringstream out, err;
    for (const auto& c : commands) {
      if (run_cli(c, out, err) != 0) throw Error(ErrorCode::InvalidArgument, c.front() + " failed: " + err.str());
    }
    return snapshot(work);
  };
  try {
    const auto first = run_all();
    const auto second = run_all();
    fs::remove_all(root);
    std::size_t differing = 0;
    for (const auto& [name, bytes] : first) {
      const auto it = second.find(name);
      differing += it == second.end() || it->second != bytes;
    }
    differing += second.size() - std::min(second.size(), first.size());
    return {differing == 0 && !first.empty(),
            fmt("%zu files from generate/train/infer/eval reruns, %zu differ", first.size(), differing)};
  } catch (const std::exception& e) {
    fs::remove_all(root);
    return {false, std::string("error: ") + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"Umeyama exactness", umeyama_exactness},
      {"RANSAC robustness", ransac_robustness},
      {"NPCS quantization bound", npcs_quantization},
      {"Clustering correctness", clustering_correctness},
      {"Loss/gradient fidelity", loss_gradient_fidelity},
      {"Joint vs individual training", joint_vs_individual},
      {"End-to-end oracle pipeline", oracle_pipeline},
      {"Throughput", throughput},
      {"Metric self-consistency", metric_consistency},
      {"Determinism", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("unexpected error: ") + e.what()};
    }
    ++ran;
    failed += !o.pass;
    std::printf("[%s] %2d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
