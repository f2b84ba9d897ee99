#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "yoeo/pipeline.hpp"
#include "yoeo/synthetic.hpp"

namespace yoeo {

struct PoseErrors {
  double re_deg = 0.0;
  double te = 0.0;      // meters
  double se = 0.0;      // size error over the ground-truth diagonal
  double se_raw = 0.0;  // meters
  double de = 0.0;      // meters, NaN when the prediction carries no axis
  double iou3d = 0.0;
};

struct InstanceMatch {
  struct Pair {
    std::size_t pred;
    std::size_t gt;
    double iou;
  };
  std::vector<Pair> pairs;          // in greedy selection order
  std::vector<std::size_t> missed;  // unmatched gt instance ids, ascending
  std::vector<std::size_t> spurious;  // unmatched predictions, ascending
};

inline constexpr double kMatchMinIou = 0.25;

/// Greedy one-to-one matching within each class by descending point
/// membership IoU; pairs below `min_iou` stay unmatched. Ties go to the
/// lower (pred, gt) index pair.
InstanceMatch match_instances(std::span<const PartInstance> pred, const Scene& gt,
                              double min_iou = kMatchMinIou);

inline constexpr int kIouSamples = 20000;
inline constexpr std::uint64_t kIouSeed = 0x1003d;

/// Monte-Carlo IoU over the axis-aligned bounding region of both boxes.
double box_iou_mc(const OrientedBox& a, const OrientedBox& b, int samples = kIouSamples,
                  std::uint64_t seed = kIouSeed);

/// Metric box implied by an NPCS pose and size (centered on T(0.5, 0.5, 0.5)).
OrientedBox pose_box(const Sim3Transform& pose, const Vec3& size);

/// Distance between two (infinite) axis lines.
double axis_line_distance(const JointAxis& a, const JointAxis& b);

PoseErrors pose_errors(const PoseResult& pred, const InstanceRecord& gt);

/// Percentage of entries with re < deg_thresh and te < trans_thresh;
/// nullopt entries (unmatched ground truth) count as failures. 0 for an
/// empty list.
double accuracy_at(std::span<const std::optional<PoseErrors>> errors, double deg_thresh,
                   double trans_thresh);

struct SceneEvaluation {
  std::vector<std::optional<PoseErrors>> per_gt;  // indexed by gt instance id
  std::vector<int> gt_class;
  std::size_t spurious = 0;
};

SceneEvaluation evaluate_scene(std::span<const PartDetection> detections, const Scene& gt);

struct ErrorMeans {
  double re_deg = 0.0;
  double te = 0.0;
  double se = 0.0;
  double se_raw = 0.0;
  double de = 0.0;
  double iou3d = 0.0;  // over matched instances
  double miou = 0.0;   // over all gt instances, unmatched count as 0
  double a5 = 0.0;
  double a10 = 0.0;
  std::size_t gt = 0;
  std::size_t matched = 0;
};

struct EvalReport {
  std::map<int, ErrorMeans> per_class;
  ErrorMeans overall;
  std::size_t matched = 0;
  std::size_t missed = 0;
  std::size_t spurious = 0;
  std::optional<double> throughput_hz;
  double param_millions = 0.0;
};

EvalReport summarize(std::span<const SceneEvaluation> scenes);

nlohmann::json report_to_json(const EvalReport& report);
/// Aligned text table with columns Re Te Se mIoU A5 A10 Param Speed.
std::string report_table(const EvalReport& report);

/// Scenes per second: one warm-up pass over the first scene, then the
/// median of `runs` timed passes over all scenes.
/// Throws Error(InvalidArgument) for fewer than 10 scenes.
double benchmark_throughput(const std::function<void(const Scene&)>& pipeline,
                            std::span<const Scene> scenes, int runs = 5);

}  // namespace yoeo
