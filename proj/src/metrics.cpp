#include "yoeo/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "yoeo/error.hpp"
#include "yoeo/random.hpp"

namespace yoeo {

InstanceMatch match_instances(std::span<const PartInstance> pred, const Scene& gt, double min_iou) {
  const std::size_t n_gt = gt.instances.size();
  std::vector<std::size_t> gt_size(n_gt, 0);
  for (int inst : gt.gt_instance) {
    if (inst >= 0) ++gt_size[static_cast<std::size_t>(inst)];
  }

  std::vector<InstanceMatch::Pair> candidates;
  for (std::size_t p = 0; p < pred.size(); ++p) {
    std::vector<std::size_t> overlap(n_gt, 0);
    for (std::size_t i : pred[p].point_indices) {
      if (i < gt.size() && gt.gt_instance[i] >= 0) ++overlap[static_cast<std::size_t>(gt.gt_instance[i])];
    }
    for (std::size_t g = 0; g < n_gt; ++g) {
      if (gt.instances[g].semantic_class != pred[p].semantic_class || overlap[g] == 0) continue;
      const double uni = static_cast<double>(pred[p].point_indices.size() + gt_size[g] - overlap[g]);
      const double iou = static_cast<double>(overlap[g]) / uni;
      if (iou >= min_iou) candidates.push_back({p, g, iou});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.iou > b.iou; });

  InstanceMatch match;
  std::vector<bool> pred_used(pred.size(), false), gt_used(n_gt, false);
  for (const auto& c : candidates) {
    if (pred_used[c.pred] || gt_used[c.gt]) continue;
    pred_used[c.pred] = gt_used[c.gt] = true;
    match.pairs.push_back(c);
  }
  for (std::size_t g = 0; g < n_gt; ++g) {
    if (!gt_used[g]) match.missed.push_back(g);
  }
  for (std::size_t p = 0; p < pred.size(); ++p) {
    if (!pred_used[p]) match.spurious.push_back(p);
  }
  return match;
}

double box_iou_mc(const OrientedBox& a, const OrientedBox& b, int samples, std::uint64_t seed) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const OrientedBox* box : {&a, &b}) {
    for (int c = 0; c < 8; ++c) {
      const Vec3 corner((c & 1 ? 0.5 : -0.5) * box->extents.x(), (c & 2 ? 0.5 : -0.5) * box->extents.y(),
                        (c & 4 ? 0.5 : -0.5) * box->extents.z());
      const Vec3 w = box->center + box->rotation * corner;
      lo = lo.cwiseMin(w);
      hi = hi.cwiseMax(w);
    }
  }
  Rng rng(seed);
  std::size_t in_a = 0, in_b = 0, both = 0;
  for (int s = 0; s < samples; ++s) {
    const Vec3 p(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()), rng.uniform(lo.z(), hi.z()));
    const bool ia = a.contains(p);
    const bool ib = b.contains(p);
    in_a += ia;
    in_b += ib;
    both += ia && ib;
  }
  const std::size_t uni = in_a + in_b - both;
  return uni == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(uni);
}

OrientedBox pose_box(const Sim3Transform& pose, const Vec3& size) {
  return OrientedBox{apply(pose, Vec3::Constant(0.5)), pose.rotation, size};
}

double axis_line_distance(const JointAxis& a, const JointAxis& b) {
  const Vec3 da = a.direction.normalized();
  const Vec3 db = b.direction.normalized();
  const Vec3 w = b.origin - a.origin;
  const Vec3 n = da.cross(db);
  const double n_norm = n.norm();
  if (n_norm < 1e-9) return (w - w.dot(da) * da).norm();  // parallel
  return std::abs(w.dot(n)) / n_norm;
}

PoseErrors pose_errors(const PoseResult& pred, const InstanceRecord& gt) {
  PoseErrors e;
  e.re_deg = rotation_geodesic_deg(pred.transform.rotation, gt.pose.rotation);
  e.te = (pred.transform.translation - gt.pose.translation).norm();
  e.se_raw = (pred.size - gt.size).norm();
  e.se = e.se_raw / gt.size.norm();
  e.de = pred.axis ? axis_line_distance(*pred.axis, gt.axis) : std::numeric_limits<double>::quiet_NaN();
  e.iou3d = box_iou_mc(pose_box(pred.transform, pred.size), pose_box(gt.pose, gt.size));
  return e;
}

double accuracy_at(std::span<const std::optional<PoseErrors>> errors, double deg_thresh,
                   double trans_thresh) {
  if (errors.empty()) return 0.0;
  std::size_t pass = 0;
  for (const auto& e : errors) {
    if (e && e->re_deg < deg_thresh && e->te < trans_thresh) ++pass;
  }
  return 100.0 * static_cast<double>(pass) / static_cast<double>(errors.size());
}

SceneEvaluation evaluate_scene(std::span<const PartDetection> detections, const Scene& gt) {
  std::vector<PartInstance> instances;
  instances.reserve(detections.size());
  for (const auto& d : detections) instances.push_back(d.instance);
  const InstanceMatch match = match_instances(instances, gt);

  SceneEvaluation ev;
  ev.per_gt.assign(gt.instances.size(), std::nullopt);
  for (const auto& inst : gt.instances) ev.gt_class.push_back(inst.semantic_class);
  for (const auto& pair : match.pairs) {
    ev.per_gt[pair.gt] = pose_errors(detections[pair.pred].pose, gt.instances[pair.gt]);
  }
  ev.spurious = match.spurious.size();
  return ev;
}

namespace {

ErrorMeans reduce(const std::vector<std::optional<PoseErrors>>& errors) {
  ErrorMeans m;
  m.gt = errors.size();
  std::size_t de_count = 0;
  for (const auto& e : errors) {
    if (!e) continue;
    ++m.matched;
    m.re_deg += e->re_deg;
    m.te += e->te;
    m.se += e->se;
    m.se_raw += e->se_raw;
    m.iou3d += e->iou3d;
    if (std::isfinite(e->de)) {
      m.de += e->de;
      ++de_count;
    }
  }
  m.miou = m.gt > 0 ? m.iou3d / static_cast<double>(m.gt) : 0.0;
  if (m.matched > 0) {
    const double inv = 1.0 / static_cast<double>(m.matched);
    m.re_deg *= inv;
    m.te *= inv;
    m.se *= inv;
    m.se_raw *= inv;
    m.iou3d *= inv;
  }
  m.de = de_count > 0 ? m.de / static_cast<double>(de_count) : 0.0;
  m.a5 = accuracy_at(errors, 5.0, 0.05);
  m.a10 = accuracy_at(errors, 10.0, 0.10);
  return m;
}

}  // namespace

EvalReport summarize(std::span<const SceneEvaluation> scenes) {
  EvalReport report;
  std::vector<std::optional<PoseErrors>> all;
  std::map<int, std::vector<std::optional<PoseErrors>>> by_class;
  for (const auto& s : scenes) {
    for (std::size_t g = 0; g < s.per_gt.size(); ++g) {
      all.push_back(s.per_gt[g]);
      by_class[s.gt_class[g]].push_back(s.per_gt[g]);
      if (s.per_gt[g]) {
        ++report.matched;
      } else {
        ++report.missed;
      }
    }
    report.spurious += s.spurious;
  }
  report.overall = reduce(all);
  for (const auto& [cls, errors] : by_class) report.per_class[cls] = reduce(errors);
  return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
  auto means = [](const ErrorMeans& m) {
    return nlohmann::json{{"re_deg", m.re_deg}, {"te", m.te},       {"se", m.se},
                          {"se_raw", m.se_raw}, {"de", m.de},       {"iou3d", m.iou3d},
                          {"miou", m.miou},     {"a5", m.a5},       {"a10", m.a10},
                          {"gt", m.gt},         {"matched", m.matched}};
  };
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [cls, m] : report.per_class) per_class[std::to_string(cls)] = means(m);
  return nlohmann::json{
      {"overall", means(report.overall)},
      {"per_class", per_class},
      {"a5", report.overall.a5},
      {"a10", report.overall.a10},
      {"matched", report.matched},
      {"missed", report.missed},
      {"spurious", report.spurious},
      {"param_millions", report.param_millions},
      {"throughput_hz", report.throughput_hz ? nlohmann::json(*report.throughput_hz) : nlohmann::json(nullptr)}};
}

std::string report_table(const EvalReport& report) {
  std::ostringstream os;
  os << std::fixed;
  auto row = [&os, &report](const std::string& name, const ErrorMeans& m) {
    os << std::left << std::setw(14) << name << std::right << std::setprecision(3) << std::setw(9)
       << m.re_deg << std::setw(9) << 100.0 * m.te << std::setw(9) << 100.0 * m.se
       << std::setprecision(1) << std::setw(8) << 100.0 * m.miou << std::setw(8) << m.a5
       << std::setw(8) << m.a10 << std::setprecision(3) << std::setw(9) << report.param_millions;
    if (report.throughput_hz) {
      os << std::setprecision(1) << std::setw(10) << *report.throughput_hz;
    } else {
      os << std::setw(10) << "-";
    }
    os << '\n';
  };
  os << std::left << std::setw(14) << "class" << std::right << std::setw(9) << "Re(deg)"
     << std::setw(9) << "Te(cm)" << std::setw(9) << "Se(%)" << std::setw(8) << "mIoU" << std::setw(8)
     << "A5" << std::setw(8) << "A10" << std::setw(9) << "Param(M)" << std::setw(10) << "Speed(Hz)"
     << '\n';
  for (const auto& [cls, m] : report.per_class) {
    const std::string name = cls >= 1 && cls < kNumClasses
                                 ? std::string(part_kind_name(static_cast<PartKind>(cls)))
                                 : "class " + std::to_string(cls);
    row(name, m);
  }
  row("overall", report.overall);
  os << "matched " << report.matched << ", missed " << report.missed << ", spurious "
     << report.spurious << '\n';
  return os.str();
}

double benchmark_throughput(const std::function<void(const Scene&)>& pipeline,
                            std::span<const Scene> scenes, int runs) {
  if (scenes.size() < 10) {
    throw Error(ErrorCode::InvalidArgument, "benchmark_throughput: at least 10 scenes are required");
  }
  if (runs < 1) throw Error(ErrorCode::InvalidArgument, "benchmark_throughput: runs must be >= 1");
  pipeline(scenes.front());  // warm-up
  std::vector<double> rates;
  for (int r = 0; r < runs; ++r) {
    const auto start = std::chrono::steady_clock::now();
    for (const auto& s : scenes) pipeline(s);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    rates.push_back(static_cast<double>(scenes.size()) / std::max(elapsed.count(), 1e-12));
  }
  std::sort(rates.begin(), rates.end());
  return rates[rates.size() / 2];
}

}  // namespace yoeo
