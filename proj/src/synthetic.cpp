#include "yoeo/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "yoeo/error.hpp"
#include "yoeo/random.hpp"

namespace yoeo {

namespace {

constexpr double kFrontMargin = 0.015;      // gap between front-face footprints
constexpr double kSameClassSpacing = 0.12;  // min rest-center distance, same kind
constexpr double kObjectGap = 0.15;
constexpr int kPlacementTries = 64;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

OrientedBox box_from_pose(const Sim3Transform& pose, const Vec3& extents) {
  return OrientedBox{pose.translation, pose.rotation, extents};
}

struct Footprint {
  double y0, y1, z0, z1;
  bool overlaps(const Footprint& o, double margin) const {
    return y0 < o.y1 + margin && o.y0 < y1 + margin && z0 < o.z1 + margin && o.z0 < z1 + margin;
  }
};

}  // namespace

std::string_view part_kind_name(PartKind kind) {
  switch (kind) {
    case PartKind::Drawer: return "drawer";
    case PartKind::HingeLid: return "hinge_lid";
    case PartKind::HingeHandle: return "hinge_handle";
  }
  return "unknown";
}

JointKind joint_kind(PartKind kind) {
  return kind == PartKind::Drawer ? JointKind::Prismatic : JointKind::Revolute;
}

double articulation_limit(PartKind kind) {
  return kind == PartKind::Drawer ? 0.3 : std::numbers::pi / 2.0;
}

JointAxis canonical_joint(PartKind kind, const Vec3& ce) {
  JointAxis axis;
  axis.kind = joint_kind(kind);
  switch (kind) {
    case PartKind::Drawer:
      axis.origin = Vec3::Constant(0.5);
      axis.direction = Vec3::UnitX();
      break;
    case PartKind::HingeLid:
      axis.origin = Vec3(0.5 - 0.5 * ce.x(), 0.5, 0.5 - 0.5 * ce.z());
      axis.direction = -Vec3::UnitY();
      break;
    case PartKind::HingeHandle:
      axis.origin = Vec3(0.5, 0.5 - 0.5 * ce.y(), 0.5);
      axis.direction = Vec3::UnitX();
      break;
  }
  return axis;
}

Sim3Transform articulated_pose(const PartSpec& part) {
  const Sim3Transform& rest = part.attach_pose;
  if (part.joint.kind == JointKind::Prismatic) {
    return Sim3Transform(1.0, rest.rotation,
                         rest.translation + part.articulation * part.joint.direction);
  }
  const Rotation3 motion = Rotation3::about_axis(part.joint.direction, part.articulation);
  return Sim3Transform(1.0, motion * rest.rotation,
                       part.joint.origin + motion * (rest.translation - part.joint.origin));
}

void ArticulatedObjectSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::DegenerateSpec, msg); };
  if (!(body_extents.array() > 0.0).all()) fail("body extents must be > 0");
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const PartSpec& p = parts[i];
    const std::string tag = "part " + std::to_string(i) + ": ";
    if (!(p.extents.array() > 0.0).all()) fail(tag + "extents must be > 0");
    if (!(p.articulation >= 0.0 && p.articulation <= articulation_limit(p.kind) + 1e-12)) {
      fail(tag + "articulation out of range");
    }
    if (std::abs(p.joint.direction.norm() - 1.0) > 1e-9) fail(tag + "joint direction not unit");
    if (p.joint.kind != joint_kind(p.kind)) fail(tag + "joint kind does not match part kind");
    if (std::abs(p.attach_pose.scale - 1.0) > 1e-12) fail(tag + "attach pose must be rigid");
    for (std::size_t j = 0; j < i; ++j) {
      const PartSpec& q = parts[j];
      if (boxes_overlap(box_from_pose(p.attach_pose, p.extents),
                        box_from_pose(q.attach_pose, q.extents))) {
        fail(tag + "overlaps part " + std::to_string(j) + " at rest");
      }
    }
  }
}

void GenConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); };
  if (points_per_scene < 512) fail("points_per_scene must be >= 512");
  if (objects_per_scene < 1) fail("objects_per_scene must be >= 1");
  if (min_part_points < 0) fail("min_part_points must be >= 0");
  for (const CountRange* r : {&drawers, &lids, &handles}) {
    if (r->min < 0 || r->max < r->min) fail("part count range must satisfy 0 <= min <= max");
  }
  if (lids.max > 1) fail("at most one lid per object");
  if (!(body_extents_min.array() > 0.0).all() ||
      !(body_extents_max.array() >= body_extents_min.array()).all()) {
    fail("body extents range invalid");
  }
  if (!(camera_distance_min > 0.0 && camera_distance_max >= camera_distance_min)) {
    fail("camera distance range invalid");
  }
  if (!(layout_jitter >= 0.0 && layout_jitter <= 1.0)) fail("layout_jitter must be in [0, 1]");
  if (view_cells_x < 1 || view_cells_y < 1) fail("view cell grid must be positive");
  if (!(view_fov_x_deg > 0.0 && view_fov_x_deg < 180.0 && view_fov_y_deg > 0.0 &&
        view_fov_y_deg < 180.0)) {
    fail("view field of view must be in (0, 180) degrees");
  }
}

ArticulatedObjectSpec generate_object(std::uint64_t seed, const GenConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(seed, 0x0b1ec7));

  ArticulatedObjectSpec spec;
  for (int a = 0; a < 3; ++a) {
    spec.body_extents(a) = rng.uniform(cfg.body_extents_min(a), cfg.body_extents_max(a));
  }
  const Vec3 be = spec.body_extents;
  // Part layout draws, pulled toward the middle of their range by the jitter.
  auto layout = [&](double lo, double hi) {
    const double draw = rng.uniform(lo, hi);
    if (cfg.layout_jitter == 1.0) return draw;
    const double mid = 0.5 * (lo + hi);
    return mid + cfg.layout_jitter * (draw - mid);
  };

  int n_drawers = 0, n_lids = 0, n_handles = 0;
  const int wanted_min = std::max(1, cfg.drawers.min + cfg.lids.min + cfg.handles.min);
  for (int attempt = 0; attempt < 16; ++attempt) {
    n_drawers = rng.uniform_int(cfg.drawers.min, cfg.drawers.max);
    n_lids = rng.uniform_int(cfg.lids.min, cfg.lids.max);
    n_handles = rng.uniform_int(cfg.handles.min, cfg.handles.max);
    if (n_drawers + n_lids + n_handles >= wanted_min) break;
  }

  auto finish_part = [](PartSpec& part) {
    const Vec3 ce = part.extents / part.extents.norm();
    part.joint = transform_axis(canonical_joint(part.kind, ce),
                                npcs_to_camera(part.attach_pose, part.extents));
  };

  if (n_lids > 0) {
    PartSpec lid;
    lid.kind = PartKind::HingeLid;
    lid.extents = Vec3(be.x(), be.y(), layout(0.015, 0.03));
    lid.attach_pose = Sim3Transform(1.0, Rotation3(), Vec3(0, 0, 0.5 * be.z() + 0.5 * lid.extents.z()));
    lid.articulation = layout(0.0, articulation_limit(PartKind::HingeLid));
    finish_part(lid);
    spec.parts.push_back(lid);
  }

  std::vector<Footprint> footprints;
  std::vector<std::pair<PartKind, Vec3>> centers;
  auto place_front = [&](PartKind kind) {
    for (int t = 0; t < kPlacementTries; ++t) {
      PartSpec part;
      part.kind = kind;
      double x_center;
      if (kind == PartKind::Drawer) {
        part.extents = Vec3(layout(0.5, 0.85) * be.x(), layout(0.5, 0.9) * be.y(),
                            layout(0.08, std::max(0.08, std::min(0.2, 0.45 * be.z()))));
        x_center = 0.5 * be.x() - 0.5 * part.extents.x();
      } else {
        part.extents = Vec3(layout(0.02, 0.04), layout(0.1, std::max(0.1, std::min(0.2, 0.8 * be.y()))),
                            layout(0.02, 0.04));
        x_center = 0.5 * be.x() + 0.5 * part.extents.x();
      }
      const double ymax = 0.5 * be.y() - 0.5 * part.extents.y() - 0.01;
      const double zmax = 0.5 * be.z() - 0.5 * part.extents.z() - 0.01;
      if (ymax < 0.0 || zmax < 0.0) continue;
      const Vec3 c(x_center, layout(-ymax, ymax), layout(-zmax, zmax));
      const Footprint fp{c.y() - 0.5 * part.extents.y(), c.y() + 0.5 * part.extents.y(),
                         c.z() - 0.5 * part.extents.z(), c.z() + 0.5 * part.extents.z()};
      bool ok = true;
      for (const auto& other : footprints) ok = ok && !fp.overlaps(other, kFrontMargin);
      for (const auto& [k, oc] : centers) {
        ok = ok && !(k == kind && (oc - c).norm() < kSameClassSpacing);
      }
      if (!ok) continue;
      part.attach_pose = Sim3Transform(1.0, Rotation3(), c);
      const double limit = kind == PartKind::Drawer
                               ? std::min(articulation_limit(kind), 0.9 * part.extents.x())
                               : articulation_limit(kind);
      part.articulation = layout(0.0, limit);
      finish_part(part);
      footprints.push_back(fp);
      centers.emplace_back(kind, c);
      spec.parts.push_back(part);
      return;
    }
  };
  for (int i = 0; i < n_drawers; ++i) place_front(PartKind::Drawer);
  for (int i = 0; i < n_handles; ++i) place_front(PartKind::HingeHandle);

  spec.validate();
  return spec;
}

void Scene::validate() const {
  const std::size_t n = points.size();
  if (gt_semantic.size() != n || gt_instance.size() != n || gt_npcs.size() != n) {
    throw Error(ErrorCode::DegenerateSpec, "scene arrays differ in length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int inst = gt_instance[i];
    if (inst < -1 || inst >= static_cast<int>(instances.size())) {
      throw Error(ErrorCode::DegenerateSpec, "scene instance id out of range");
    }
    if (inst >= 0 && (!gt_npcs[i] || gt_semantic[i] != instances[inst].semantic_class)) {
      throw Error(ErrorCode::DegenerateSpec, "part point lacks NPCS or has inconsistent class");
    }
  }
}

std::vector<std::size_t> zbuffer_cull(std::span<const Vec3> pts, const GenConfig& cfg) {
  const double fx = deg2rad(cfg.view_fov_x_deg);
  const double fy = deg2rad(cfg.view_fov_y_deg);
  const std::size_t cells = static_cast<std::size_t>(cfg.view_cells_x) * cfg.view_cells_y;
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> owner(cells, kNone);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3& p = pts[i];
    if (p.z() <= 1e-9) continue;
    const double ax = std::atan2(p.x(), p.z());
    const double ay = std::atan2(p.y(), p.z());
    const auto cx = static_cast<long>(std::floor((ax / fx + 0.5) * cfg.view_cells_x));
    const auto cy = static_cast<long>(std::floor((ay / fy + 0.5) * cfg.view_cells_y));
    if (cx < 0 || cy < 0 || cx >= cfg.view_cells_x || cy >= cfg.view_cells_y) continue;
    std::size_t& slot = owner[static_cast<std::size_t>(cy) * cfg.view_cells_x + cx];
    if (slot == kNone || p.squaredNorm() < pts[slot].squaredNorm()) slot = i;
  }
  std::vector<std::size_t> kept;
  for (std::size_t s : owner) {
    if (s != kNone) kept.push_back(s);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

namespace {

struct SampledBox {
  OrientedBox box;
  int semantic_class;
  int instance;  // -1 for bodies
  std::size_t points;
};

double box_area(const Vec3& e) {
  return 2.0 * (e.x() * e.y() + e.y() * e.z() + e.z() * e.x());
}

// Largest-remainder apportionment of `total` by `weights`.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> out(weights.size(), 0);
  if (weights.empty() || sum <= 0.0) return out;
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / sum;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    used += out[i];
    rem.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; used < total; ++k, ++used) ++out[rem[k % rem.size()].second];
  return out;
}

// Stratified jittered samples on the six faces of `box`, area-proportional.
void sample_box(const OrientedBox& box, std::size_t n, Rng& rng, PointCloud& out) {
  const Vec3 e = box.extents;
  const std::vector<double> face_area = {e.y() * e.z(), e.y() * e.z(), e.x() * e.z(),
                                         e.x() * e.z(), e.x() * e.y(), e.x() * e.y()};
  const std::vector<std::size_t> per_face = apportion(n, face_area);
  for (int f = 0; f < 6; ++f) {
    const std::size_t m = per_face[f];
    if (m == 0) continue;
    const int a = f / 2;
    const int u = (a + 1) % 3;
    const int v = (a + 2) % 3;
    const double sign = (f % 2 == 0) ? 1.0 : -1.0;
    const auto nu = static_cast<std::size_t>(
        std::max(1.0, std::round(std::sqrt(static_cast<double>(m) * e(u) / e(v)))));
    const std::size_t nv = (m + nu - 1) / nu;
    // Choose m of the nu*nv cells.
    std::vector<std::size_t> cells(nu * nv);
    std::iota(cells.begin(), cells.end(), 0);
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng.next() % (cells.size() - k));
      std::swap(cells[k], cells[j]);
    }
    std::sort(cells.begin(), cells.begin() + static_cast<long>(m));
    for (std::size_t k = 0; k < m; ++k) {
      const double cu = (static_cast<double>(cells[k] % nu) + rng.uniform()) / nu;
      const double cv = (static_cast<double>(cells[k] / nu) + rng.uniform()) / nv;
      Vec3 local;
      local(a) = sign * 0.5 * e(a);
      local(u) = (cu - 0.5) * e(u);
      local(v) = (cv - 0.5) * e(v);
      out.push_back(box.center + box.rotation * local);
    }
  }
}

Sim3Transform look_at_camera(const Vec3& target, double distance, double elevation,
                             double azimuth) {
  const Vec3 eye = target + distance * Vec3(std::cos(elevation) * std::cos(azimuth),
                                            std::cos(elevation) * std::sin(azimuth),
                                            std::sin(elevation));
  const Vec3 z = (target - eye).normalized();
  const Vec3 x = z.cross(Vec3::UnitZ()).normalized();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return Sim3Transform(1.0, Rotation3::from_matrix(r, 1e-9), eye);
}

}  // namespace

Scene render_scene(std::span<const ArticulatedObjectSpec> objects, const GenConfig& cfg) {
  cfg.validate();
  if (objects.empty()) throw Error(ErrorCode::DegenerateSpec, "render_scene: no objects");
  for (const auto& o : objects) o.validate();

  Rng rng(derive_seed(cfg.rng_seed, 0x5ce4e));

  // World placement: objects side by side along +y.
  std::vector<Sim3Transform> world_from_body;
  double y = 0.0;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (i > 0) y += 0.5 * objects[i - 1].body_extents.y() + kObjectGap + 0.5 * objects[i].body_extents.y();
    world_from_body.emplace_back(1.0, Rotation3(), Vec3(0.0, y, 0.0));
  }
  const Vec3 target(0.0, 0.5 * y, 0.0);

  const Sim3Transform camera_pose = look_at_camera(
      target, rng.uniform(cfg.camera_distance_min, cfg.camera_distance_max),
      deg2rad(rng.uniform(cfg.camera_elevation_min_deg, cfg.camera_elevation_max_deg)),
      deg2rad(rng.uniform(-cfg.camera_azimuth_max_deg, cfg.camera_azimuth_max_deg)));
  const Sim3Transform camera_from_world = inverse(camera_pose);

  struct PartRef {
    const PartSpec* spec;
    Sim3Transform camera_pose;
  };
  std::vector<SampledBox> boxes;
  std::vector<PartRef> parts;
  for (std::size_t o = 0; o < objects.size(); ++o) {
    const Sim3Transform body_pose = compose(camera_from_world, world_from_body[o]);
    boxes.push_back({box_from_pose(body_pose, objects[o].body_extents), kBackgroundClass, -1, 0});
    for (const PartSpec& part : objects[o].parts) {
      const Sim3Transform pose = compose(body_pose, articulated_pose(part));
      boxes.push_back({box_from_pose(pose, part.extents), static_cast<int>(part.kind),
                       static_cast<int>(parts.size()), 0});
      parts.push_back({&part, pose});
    }
  }

  const std::size_t oversample = cfg.partial_view ? 3 : 1;
  const std::size_t total = oversample * static_cast<std::size_t>(cfg.points_per_scene);
  double area_sum = 0.0;
  for (const auto& b : boxes) area_sum += box_area(b.box.extents);
  std::size_t part_total = 0;
  for (auto& b : boxes) {
    if (b.instance < 0) continue;
    const auto share = static_cast<std::size_t>(
        std::llround(static_cast<double>(total) * box_area(b.box.extents) / area_sum));
    b.points = std::max(share, oversample * static_cast<std::size_t>(cfg.min_part_points));
    part_total += b.points;
  }
  if (part_total >= total) {
    throw Error(ErrorCode::DegenerateSpec, "render_scene: parts need more points than available");
  }
  std::vector<double> body_areas;
  for (const auto& b : boxes) {
    if (b.instance < 0) body_areas.push_back(box_area(b.box.extents));
  }
  const auto body_points = apportion(total - part_total, body_areas);
  for (std::size_t b = 0, k = 0; b < boxes.size(); ++b) {
    if (boxes[b].instance < 0) boxes[b].points = body_points[k++];
  }

  PointCloud raw;
  std::vector<int> raw_sem, raw_inst;
  raw.reserve(total);
  for (const auto& b : boxes) {
    const std::size_t before = raw.size();
    sample_box(b.box, b.points, rng, raw);
    raw_sem.insert(raw_sem.end(), raw.size() - before, b.semantic_class);
    raw_inst.insert(raw_inst.end(), raw.size() - before, b.instance);
  }

  std::vector<std::size_t> keep(raw.size());
  std::iota(keep.begin(), keep.end(), 0);
  if (cfg.partial_view) {
    keep = zbuffer_cull(raw, cfg);
    const auto limit = static_cast<std::size_t>(cfg.points_per_scene);
    if (keep.size() > limit) {
      for (std::size_t k = 0; k < limit; ++k) {
        const std::size_t j = k + static_cast<std::size_t>(rng.next() % (keep.size() - k));
        std::swap(keep[k], keep[j]);
      }
      keep.resize(limit);
      std::sort(keep.begin(), keep.end());
    }
  }

  Scene scene;
  scene.camera_pose = camera_pose;
  std::vector<int> remap(parts.size(), -1);
  std::vector<std::vector<std::size_t>> members(parts.size());
  for (std::size_t idx : keep) {
    const int inst = raw_inst[idx];
    if (inst >= 0) members[inst].push_back(scene.points.size());
    scene.points.push_back(raw[idx]);
    scene.gt_semantic.push_back(raw_sem[idx]);
    scene.gt_instance.push_back(inst);
  }
  scene.gt_npcs.assign(scene.points.size(), std::nullopt);

  for (std::size_t p = 0; p < parts.size(); ++p) {
    if (members[p].empty()) continue;
    remap[p] = static_cast<int>(scene.instances.size());
    const PartSpec& spec = *parts[p].spec;
    PointCloud pts;
    for (std::size_t i : members[p]) pts.push_back(scene.points[i]);
    const CanonicalPart canon = canonicalize_part(pts, parts[p].camera_pose, spec.extents);
    for (std::size_t k = 0; k < members[p].size(); ++k) scene.gt_npcs[members[p][k]] = canon.coords[k];

    InstanceRecord rec;
    rec.semantic_class = static_cast<int>(spec.kind);
    rec.pose = npcs_to_camera(parts[p].camera_pose, spec.extents);
    rec.size = spec.extents;
    rec.axis = transform_axis(canonical_joint(spec.kind, canon.canonicalization.canonical_extents),
                              rec.pose);
    scene.instances.push_back(rec);
  }
  for (int& inst : scene.gt_instance) {
    if (inst >= 0) inst = remap[inst];
  }
  return scene;
}

Scene render_scene(const ArticulatedObjectSpec& spec, const GenConfig& cfg) {
  return render_scene(std::span<const ArticulatedObjectSpec>(&spec, 1), cfg);
}

Scene generate_scene(const GenConfig& cfg, std::uint64_t index) {
  const std::uint64_t scene_seed = derive_seed(cfg.rng_seed, index);
  std::vector<ArticulatedObjectSpec> objects;
  for (int o = 0; o < cfg.objects_per_scene; ++o) {
    objects.push_back(generate_object(derive_seed(scene_seed, static_cast<std::uint64_t>(o)), cfg));
  }
  GenConfig scene_cfg = cfg;
  scene_cfg.rng_seed = scene_seed;
  return render_scene(objects, scene_cfg);
}

PointCloud instance_centroids(const Scene& scene) {
  PointCloud sums(scene.instances.size(), Vec3::Zero());
  std::vector<std::size_t> counts(scene.instances.size(), 0);
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const int inst = scene.gt_instance[i];
    if (inst < 0) continue;
    sums[inst] += scene.points[i];
    ++counts[inst];
  }
  for (std::size_t k = 0; k < sums.size(); ++k) {
    if (counts[k] > 0) sums[k] /= static_cast<double>(counts[k]);
  }
  return sums;
}

PointCloud gt_offsets(const Scene& scene) {
  const PointCloud centroids = instance_centroids(scene);
  PointCloud out(scene.size(), Vec3::Zero());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const int inst = scene.gt_instance[i];
    if (inst >= 0) out[i] = centroids[inst] - scene.points[i];
  }
  return out;
}

}  // namespace yoeo
