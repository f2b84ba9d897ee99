#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "yoeo/geometry.hpp"
#include "yoeo/npcs.hpp"

namespace yoeo {

/// Semantic classes. 0 is the object body and never forms an instance.
enum class PartKind { Drawer = 1, HingeLid = 2, HingeHandle = 3 };

inline constexpr int kBackgroundClass = 0;
inline constexpr int kNumClasses = 4;

std::string_view part_kind_name(PartKind kind);
JointKind joint_kind(PartKind kind);
/// Upper articulation limit: meters for drawers, radians for hinges.
double articulation_limit(PartKind kind);

/// Category-level joint axis of a part kind in its NPCS frame, as a function
/// of the part's canonical extents (box extents over the box diagonal).
///
///   drawer: prismatic through the center along +x (the pull direction)
///   lid:    revolute about -y through the back-bottom edge
///   handle: revolute about +x through the -y end
JointAxis canonical_joint(PartKind kind, const Vec3& canonical_extents);

struct PartSpec {
  PartKind kind = PartKind::Drawer;
  Vec3 extents = Vec3::Ones();      // meters
  JointAxis joint;                  // body frame
  double articulation = 0.0;        // meters or radians
  Sim3Transform attach_pose;        // rest frame of the box center, body frame (scale 1)
};

struct ArticulatedObjectSpec {
  Vec3 body_extents = Vec3::Ones();
  std::vector<PartSpec> parts;

  /// Throws Error(DegenerateSpec) on non-positive extents, articulation out
  /// of range or overlapping parts at rest.
  void validate() const;
};

struct CountRange {
  int min = 0;
  int max = 0;
};

struct GenConfig {
  std::uint64_t rng_seed = 0;
  int objects_per_scene = 1;
  int points_per_scene = 4096;
  // Parts whose area share falls below this are topped up from the body.
  int min_part_points = 48;
  CountRange drawers{0, 2};
  CountRange lids{0, 1};
  CountRange handles{0, 2};
  Vec3 body_extents_min{0.30, 0.30, 0.30};
  Vec3 body_extents_max{0.60, 0.60, 0.60};
  double camera_distance_min = 1.0;
  double camera_distance_max = 1.6;
  double camera_elevation_min_deg = 10.0;
  double camera_elevation_max_deg = 40.0;
  double camera_azimuth_max_deg = 35.0;  // symmetric about the front (+x)
  // Spread of part sizes, placements and articulations: 1 draws from the
  // full ranges, 0 always uses the range midpoints.
  double layout_jitter = 1.0;
  bool partial_view = false;
  int view_cells_x = 160;
  int view_cells_y = 120;
  double view_fov_x_deg = 60.0;
  double view_fov_y_deg = 45.0;

  /// Throws Error(InvalidArgument) on out-of-range fields.
  void validate() const;
};

/// Deterministic per (seed, ranges in cfg). Parts are laid out on the body:
/// drawers inside the front face, handles on the front face, a lid on top.
ArticulatedObjectSpec generate_object(std::uint64_t seed, const GenConfig& cfg = {});

struct InstanceRecord {
  int semantic_class = 0;
  Sim3Transform pose;     // NPCS -> camera
  Vec3 size = Vec3::Zero();  // meters
  JointAxis axis;         // camera frame
};

struct Scene {
  PointCloud points;                              // camera frame, meters
  std::vector<int> gt_semantic;                   // 0 = body
  std::vector<int> gt_instance;                   // -1 = body
  std::vector<std::optional<NpcsCoord>> gt_npcs;  // empty for body points
  std::vector<InstanceRecord> instances;
  Sim3Transform camera_pose;                      // camera -> world (SE(3))

  std::size_t size() const { return points.size(); }
  /// Throws Error(DegenerateSpec) when array lengths disagree or an
  /// instance id is out of range.
  void validate() const;
};

/// Renders one or more objects (object i is placed `i` body-widths along +y)
/// into a camera-frame point cloud with full ground truth.
Scene render_scene(std::span<const ArticulatedObjectSpec> objects, const GenConfig& cfg);
Scene render_scene(const ArticulatedObjectSpec& spec, const GenConfig& cfg);

/// Scene `index` of the stream defined by cfg.rng_seed.
Scene generate_scene(const GenConfig& cfg, std::uint64_t index);

/// instance centroid - p for part points, zero for body points.
PointCloud gt_offsets(const Scene& scene);

/// Per-instance centroids (mean of member points), indexed by instance id.
PointCloud instance_centroids(const Scene& scene);

/// Rest and articulated body-frame poses of a part box center.
Sim3Transform articulated_pose(const PartSpec& part);

/// Indices of the points kept by an angular z-buffer seen from the origin
/// looking down +z (nearest point per cell). Indices are ascending.
std::vector<std::size_t> zbuffer_cull(std::span<const Vec3> camera_points, const GenConfig& cfg);

}  // namespace yoeo
