#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "yoeo/geometry.hpp"

namespace yoeo {

inline constexpr int kNumBins = 100;

/// Point in the normalized part coordinate space; every component in [0, 1].
using NpcsCoord = Vec3;

struct BinnedCoord {
  std::array<int, 3> index{};
  bool operator==(const BinnedCoord&) const = default;
};

enum class JointKind { Revolute, Prismatic };

struct JointAxis {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();
  JointKind kind = JointKind::Revolute;
};

struct PartCanonicalization {
  Vec3 canonical_extents = Vec3::Ones();  // box extents divided by its diagonal
  double norm_factor = 1.0;               // meters per canonical unit
};

/// floor(c * 100) per axis; inputs are clamped into [0, 1] first and 1.0
/// lands in the last bin.
BinnedCoord encode_bins(const NpcsCoord& c);
/// Bin centers: (index + 0.5) / 100.
NpcsCoord decode_bins(const BinnedCoord& b);

struct CanonicalPart {
  std::vector<NpcsCoord> coords;
  PartCanonicalization canonicalization;
};

/// Maps metric points on a box-shaped part into its NPCS frame. `part_pose`
/// gives the part's rest frame in camera coordinates (rotation plus box
/// center; its scale is ignored).
///
/// Throws Error(DegenerateExtents) when any extent is <= 0.
CanonicalPart canonicalize_part(std::span<const Vec3> points, const Sim3Transform& part_pose,
                                const Vec3& part_extents);

/// NPCS -> camera similarity for a part with the given rest frame and
/// extents: scale = box diagonal, the NPCS center (0.5, 0.5, 0.5) maps to
/// the box center.
Sim3Transform npcs_to_camera(const Sim3Transform& part_pose, const Vec3& part_extents);

struct PoseResult {
  Sim3Transform transform;  // NPCS -> camera
  Vec3 size = Vec3::Zero();  // meters
  Vec3 canonical_extents = Vec3::Zero();
  std::size_t inliers = 0;
  std::optional<JointAxis> axis;  // camera frame, filled by the pipeline
};

/// Robust NPCS -> metric alignment. Size is scale times the canonical
/// extents: `extents_hint` when given, otherwise the bounding box of the
/// inlier NPCS coordinates.
PoseResult recover_pose(std::span<const NpcsCoord> npcs, std::span<const Vec3> observed,
                        const std::optional<Vec3>& extents_hint, const RansacParams& params);

JointAxis transform_axis(const JointAxis& axis, const Sim3Transform& t);

}  // namespace yoeo
