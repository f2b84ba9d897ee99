#include "yoeo/npcs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "yoeo/error.hpp"

namespace yoeo {

BinnedCoord encode_bins(const NpcsCoord& c) {
  BinnedCoord b;
  for (int a = 0; a < 3; ++a) {
    const double v = std::isnan(c(a)) ? 0.0 : std::clamp(c(a), 0.0, 1.0);
    b.index[a] = std::min(static_cast<int>(std::floor(v * kNumBins)), kNumBins - 1);
  }
  return b;
}

NpcsCoord decode_bins(const BinnedCoord& b) {
  NpcsCoord c;
  for (int a = 0; a < 3; ++a) c(a) = (b.index[a] + 0.5) / kNumBins;
  return c;
}

Sim3Transform npcs_to_camera(const Sim3Transform& part_pose, const Vec3& part_extents) {
  const double diag = part_extents.norm();
  const Vec3 center_offset = diag * (part_pose.rotation * Vec3::Constant(0.5));
  return Sim3Transform(diag, part_pose.rotation, part_pose.translation - center_offset);
}

CanonicalPart canonicalize_part(std::span<const Vec3> points, const Sim3Transform& part_pose,
                                const Vec3& part_extents) {
  if (!(part_extents.array() > 0.0).all()) {
    throw Error(ErrorCode::DegenerateExtents, "canonicalize_part: every extent must be > 0");
  }
  const double diag = part_extents.norm();
  const Mat3 rt = part_pose.rotation.matrix().transpose();

  CanonicalPart out;
  out.canonicalization.canonical_extents = part_extents / diag;
  out.canonicalization.norm_factor = diag;
  out.coords.reserve(points.size());
  for (const auto& p : points) {
    const Vec3 local = rt * (p - part_pose.translation);
    out.coords.push_back((local / diag + Vec3::Constant(0.5)).cwiseMax(0.0).cwiseMin(1.0));
  }
  return out;
}

PoseResult recover_pose(std::span<const NpcsCoord> npcs, std::span<const Vec3> observed,
                        const std::optional<Vec3>& extents_hint, const RansacParams& params) {
  const RansacResult fit = ransac_align(npcs, observed, params);

  PoseResult result;
  result.transform = fit.transform;
  result.inliers = fit.inlier_count;
  if (extents_hint) {
    result.canonical_extents = *extents_hint;
  } else {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (std::size_t i = 0; i < npcs.size(); ++i) {
      if (!fit.inlier_mask[i]) continue;
      lo = lo.cwiseMin(npcs[i]);
      hi = hi.cwiseMax(npcs[i]);
    }
    result.canonical_extents = hi - lo;
  }
  result.size = fit.transform.scale * result.canonical_extents;
  return result;
}

JointAxis transform_axis(const JointAxis& axis, const Sim3Transform& t) {
  JointAxis out;
  out.origin = apply(t, axis.origin);
  out.direction = (t.rotation * axis.direction).normalized();
  out.kind = axis.kind;
  return out;
}

}  // namespace yoeo
