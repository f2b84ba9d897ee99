#include "yoeo/pipeline.hpp"

#include "yoeo/error.hpp"
#include "yoeo/random.hpp"
#include "yoeo/synthetic.hpp"

namespace yoeo {

std::vector<PartDetection> estimate_parts(std::span<const Vec3> points,
                                          const PerPointPrediction& pred,
                                          const PipelineParams& params) {
  std::vector<PartInstance> instances;
  try {
    instances = cluster_instances(points, pred, params.cluster);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::EmptyScene) return {};
    throw;
  }

  std::vector<PartDetection> out;
  for (std::size_t k = 0; k < instances.size(); ++k) {
    PartInstance& inst = instances[k];
    PointCloud observed;
    observed.reserve(inst.point_indices.size());
    for (std::size_t i : inst.point_indices) observed.push_back(points[i]);

    RansacParams ransac = params.ransac;
    ransac.rng_seed = derive_seed(params.ransac.rng_seed, k);
    PartDetection det;
    try {
      det.pose = recover_pose(inst.npcs_coords, observed, std::nullopt, ransac);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NoConsensus || e.code() == ErrorCode::DegenerateInput) continue;
      throw;
    }
    if (inst.semantic_class >= 1 && inst.semantic_class < kNumClasses) {
      const auto kind = static_cast<PartKind>(inst.semantic_class);
      det.pose.axis = transform_axis(canonical_joint(kind, det.pose.canonical_extents), det.pose.transform);
    }
    det.instance = std::move(inst);
    out.push_back(std::move(det));
  }
  return out;
}

}  // namespace yoeo
