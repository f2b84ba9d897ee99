#pragma once

#include <span>
#include <vector>

#include "yoeo/instance.hpp"
#include "yoeo/npcs.hpp"

namespace yoeo {

struct PipelineParams {
  ClusterParams cluster;
  RansacParams ransac{.max_iterations = 128,
                      .inlier_threshold = 0.02,
                      .min_sample_size = 4,
                      .rng_seed = 0,
                      .min_inlier_fraction = 0.25,
                      .with_scale = true};
};

struct PartDetection {
  PartInstance instance;
  PoseResult pose;
};

/// Post-network stages: vote, cluster, read NPCS, robust SIM(3) fit and
/// joint-axis transfer. Instances whose pose fit fails are dropped; a scene
/// without surviving instances yields an empty list. Instance k uses the
/// RANSAC stream derive_seed(ransac.rng_seed, k).
std::vector<PartDetection> estimate_parts(std::span<const Vec3> points,
                                          const PerPointPrediction& pred,
                                          const PipelineParams& params);

}  // namespace yoeo
