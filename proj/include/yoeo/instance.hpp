#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "yoeo/geometry.hpp"
#include "yoeo/npcs.hpp"

namespace yoeo {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kNpcsLogits = 3 * kNumBins;

/// Network output for a cloud of N points.
struct PerPointPrediction {
  RowMatrix semantic_probs;  // N x C, rows on the simplex
  RowMatrix offsets;         // N x 3, meters
  RowMatrix npcs_logits;     // N x 300, axis a occupies columns [100a, 100a + 100)

  PerPointPrediction() = default;
  PerPointPrediction(std::size_t n, int num_classes);

  std::size_t size() const { return static_cast<std::size_t>(semantic_probs.rows()); }
  int num_classes() const { return static_cast<int>(semantic_probs.cols()); }
  /// argmax of the semantic distribution, ties to the lower class id.
  int label(std::size_t i) const;
  Vec3 offset(std::size_t i) const { return offsets.row(static_cast<Eigen::Index>(i)).transpose(); }

  /// Throws Error(InvalidArgument) on shape mismatch, non-finite values or
  /// rows that do not sum to 1 within 1e-6.
  void validate() const;
};

struct ClusterParams {
  double bandwidth = 0.05;  // meters
  int min_points = 30;
  int background_class = 0;

  void validate() const;
};

struct PartInstance {
  int semantic_class = 0;
  std::vector<std::size_t> point_indices;  // ascending
  std::vector<NpcsCoord> npcs_coords;      // parallel to point_indices
  Vec3 voted_centroid = Vec3::Zero();
};

/// vote_i = p_i + offset_i.
PointCloud vote_centroids(std::span<const Vec3> points, const PerPointPrediction& pred);

/// Single-linkage clustering of the votes within each predicted semantic
/// class (background excluded): two points share an instance iff a chain of
/// votes with consecutive distances <= bandwidth connects them. Clusters
/// smaller than min_points are dropped. Output ordered by class id, then by
/// the smallest member index.
///
/// Throws Error(EmptyScene) when no instance survives.
std::vector<PartInstance> cluster_instances(std::span<const Vec3> points,
                                            const PerPointPrediction& pred,
                                            const ClusterParams& params);

/// Per member point: per-axis argmax bin (ties to the lower bin) decoded to
/// its center.
std::vector<NpcsCoord> extract_npcs(const PartInstance& instance, const PerPointPrediction& pred);

}  // namespace yoeo
