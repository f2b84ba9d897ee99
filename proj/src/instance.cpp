#include "yoeo/instance.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "yoeo/error.hpp"

namespace yoeo {

namespace {

template <typename Row>
Eigen::Index argmax_first(const Row& row) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < row.size(); ++k) {
    if (row(k) > row(best)) best = k;
  }
  return best;
}

}  // namespace

PerPointPrediction::PerPointPrediction(std::size_t n, int num_classes)
    : semantic_probs(RowMatrix::Constant(static_cast<Eigen::Index>(n), num_classes,
                                         1.0 / num_classes)),
      offsets(RowMatrix::Zero(static_cast<Eigen::Index>(n), 3)),
      npcs_logits(RowMatrix::Zero(static_cast<Eigen::Index>(n), kNpcsLogits)) {}

int PerPointPrediction::label(std::size_t i) const {
  return static_cast<int>(argmax_first(semantic_probs.row(static_cast<Eigen::Index>(i))));
}

void PerPointPrediction::validate() const {
  const Eigen::Index n = semantic_probs.rows();
  if (offsets.rows() != n || offsets.cols() != 3 || npcs_logits.rows() != n ||
      npcs_logits.cols() != kNpcsLogits || semantic_probs.cols() < 1) {
    throw Error(ErrorCode::InvalidArgument, "prediction arrays have inconsistent shapes");
  }
  if (!semantic_probs.allFinite() || !offsets.allFinite() || !npcs_logits.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "prediction contains non-finite values");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(semantic_probs.row(i).sum() - 1.0) > 1e-6 ||
        (semantic_probs.row(i).array() < 0.0).any()) {
      std::ostringstream os;
      os << "semantic_probs row " << i << " is not a distribution";
      throw Error(ErrorCode::InvalidArgument, os.str());
    }
  }
}

void ClusterParams::validate() const {
  if (!(bandwidth > 0.0)) throw Error(ErrorCode::InvalidArgument, "bandwidth must be > 0");
  if (min_points < 4) throw Error(ErrorCode::InvalidArgument, "min_points must be >= 4");
}

PointCloud vote_centroids(std::span<const Vec3> points, const PerPointPrediction& pred) {
  if (points.size() != pred.size()) {
    throw Error(ErrorCode::InvalidArgument, "vote_centroids: points and prediction differ in length");
  }
  PointCloud votes(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) votes[i] = points[i] + pred.offset(i);
  return votes;
}

namespace {

struct CellKey {
  long x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::size_t h = static_cast<std::size_t>(k.x) * 73856093u;
    h ^= static_cast<std::size_t>(k.y) * 19349663u;
    h ^= static_cast<std::size_t>(k.z) * 83492791u;
    return h;
  }
};

// Union-find whose roots are always the smallest member index.
class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

std::vector<PartInstance> cluster_instances(std::span<const Vec3> points,
                                            const PerPointPrediction& pred,
                                            const ClusterParams& params) {
  params.validate();
  const PointCloud votes = vote_centroids(points, pred);
  const double bw = params.bandwidth;
  const double bw_sq = bw * bw;

  // Candidate points grouped by predicted class, in index order.
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const int c = pred.label(i);
    if (c != params.background_class) by_class[c].push_back(i);
  }

  std::vector<PartInstance> instances;
  for (const auto& [cls, members] : by_class) {
    std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> grid;
    grid.reserve(members.size());
    auto key_of = [bw](const Vec3& v) {
      return CellKey{static_cast<long>(std::floor(v.x() / bw)), static_cast<long>(std::floor(v.y() / bw)),
                     static_cast<long>(std::floor(v.z() / bw))};
    };
    for (std::size_t local = 0; local < members.size(); ++local) {
      grid[key_of(votes[members[local]])].push_back(local);
    }

    DisjointSets sets(members.size());
    for (std::size_t local = 0; local < members.size(); ++local) {
      const Vec3& v = votes[members[local]];
      const CellKey k = key_of(v);
      for (long dx = -1; dx <= 1; ++dx) {
        for (long dy = -1; dy <= 1; ++dy) {
          for (long dz = -1; dz <= 1; ++dz) {
            const auto it = grid.find(CellKey{k.x + dx, k.y + dy, k.z + dz});
            if (it == grid.end()) continue;
            for (std::size_t other : it->second) {
              if (other <= local) continue;
              if ((votes[members[other]] - v).squaredNorm() <= bw_sq) sets.unite(local, other);
            }
          }
        }
      }
    }

    // Roots are the smallest local index, so iterating in order yields
    // clusters ordered by their smallest member.
    std::map<std::size_t, std::vector<std::size_t>> clusters;
    for (std::size_t local = 0; local < members.size(); ++local) {
      clusters[sets.find(local)].push_back(members[local]);
    }
    for (auto& [root, idx] : clusters) {
      if (idx.size() < static_cast<std::size_t>(params.min_points)) continue;
      PartInstance inst;
      inst.semantic_class = cls;
      inst.point_indices = std::move(idx);
      for (std::size_t i : inst.point_indices) inst.voted_centroid += votes[i];
      inst.voted_centroid /= static_cast<double>(inst.point_indices.size());
      inst.npcs_coords = extract_npcs(inst, pred);
      instances.push_back(std::move(inst));
    }
  }
  if (instances.empty()) {
    throw Error(ErrorCode::EmptyScene, "cluster_instances: no part instance survived");
  }
  return instances;
}

std::vector<NpcsCoord> extract_npcs(const PartInstance& instance, const PerPointPrediction& pred) {
  std::vector<NpcsCoord> out;
  out.reserve(instance.point_indices.size());
  for (std::size_t i : instance.point_indices) {
    const auto row = pred.npcs_logits.row(static_cast<Eigen::Index>(i));
    BinnedCoord b;
    for (int a = 0; a < 3; ++a) {
      b.index[a] = static_cast<int>(argmax_first(row.segment(a * kNumBins, kNumBins)));
    }
    out.push_back(decode_bins(b));
  }
  return out;
}

}  // namespace yoeo
