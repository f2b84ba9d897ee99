#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace yoeo {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using PointCloud = std::vector<Vec3>;

/// Proper rotation matrix (orthonormal, det = +1).
///
/// The only way to obtain a Rotation3 from arbitrary data is from_matrix(),
/// which checks the invariants; the named constructors build valid rotations
/// by construction.
class Rotation3 {
 public:
  static constexpr double kTolerance = 1e-9;

  Rotation3() : m_(Mat3::Identity()) {}

  /// Throws Error(InvalidArgument) if `m` is not in SO(3) within `tol`.
  static Rotation3 from_matrix(const Mat3& m, double tol = kTolerance);
  /// Projects an approximately orthonormal matrix onto SO(3) via SVD.
  static Rotation3 nearest(const Mat3& m);
  /// Right-handed rotation of `radians` about `axis` (normalized internally).
  static Rotation3 about_axis(const Vec3& axis, double radians);
  static Rotation3 rot_x(double radians) { return about_axis(Vec3::UnitX(), radians); }
  static Rotation3 rot_y(double radians) { return about_axis(Vec3::UnitY(), radians); }
  static Rotation3 rot_z(double radians) { return about_axis(Vec3::UnitZ(), radians); }

  const Mat3& matrix() const { return m_; }
  Rotation3 transpose() const { return Rotation3(m_.transpose()); }

  Rotation3 operator*(const Rotation3& other) const { return Rotation3(m_ * other.m_); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

 private:
  explicit Rotation3(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

/// Similarity transform p -> scale * R * p + t.
struct Sim3Transform {
  double scale = 1.0;
  Rotation3 rotation;
  Vec3 translation = Vec3::Zero();

  Sim3Transform() = default;
  /// Throws Error(InvalidArgument) unless scale is finite and > 0.
  Sim3Transform(double s, const Rotation3& r, const Vec3& t);

  static Sim3Transform identity() { return {}; }
};

Vec3 apply(const Sim3Transform& t, const Vec3& p);
/// Returns a ∘ b, i.e. apply(compose(a, b), p) == apply(a, apply(b, p)).
Sim3Transform compose(const Sim3Transform& a, const Sim3Transform& b);
Sim3Transform inverse(const Sim3Transform& t);
PointCloud apply(const Sim3Transform& t, std::span<const Vec3> points);

/// Geodesic angle between two rotations in degrees, in [0, 180].
double rotation_geodesic_deg(const Rotation3& a, const Rotation3& b);

/// Least-squares similarity (or rigid, when with_scale is false) alignment
/// dst ≈ s R src + t with the determinant-sign correction, so the result is
/// never a reflection.
///
/// Throws Error(DegenerateInput) for fewer than 3 pairs, mismatched sizes or
/// collinear/coincident source points.
Sim3Transform umeyama_align(std::span<const Vec3> src, std::span<const Vec3> dst,
                            bool with_scale = true);

/// Sum of squared residuals ‖dst_i − T(src_i)‖².
double alignment_residual(const Sim3Transform& t, std::span<const Vec3> src,
                          std::span<const Vec3> dst);

struct RansacParams {
  int max_iterations = 128;
  double inlier_threshold = 0.01;  // meters
  int min_sample_size = 4;
  std::uint64_t rng_seed = 0;
  double min_inlier_fraction = 0.25;
  bool with_scale = true;

  /// Throws Error(InvalidArgument) on out-of-range fields.
  void validate() const;
};

struct RansacResult {
  Sim3Transform transform;
  std::vector<bool> inlier_mask;
  std::size_t inlier_count = 0;
};

/// RANSAC over minimal Umeyama fits followed by a single refit on the best
/// consensus set. Collinear samples are redrawn without consuming an
/// iteration (bounded by 10 * max_iterations draws in total).
///
/// Throws Error(DegenerateInput) when there are fewer pairs than
/// min_sample_size or no non-degenerate sample can be drawn, and
/// Error(NoConsensus) when the final inlier fraction is below
/// min_inlier_fraction.
RansacResult ransac_align(std::span<const Vec3> src, std::span<const Vec3> dst,
                          const RansacParams& params);

/// Box with center, orientation (box axes are the rotation's columns) and
/// full edge lengths.
struct OrientedBox {
  Vec3 center = Vec3::Zero();
  Rotation3 rotation;
  Vec3 extents = Vec3::Ones();

  bool contains(const Vec3& p) const;
  double volume() const { return extents.prod(); }
};

/// Separating-axis test; boxes that only touch do not overlap.
bool boxes_overlap(const OrientedBox& a, const OrientedBox& b, double eps = 1e-9);

}  // namespace yoeo
