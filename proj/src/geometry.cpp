#include "yoeo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "yoeo/error.hpp"

namespace yoeo {

Rotation3 Rotation3::from_matrix(const Mat3& m, double tol) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "rotation matrix has non-finite entries");
  }
  const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = m.determinant();
  if (ortho > tol || std::abs(det - 1.0) > tol) {
    std::ostringstream os;
    os << "matrix is not a proper rotation (orthonormality error " << ortho
       << ", det " << det << ")";
    throw Error(ErrorCode::InvalidArgument, os.str());
  }
  return Rotation3(m);
}

Rotation3 Rotation3::nearest(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 s = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) s(2, 2) = -1.0;
  return Rotation3(svd.matrixU() * s * svd.matrixV().transpose());
}

Rotation3 Rotation3::about_axis(const Vec3& axis, double radians) {
  return Rotation3(Eigen::AngleAxisd(radians, axis.normalized()).toRotationMatrix());
}

Sim3Transform::Sim3Transform(double s, const Rotation3& r, const Vec3& t)
    : scale(s), rotation(r), translation(t) {
  if (!(std::isfinite(s) && s > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "similarity scale must be finite and > 0");
  }
}

Vec3 apply(const Sim3Transform& t, const Vec3& p) {
  return t.scale * (t.rotation.matrix() * p) + t.translation;
}

PointCloud apply(const Sim3Transform& t, std::span<const Vec3> points) {
  PointCloud out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(apply(t, p));
  return out;
}

Sim3Transform compose(const Sim3Transform& a, const Sim3Transform& b) {
  return Sim3Transform(a.scale * b.scale, a.rotation * b.rotation,
                       a.scale * (a.rotation * b.translation) + a.translation);
}

Sim3Transform inverse(const Sim3Transform& t) {
  const Rotation3 rt = t.rotation.transpose();
  const double inv_s = 1.0 / t.scale;
  return Sim3Transform(inv_s, rt, -inv_s * (rt * t.translation));
}

double rotation_geodesic_deg(const Rotation3& a, const Rotation3& b) {
  const double c = ((a.matrix().transpose() * b.matrix()).trace() - 1.0) / 2.0;
  const double angle = std::acos(std::clamp(c, -1.0, 1.0));
  return std::clamp(angle * 180.0 / std::numbers::pi, 0.0, 180.0);
}

Sim3Transform umeyama_align(std::span<const Vec3> src, std::span<const Vec3> dst,
                            bool with_scale) {
  if (src.size() != dst.size()) {
    throw Error(ErrorCode::DegenerateInput, "umeyama_align: src and dst differ in length");
  }
  const std::size_t n = src.size();
  if (n < 3) {
    throw Error(ErrorCode::DegenerateInput, "umeyama_align: need at least 3 point pairs");
  }

  Vec3 mean_src = Vec3::Zero();
  Vec3 mean_dst = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mean_src += src[i];
    mean_dst += dst[i];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  mean_src *= inv_n;
  mean_dst *= inv_n;

  Mat3 cross = Mat3::Zero();
  Mat3 src_cov = Mat3::Zero();
  double src_var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 s = src[i] - mean_src;
    const Vec3 d = dst[i] - mean_dst;
    cross.noalias() += d * s.transpose();
    src_cov.noalias() += s * s.transpose();
    src_var += s.squaredNorm();
  }
  cross *= inv_n;
  src_cov *= inv_n;
  src_var *= inv_n;

  // Rank of the centered source must be at least 2 (non-collinear).
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(src_cov, Eigen::EigenvaluesOnly);
  const Vec3 ev = eig.eigenvalues();  // ascending
  if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2)) {
    throw Error(ErrorCode::DegenerateInput,
                "umeyama_align: source points are collinear or coincident");
  }

  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Vec3 sign = Vec3::Ones();
  if (u.determinant() * v.determinant() < 0.0) sign(2) = -1.0;

  const Mat3 r = u * sign.asDiagonal() * v.transpose();
  double scale = 1.0;
  if (with_scale) {
    scale = svd.singularValues().dot(sign) / src_var;
    if (!(scale > 0.0)) {
      throw Error(ErrorCode::DegenerateInput, "umeyama_align: non-positive scale estimate");
    }
  }
  const Rotation3 rot = Rotation3::from_matrix(r);
  const Vec3 t = mean_dst - scale * (rot * mean_src);
  return Sim3Transform(scale, rot, t);
}

double alignment_residual(const Sim3Transform& t, std::span<const Vec3> src,
                          std::span<const Vec3> dst) {
  double sum = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) sum += (dst[i] - apply(t, src[i])).squaredNorm();
  return sum;
}

void RansacParams::validate() const {
  if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
  if (!(inlier_threshold > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "inlier_threshold must be > 0");
  }
  if (min_sample_size < 3) throw Error(ErrorCode::InvalidArgument, "min_sample_size must be >= 3");
  if (!(min_inlier_fraction > 0.0 && min_inlier_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "min_inlier_fraction must be in (0, 1]");
  }
}

namespace {

std::size_t count_inliers(const Sim3Transform& t, std::span<const Vec3> src,
                          std::span<const Vec3> dst, double thresh_sq,
                          std::vector<bool>* mask) {
  const Mat3 sr = t.scale * t.rotation.matrix();
  std::size_t count = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const bool in = (dst[i] - (sr * src[i] + t.translation)).squaredNorm() < thresh_sq;
    if (mask) (*mask)[i] = in;
    count += in ? 1 : 0;
  }
  return count;
}

}  // namespace

RansacResult ransac_align(std::span<const Vec3> src, std::span<const Vec3> dst,
                          const RansacParams& params) {
  params.validate();
  if (src.size() != dst.size()) {
    throw Error(ErrorCode::DegenerateInput, "ransac_align: src and dst differ in length");
  }
  const std::size_t n = src.size();
  const auto k = static_cast<std::size_t>(params.min_sample_size);
  if (n < k) {
    std::ostringstream os;
    os << "ransac_align: " << n << " pairs is fewer than min_sample_size " << k;
    throw Error(ErrorCode::DegenerateInput, os.str());
  }

  const double thresh_sq = params.inlier_threshold * params.inlier_threshold;
  std::mt19937_64 rng(params.rng_seed);
  std::vector<std::size_t> sample(k);
  std::vector<Vec3> sample_src(k), sample_dst(k);

  bool have_model = false;
  Sim3Transform best;
  std::size_t best_count = 0;

  const long max_draws = 10L * params.max_iterations;
  int iterations = 0;
  for (long draw = 0; draw < max_draws && iterations < params.max_iterations; ++draw) {
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t idx;
      do {
        idx = static_cast<std::size_t>(rng() % n);
      } while (std::find(sample.begin(), sample.begin() + j, idx) != sample.begin() + j);
      sample[j] = idx;
      sample_src[j] = src[idx];
      sample_dst[j] = dst[idx];
    }
    Sim3Transform model;
    try {
      model = umeyama_align(sample_src, sample_dst, params.with_scale);
    } catch (const Error&) {
      continue;  // degenerate sample, not counted
    }
    ++iterations;
    const std::size_t count = count_inliers(model, src, dst, thresh_sq, nullptr);
    if (!have_model || count > best_count) {
      best = model;
      best_count = count;
      have_model = true;
    }
  }
  if (!have_model) {
    throw Error(ErrorCode::DegenerateInput, "ransac_align: every drawn sample was degenerate");
  }

  RansacResult result;
  result.inlier_mask.assign(n, false);
  count_inliers(best, src, dst, thresh_sq, &result.inlier_mask);
  std::vector<Vec3> in_src, in_dst;
  in_src.reserve(best_count);
  in_dst.reserve(best_count);
  for (std::size_t i = 0; i < n; ++i) {
    if (result.inlier_mask[i]) {
      in_src.push_back(src[i]);
      in_dst.push_back(dst[i]);
    }
  }
  result.transform = best;
  if (in_src.size() >= 3) {
    try {
      result.transform = umeyama_align(in_src, in_dst, params.with_scale);
    } catch (const Error&) {
      // keep the minimal-sample model
    }
  }
  result.inlier_count = count_inliers(result.transform, src, dst, thresh_sq, &result.inlier_mask);

  const double fraction = static_cast<double>(result.inlier_count) / static_cast<double>(n);
  if (fraction < params.min_inlier_fraction) {
    std::ostringstream os;
    os << "ransac_align: best inlier fraction " << fraction << " below "
       << params.min_inlier_fraction;
    throw Error(ErrorCode::NoConsensus, os.str());
  }
  return result;
}

}  // namespace yoeo

namespace yoeo {

bool OrientedBox::contains(const Vec3& p) const {
  const Vec3 local = rotation.matrix().transpose() * (p - center);
  return (local.cwiseAbs().array() <= 0.5 * extents.array()).all();
}

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b, double eps) {
  const Mat3& ra = a.rotation.matrix();
  const Mat3& rb = b.rotation.matrix();
  const Vec3 ha = 0.5 * a.extents;
  const Vec3 hb = 0.5 * b.extents;
  const Vec3 d = b.center - a.center;

  auto separated = [&](const Vec3& axis) {
    const double len = axis.norm();
    if (len < 1e-12) return false;  // parallel edge pair, covered by face axes
    const Vec3 n = axis / len;
    const double pa = ha(0) * std::abs(n.dot(ra.col(0))) + ha(1) * std::abs(n.dot(ra.col(1))) +
                      ha(2) * std::abs(n.dot(ra.col(2)));
    const double pb = hb(0) * std::abs(n.dot(rb.col(0))) + hb(1) * std::abs(n.dot(rb.col(1))) +
                      hb(2) * std::abs(n.dot(rb.col(2)));
    return std::abs(d.dot(n)) >= pa + pb - eps;
  };

  for (int i = 0; i < 3; ++i) {
    if (separated(ra.col(i)) || separated(rb.col(i))) return false;
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (separated(ra.col(i).cross(rb.col(j)))) return false;
    }
  }
  return true;
}

}  // namespace yoeo
