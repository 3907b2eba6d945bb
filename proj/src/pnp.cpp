#include "descsyn/pnp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

#include "descsyn/rng.hpp"

namespace descsyn {

namespace {

constexpr int kMinimalSampleSize = 6;
constexpr double kRankTol = 1e-9;  // relative singular-value cutoff

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

// Rodrigues' formula.
Eigen::Matrix3d axis_angle_to_rot(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  if (theta < 1e-14) return Eigen::Matrix3d::Identity();
  const Eigen::Matrix3d k = skew(w / theta);
  return Eigen::Matrix3d::Identity() + std::sin(theta) * k +
         (1 - std::cos(theta)) * k * k;
}

// Nearest rotation with det +1.
Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) *= -1;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

// (R, t) candidate from a 3x4 DLT solution, up to the overall sign of p.
SE3Pose pose_from_projection(const Eigen::Matrix<double, 3, 4>& p) {
  const Eigen::Matrix3d m = p.leftCols<3>();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double scale = svd.singularValues().mean();
  SE3Pose pose;
  pose.rotation = orthonormalize(m);
  pose.translation = p.col(3) / scale;
  return pose;
}

int count_front(const SE3Pose& pose, const std::vector<Correspondence>& corrs) {
  int n = 0;
  for (const auto& c : corrs) {
    if (pose.to_camera(c.point).z() > 0) ++n;
  }
  return n;
}

double reprojection_error_px(const SE3Pose& pose, const Correspondence& corr,
                             const PinholeIntrinsics& intr) {
  const Eigen::Vector3d pc = pose.to_camera(corr.point);
  if (!(pc.z() > 0)) return std::numeric_limits<double>::infinity();
  const Eigen::Vector2d px(intr.fx * pc.x() / pc.z() + intr.cx,
                           intr.fy * pc.y() / pc.z() + intr.cy);
  return (px - corr.pixel).norm();
}

}  // namespace

void RansacConfig::validate() const {
  if (max_iterations < 1) {
    throw std::invalid_argument("ransac config: max_iterations must be >= 1");
  }
  if (!(inlier_threshold > 0)) {
    throw std::invalid_argument("ransac config: inlier_threshold must be > 0");
  }
  if (!(confidence > 0 && confidence < 1)) {
    throw std::invalid_argument("ransac config: confidence in (0, 1)");
  }
}

SE3Pose solve_pnp_dlt(const std::vector<Correspondence>& corrs,
                      const PinholeIntrinsics& intr) {
  if (corrs.size() < kMinimalSampleSize) {
    throw InsufficientCorrespondences(
        "solve_pnp_dlt: at least 6 correspondences required");
  }
  const auto n = static_cast<Eigen::Index>(corrs.size());

  // Condition the 3D points: centre and scale to unit RMS radius.
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& c : corrs) centroid += c.point;
  centroid /= static_cast<double>(n);
  double rms = 0;
  for (const auto& c : corrs) rms += (c.point - centroid).squaredNorm();
  rms = std::sqrt(rms / static_cast<double>(n));
  const double s = rms > 1e-12 ? 1.0 / rms : 1.0;

  Eigen::MatrixXd a(2 * n, 12);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d x = s * (corrs[i].point - centroid);
    const double u = (corrs[i].pixel.x() - intr.cx) / intr.fx;
    const double v = (corrs[i].pixel.y() - intr.cy) / intr.fy;
    a.row(2 * i) << x.x(), x.y(), x.z(), 1, 0, 0, 0, 0, -u * x.x(), -u * x.y(),
        -u * x.z(), -u;
    a.row(2 * i + 1) << 0, 0, 0, 0, x.x(), x.y(), x.z(), 1, -v * x.x(),
        -v * x.y(), -v * x.z(), -v;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  // A one-dimensional null space needs the 11 leading singular values to be
  // genuinely nonzero; collinear or otherwise degenerate configurations are
  // reported apart from the too-few-points case.
  if (sv[10] < kRankTol * sv[0]) {
    throw DegenerateConfiguration("solve_pnp_dlt: degenerate configuration");
  }

  Eigen::Matrix<double, 3, 4> p_norm;
  const Eigen::VectorXd h = svd.matrixV().col(11);
  p_norm.row(0) = h.segment<4>(0).transpose();
  p_norm.row(1) = h.segment<4>(4).transpose();
  p_norm.row(2) = h.segment<4>(8).transpose();

  // Undo the 3D conditioning: X' = s (X - centroid).
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  t.topLeftCorner<3, 3>() *= s;
  t.topRightCorner<3, 1>() = -s * centroid;
  const Eigen::Matrix<double, 3, 4> p = p_norm * t;

  const SE3Pose pos = pose_from_projection(p);
  const SE3Pose neg = pose_from_projection(-p);
  return count_front(pos, corrs) >= count_front(neg, corrs) ? pos : neg;
}

double reprojection_error_sq(const SE3Pose& pose,
                             const std::vector<Correspondence>& corrs,
                             const PinholeIntrinsics& intr) {
  double sum = 0;
  for (const auto& c : corrs) {
    const double e = reprojection_error_px(pose, c, intr);
    if (!std::isfinite(e)) return std::numeric_limits<double>::infinity();
    sum += e * e;
  }
  return sum;
}

SE3Pose refine_gauss_newton(const SE3Pose& pose,
                            const std::vector<Correspondence>& corrs,
                            const PinholeIntrinsics& intr, int iterations) {
  SE3Pose current = pose;
  double current_err = reprojection_error_sq(current, corrs, intr);

  for (int it = 0; it < iterations; ++it) {
    Eigen::Matrix<double, 6, 6> jtj = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> jtr = Eigen::Matrix<double, 6, 1>::Zero();
    for (const auto& c : corrs) {
      const Eigen::Vector3d pc = current.to_camera(c.point);
      if (!(pc.z() > 1e-12)) continue;
      const double iz = 1.0 / pc.z();
      const Eigen::Vector2d res(
          intr.fx * pc.x() * iz + intr.cx - c.pixel.x(),
          intr.fy * pc.y() * iz + intr.cy - c.pixel.y());
      Eigen::Matrix<double, 2, 3> d_px;  // d(pixel)/d(camera point)
      d_px << intr.fx * iz, 0, -intr.fx * pc.x() * iz * iz, 0, intr.fy * iz,
          -intr.fy * pc.y() * iz * iz;
      // Update chart: R' = exp(w^) R, t' = t + tau, so the camera point
      // moves as d(pc)/dw = -[R X]^ and d(pc)/dtau = I.
      Eigen::Matrix<double, 2, 6> j;
      j.leftCols<3>() = -d_px * skew(current.rotation * c.point);
      j.rightCols<3>() = d_px;
      jtj.noalias() += j.transpose() * j;
      jtr.noalias() += j.transpose() * res;
    }

    Eigen::Matrix<double, 6, 1> delta = jtj.ldlt().solve(-jtr);
    if (!delta.allFinite()) break;

    bool accepted = false;
    for (int halving = 0; halving < 16; ++halving) {
      SE3Pose candidate;
      candidate.rotation =
          orthonormalize(axis_angle_to_rot(delta.head<3>()) * current.rotation);
      candidate.translation = current.translation + delta.tail<3>();
      const double err = reprojection_error_sq(candidate, corrs, intr);
      if (err <= current_err) {
        const bool converged = current_err - err <
                               1e-16 * (1.0 + current_err);
        current = candidate;
        current_err = err;
        accepted = true;
        if (converged) return current;
        break;
      }
      delta *= 0.5;
    }
    if (!accepted) break;  // no improving step in this direction
  }
  return current;
}

PoseEstimate ransac_pnp(const std::vector<Correspondence>& corrs,
                        const PinholeIntrinsics& intr,
                        const RansacConfig& cfg) {
  cfg.validate();
  if (corrs.size() < kMinimalSampleSize) {
    throw InsufficientCorrespondences(
        "ransac_pnp: at least 6 correspondences required");
  }

  Rng rng(cfg.seed);
  const std::size_t n = corrs.size();

  PoseEstimate best;
  std::size_t best_count = 0;
  double best_mean_err = std::numeric_limits<double>::infinity();
  bool have_model = false;
  double adaptive_limit = cfg.max_iterations;

  std::vector<Correspondence> minimal(kMinimalSampleSize);
  for (int iter = 0;
       iter < cfg.max_iterations && iter < adaptive_limit; ++iter) {
    const auto idx = rng.sample_indices(n, kMinimalSampleSize);
    for (int i = 0; i < kMinimalSampleSize; ++i) minimal[i] = corrs[idx[i]];

    SE3Pose candidate;
    try {
      candidate = solve_pnp_dlt(minimal, intr);
    } catch (const DegenerateConfiguration&) {
      continue;
    }

    std::vector<std::size_t> inliers;
    double err_sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = reprojection_error_px(candidate, corrs[i], intr);
      if (e <= cfg.inlier_threshold) {
        inliers.push_back(i);
        err_sum += e;
      }
    }
    const double mean_err =
        inliers.empty() ? std::numeric_limits<double>::infinity()
                        : err_sum / static_cast<double>(inliers.size());
    if (inliers.size() > best_count ||
        (inliers.size() == best_count && mean_err < best_mean_err)) {
      best_count = inliers.size();
      best_mean_err = mean_err;
      best.pose = candidate;
      best.inlier_indices = std::move(inliers);
      have_model = true;

      // Standard adaptive bound on the number of draws needed to hit one
      // all-inlier minimal sample with the requested confidence.
      const double w =
          static_cast<double>(best_count) / static_cast<double>(n);
      const double p_good = std::pow(w, kMinimalSampleSize);
      if (p_good >= 1.0 - 1e-12) {
        adaptive_limit = iter + 1;
      } else if (p_good > 0) {
        adaptive_limit =
            std::log(1.0 - cfg.confidence) / std::log(1.0 - p_good);
      }
    }
  }

  if (!have_model) {
    best.converged = false;
    return best;
  }

  if (best.inlier_indices.size() >= kMinimalSampleSize) {
    std::vector<Correspondence> inlier_corrs;
    inlier_corrs.reserve(best.inlier_indices.size());
    for (const std::size_t i : best.inlier_indices) {
      inlier_corrs.push_back(corrs[i]);
    }
    best.pose = refine_gauss_newton(best.pose, inlier_corrs, intr, 10);
  }

  // Re-collect inliers under the final pose so the reported set is
  // consistent with it.
  best.inlier_indices.clear();
  double err_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = reprojection_error_px(best.pose, corrs[i], intr);
    if (e <= cfg.inlier_threshold) {
      best.inlier_indices.push_back(i);
      err_sum += e;
    }
  }
  best.mean_reprojection_error =
      best.inlier_indices.empty()
          ? 0
          : err_sum / static_cast<double>(best.inlier_indices.size());
  best.converged =
      static_cast<int>(best.inlier_indices.size()) >= cfg.min_inliers;
  return best;
}

std::pair<double, double> pose_errors(const SE3Pose& estimate,
                                      const SE3Pose& gt) {
  const double trans_cm = (estimate.center() - gt.center()).norm() * 100.0;
  const double rot_deg = rotation_angle_deg<double>(estimate.rotation,
                                                    gt.rotation);
  return {trans_cm, rot_deg};
}

}  // namespace descsyn
