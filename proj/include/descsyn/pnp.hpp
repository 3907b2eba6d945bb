#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "descsyn/geometry.hpp"

// Camera pose from 2D-3D correspondences: a 6-point DLT minimal solver
// inside RANSAC with adaptive iteration count, Gauss-Newton refinement on
// the inliers, and the translation/rotation error metrics used by the
// evaluation reports.

namespace descsyn {

struct Correspondence {
  Eigen::Vector2d pixel;
  Eigen::Vector3d point;
};

struct RansacConfig {
  int max_iterations = 1000;
  double inlier_threshold = 3.0;  // pixels
  double confidence = 0.99;
  int min_inliers = 12;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PoseEstimate {
  SE3Pose pose;
  std::vector<std::size_t> inlier_indices;
  bool converged = false;
  double mean_reprojection_error = 0;  // pixels, over the inliers
};

struct InsufficientCorrespondences : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateConfiguration : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Direct linear transform on normalized image coordinates; the rotation
/// block is projected to the nearest rotation (SVD polar decomposition) and
/// the sign is fixed so the points sit in front of the camera. Needs at
/// least 6 correspondences in a non-degenerate configuration.
SE3Pose solve_pnp_dlt(const std::vector<Correspondence>& corrs,
                      const PinholeIntrinsics& intr);

/// Minimizes the sum of squared reprojection residuals over a local
/// 6-parameter update (axis-angle rotation + translation), halving the step
/// on any residual increase. The returned pose never has a larger residual
/// sum than the input; if no improving step exists the input is returned.
SE3Pose refine_gauss_newton(const SE3Pose& pose,
                            const std::vector<Correspondence>& corrs,
                            const PinholeIntrinsics& intr, int iterations);

/// Total squared reprojection error of corrs under pose; points behind the
/// camera contribute an effectively infinite residual.
double reprojection_error_sq(const SE3Pose& pose,
                             const std::vector<Correspondence>& corrs,
                             const PinholeIntrinsics& intr);

/// Seeded RANSAC around solve_pnp_dlt with the standard adaptive exit, best
/// model kept by inlier count (ties by lower mean inlier error), then
/// Gauss-Newton refinement over the inliers. converged is false when no
/// model reaches min_inliers; the best-effort pose is still returned.
PoseEstimate ransac_pnp(const std::vector<Correspondence>& corrs,
                        const PinholeIntrinsics& intr,
                        const RansacConfig& cfg);

/// Translation error between camera centers (cm) and rotation error
/// (degrees), the per-frame evaluation metric.
std::pair<double, double> pose_errors(const SE3Pose& estimate,
                                      const SE3Pose& gt);

}  // namespace descsyn
