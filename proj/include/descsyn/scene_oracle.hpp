#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "descsyn/geometry.hpp"

// Deterministic synthetic scene: a landmark cloud whose descriptors vary
// smoothly with viewing direction, rendered to per-view keypoints and
// descriptors with a controllable corruption model. Stands in for a neural
// renderer plus feature extractor so the rest of the pipeline can be
// exercised at desk scale.

namespace descsyn {

struct AlignedBox {
  Eigen::Vector3d min = Eigen::Vector3d(-1, -1, -1);
  Eigen::Vector3d max = Eigen::Vector3d(1, 1, 1);

  bool contains(const Eigen::Vector3d& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Eigen::Vector3d center() const { return 0.5 * (min + max); }
  bool empty() const { return (max.array() <= min.array()).any(); }
};

struct Landmark {
  std::uint64_t id = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::VectorXd base_descriptor;  // unit norm, dimension d
  // Linear response of the descriptor to the viewing direction, operator
  // norm scaled to the scene's view_strength.
  Eigen::MatrixXd view_map;  // d x 3
};

struct SyntheticScene {
  std::vector<Landmark> landmarks;
  AlignedBox bounds;
  std::uint64_t seed = 0;
  int descriptor_dim = 256;
  double view_strength = 0.6;
};

struct RenderConfig {
  double pixel_noise_sigma = 1.0;
  double descriptor_noise_sigma = 0.01;  // per component; total norm ~sigma*sqrt(d)
  double artifact_prob = 0.15;      // chance a rendered view is corrupted
  double artifact_fraction = 0.9;   // share of a corrupted view's features hit
  int max_keypoints = 2048;

  void validate() const;
};

/// One view's detections: keypoints with parallel descriptors, optional
/// ground-truth landmark ids, and the pose it was rendered from.
struct Frame {
  std::string frame_id;
  SE3Pose pose;
  PinholeIntrinsics intrinsics;
  Eigen::Matrix2Xd keypoints;             // one column per keypoint, pixels
  Eigen::MatrixXf descriptors;            // d rows, one column per keypoint
  std::optional<std::vector<std::uint64_t>> gt_landmark_ids;
  bool is_synthetic = false;

  Eigen::Index size() const { return keypoints.cols(); }
  bool empty() const { return keypoints.cols() == 0; }
};

struct RenderedView {
  Frame frame;
  bool corrupted = false;
};

/// Landmarks uniform in bounds, base descriptors uniform on the unit sphere,
/// per-landmark view maps scaled to view_strength. Every draw is keyed on
/// (seed, landmark id), so the scene is a pure function of its parameters.
SyntheticScene generate_scene(std::uint64_t seed, int landmark_count,
                              const AlignedBox& bounds, int descriptor_dim,
                              double view_strength = 0.6);

/// Noise-free descriptor of a landmark seen from view_dir (unit vector from
/// landmark to camera center).
Eigen::VectorXd oracle_descriptor(const Landmark& lm,
                                  const Eigen::Vector3d& view_dir);

/// Renders the scene into a Frame: in-view landmarks projected (nearest
/// max_keypoints kept when over budget), Gaussian pixel and descriptor noise
/// applied, and, with probability artifact_prob, the view corrupted by
/// replacing artifact_fraction of its descriptors with random unit vectors
/// and displacing the same keypoints uniformly in the image. Deterministic
/// in (scene, pose, view_seed). A view with nothing in front of it yields an
/// empty Frame.
RenderedView render_view(const SyntheticScene& scene, const SE3Pose& pose,
                         const PinholeIntrinsics& intr, const RenderConfig& cfg,
                         std::uint64_t view_seed);

/// Ground-truth landmark positions for a frame's keypoints, by id. Corrupted
/// keypoints keep their original id, so label noise survives by construction.
std::vector<Eigen::Vector3d> gt_coordinates(const SyntheticScene& scene,
                                            const Frame& frame);

}  // namespace descsyn
