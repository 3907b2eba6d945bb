#include "descsyn/scene_oracle.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "descsyn/rng.hpp"

namespace descsyn {

void RenderConfig::validate() const {
  if (pixel_noise_sigma < 0 || descriptor_noise_sigma < 0) {
    throw std::invalid_argument("render config: sigmas must be >= 0");
  }
  if (artifact_prob < 0 || artifact_prob > 1 || artifact_fraction < 0 ||
      artifact_fraction > 1) {
    throw std::invalid_argument(
        "render config: probabilities must be in [0, 1]");
  }
  if (max_keypoints < 1) {
    throw std::invalid_argument("render config: max_keypoints must be >= 1");
  }
}

SyntheticScene generate_scene(std::uint64_t seed, int landmark_count,
                              const AlignedBox& bounds, int descriptor_dim,
                              double view_strength) {
  if (landmark_count < 1) {
    throw std::invalid_argument("generate_scene: landmark_count must be >= 1");
  }
  if (bounds.empty()) {
    throw std::invalid_argument("generate_scene: empty bounds");
  }
  if (descriptor_dim < 1) {
    throw std::invalid_argument("generate_scene: descriptor_dim must be >= 1");
  }
  if (view_strength < 0) {
    throw std::invalid_argument("generate_scene: view_strength must be >= 0");
  }

  SyntheticScene scene;
  scene.bounds = bounds;
  scene.seed = seed;
  scene.descriptor_dim = descriptor_dim;
  scene.view_strength = view_strength;
  scene.landmarks.reserve(static_cast<std::size_t>(landmark_count));

  for (int i = 0; i < landmark_count; ++i) {
    // One substream per landmark, keyed on (seed, id): regenerating the
    // scene from its parameters reproduces it exactly.
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    Landmark lm;
    lm.id = static_cast<std::uint64_t>(i);
    for (int a = 0; a < 3; ++a) {
      lm.position[a] = rng.uniform(bounds.min[a], bounds.max[a]);
    }
    lm.base_descriptor = rng.unit_vector(descriptor_dim);
    lm.view_map = Eigen::MatrixXd(descriptor_dim, 3);
    for (int c = 0; c < 3; ++c) {
      lm.view_map.col(c) = rng.normal_vector(descriptor_dim);
    }
    if (view_strength == 0) {
      lm.view_map.setZero();
    } else {
      // Operator norm from the 3x3 Gram matrix, then rescale to
      // view_strength exactly.
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(
          lm.view_map.transpose() * lm.view_map);
      const double op_norm = std::sqrt(es.eigenvalues().maxCoeff());
      lm.view_map *= view_strength / op_norm;
    }
    scene.landmarks.push_back(std::move(lm));
  }
  return scene;
}

Eigen::VectorXd oracle_descriptor(const Landmark& lm,
                                  const Eigen::Vector3d& view_dir) {
  const Eigen::VectorXd raw = lm.base_descriptor + lm.view_map * view_dir;
  const double n = raw.norm();
  return n < 1e-12 ? lm.base_descriptor : Eigen::VectorXd(raw / n);
}

RenderedView render_view(const SyntheticScene& scene, const SE3Pose& pose,
                         const PinholeIntrinsics& intr, const RenderConfig& cfg,
                         std::uint64_t view_seed) {
  intr.validate();
  cfg.validate();
  if (orthonormality_error<double>(pose.rotation) > 1e-6) {
    throw std::invalid_argument("render_view: pose rotation is not a rotation");
  }

  Rng rng(view_seed);
  // Corruption coin comes first so a view's remaining noise stream is
  // identical whether or not the coin lands (the corrupted/clean twin
  // comparison relies on this).
  const bool corrupted = rng.uniform() < cfg.artifact_prob;

  struct Visible {
    std::uint64_t id;
    Eigen::Vector2d pixel;
    double depth;
  };
  std::vector<Visible> visible;
  for (const Landmark& lm : scene.landmarks) {
    if (auto px = project(pose, intr, lm.position)) {
      visible.push_back({lm.id, *px, pose.to_camera(lm.position).z()});
    }
  }
  if (static_cast<int>(visible.size()) > cfg.max_keypoints) {
    std::sort(visible.begin(), visible.end(), [](const auto& a, const auto& b) {
      return a.depth != b.depth ? a.depth < b.depth : a.id < b.id;
    });
    visible.resize(static_cast<std::size_t>(cfg.max_keypoints));
    std::sort(visible.begin(), visible.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
  }

  const Eigen::Index n = static_cast<Eigen::Index>(visible.size());
  Frame frame;
  frame.pose = pose;
  frame.intrinsics = intr;
  frame.keypoints.resize(2, n);
  frame.descriptors.resize(scene.descriptor_dim, n);
  frame.gt_landmark_ids = std::vector<std::uint64_t>();
  frame.gt_landmark_ids->reserve(static_cast<std::size_t>(n));

  const Eigen::Vector3d cam_center = pose.center();
  const double u_max = intr.width - 1e-9;
  const double v_max = intr.height - 1e-9;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Visible& vis = visible[static_cast<std::size_t>(i)];
    const Landmark& lm = scene.landmarks[vis.id];
    double u = vis.pixel.x() + cfg.pixel_noise_sigma * rng.normal();
    double v = vis.pixel.y() + cfg.pixel_noise_sigma * rng.normal();
    frame.keypoints(0, i) = std::clamp(u, 0.0, u_max);
    frame.keypoints(1, i) = std::clamp(v, 0.0, v_max);

    Eigen::Vector3d view_dir = cam_center - lm.position;
    const double dist = view_dir.norm();
    view_dir = dist < 1e-12 ? Eigen::Vector3d::Zero()
                            : Eigen::Vector3d(view_dir / dist);
    Eigen::VectorXd d = lm.base_descriptor + lm.view_map * view_dir;
    if (cfg.descriptor_noise_sigma > 0) {
      d += cfg.descriptor_noise_sigma * rng.normal_vector(scene.descriptor_dim);
    }
    const double dn = d.norm();
    if (dn < 1e-12) d = lm.base_descriptor; else d /= dn;
    frame.descriptors.col(i) = d.cast<float>();
    frame.gt_landmark_ids->push_back(vis.id);
  }

  if (corrupted && n > 0) {
    const auto n_corrupt = static_cast<std::size_t>(std::clamp<long>(
        std::lround(cfg.artifact_fraction * static_cast<double>(n)), 0,
        static_cast<long>(n)));
    const auto hit =
        rng.sample_indices(static_cast<std::size_t>(n), n_corrupt);
    for (const std::size_t idx : hit) {
      const auto i = static_cast<Eigen::Index>(idx);
      frame.descriptors.col(i) =
          rng.unit_vector(scene.descriptor_dim).cast<float>();
      frame.keypoints(0, i) = rng.uniform(0.0, u_max);
      frame.keypoints(1, i) = rng.uniform(0.0, v_max);
    }
  }

  return {std::move(frame), corrupted};
}

std::vector<Eigen::Vector3d> gt_coordinates(const SyntheticScene& scene,
                                            const Frame& frame) {
  if (!frame.gt_landmark_ids.has_value()) {
    throw std::invalid_argument("gt_coordinates: frame has no gt ids");
  }
  std::vector<Eigen::Vector3d> out;
  out.reserve(frame.gt_landmark_ids->size());
  for (const std::uint64_t id : *frame.gt_landmark_ids) {
    if (id >= scene.landmarks.size()) {
      throw std::out_of_range("gt_coordinates: landmark id out of range");
    }
    out.push_back(scene.landmarks[id].position);
  }
  return out;
}

}  // namespace descsyn
