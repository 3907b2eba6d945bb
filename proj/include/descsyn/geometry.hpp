#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include <cmath>
#include <optional>
#include <stdexcept>

// Rotation, quaternion and pinhole camera algebra used by every other module.
//
// Convention, fixed repo-wide: poses are camera-from-world, a world point X
// maps to camera coordinates as R * X + t (COLMAP convention).

namespace descsyn {

template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

/// Unit quaternion (w, x, y, z). Kept unit-norm by the functions below; the
/// canonical representative has w >= 0.
template <typename Scalar>
struct Quaternion {
  Scalar w{1}, x{0}, y{0}, z{0};

  Scalar norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  Scalar dot(const Quaternion& o) const {
    return w * o.w + x * o.x + y * o.y + z * o.z;
  }

  Quaternion normalized() const {
    const Scalar n = norm();
    return {w / n, x / n, y / n, z / n};
  }

  Quaternion operator-() const { return {-w, -x, -y, -z}; }

  bool operator==(const Quaternion&) const = default;
};

using Quaterniond = Quaternion<double>;

/// Distance of r from the proper rotation group: max-abs deviation of the
/// Gram matrix from identity, and of the determinant from +1.
template <typename Scalar>
Scalar orthonormality_error(const Mat3<Scalar>& r) {
  const Mat3<Scalar> gram = r.transpose() * r;
  const Scalar gram_err =
      (gram - Mat3<Scalar>::Identity()).cwiseAbs().maxCoeff();
  return std::max(gram_err, std::abs(r.determinant() - Scalar(1)));
}

namespace detail {

// Sign canonicalization: w >= 0; for w == 0, first nonzero of (x, y, z) >= 0.
template <typename Scalar>
Quaternion<Scalar> canonical_sign(Quaternion<Scalar> q) {
  Scalar lead = q.w;
  if (lead == Scalar(0)) lead = q.x;
  if (lead == Scalar(0)) lead = q.y;
  if (lead == Scalar(0)) lead = q.z;
  return lead < Scalar(0) ? -q : q;
}

}  // namespace detail

/// Rotation matrix -> unit quaternion, Shepperd's method. The branch is
/// selected on the largest of (trace, r11, r22, r33) so the square root
/// argument stays well away from zero for every input, including trace -> -1.
template <typename Scalar>
Quaternion<Scalar> rot_to_quat(const Mat3<Scalar>& r) {
  if (orthonormality_error(r) > Scalar(1e-6)) {
    throw std::invalid_argument("rot_to_quat: input is not a proper rotation");
  }
  Quaternion<Scalar> q;
  const Scalar tr = r.trace();
  if (tr > Scalar(0)) {
    const Scalar s = std::sqrt(tr + Scalar(1)) * Scalar(2);  // 4w
    q.w = Scalar(0.25) * s;
    q.x = (r(2, 1) - r(1, 2)) / s;
    q.y = (r(0, 2) - r(2, 0)) / s;
    q.z = (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) >= r(1, 1) && r(0, 0) >= r(2, 2)) {
    const Scalar s = std::sqrt(Scalar(1) + r(0, 0) - r(1, 1) - r(2, 2)) * 2;
    q.w = (r(2, 1) - r(1, 2)) / s;
    q.x = Scalar(0.25) * s;
    q.y = (r(0, 1) + r(1, 0)) / s;
    q.z = (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) >= r(2, 2)) {
    const Scalar s = std::sqrt(Scalar(1) - r(0, 0) + r(1, 1) - r(2, 2)) * 2;
    q.w = (r(0, 2) - r(2, 0)) / s;
    q.x = (r(0, 1) + r(1, 0)) / s;
    q.y = Scalar(0.25) * s;
    q.z = (r(1, 2) + r(2, 1)) / s;
  } else {
    const Scalar s = std::sqrt(Scalar(1) - r(0, 0) - r(1, 1) + r(2, 2)) * 2;
    q.w = (r(1, 0) - r(0, 1)) / s;
    q.x = (r(0, 2) + r(2, 0)) / s;
    q.y = (r(1, 2) + r(2, 1)) / s;
    q.z = Scalar(0.25) * s;
  }
  return detail::canonical_sign(q.normalized());
}

/// Unit quaternion -> rotation matrix. q and -q map to the same matrix.
template <typename Scalar>
Mat3<Scalar> quat_to_rot(const Quaternion<Scalar>& q) {
  if (std::abs(q.norm() - Scalar(1)) > Scalar(1e-6)) {
    throw std::invalid_argument("quat_to_rot: quaternion is not unit norm");
  }
  const Scalar w = q.w, x = q.x, y = q.y, z = q.z;
  Mat3<Scalar> r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

/// Spherical interpolation between unit quaternions at constant angular
/// speed. qb is sign-flipped first when qa . qb < 0 (shortest path); for
/// nearly parallel inputs the sin ratio degenerates and normalized linear
/// interpolation is used instead.
template <typename Scalar>
Quaternion<Scalar> slerp(const Quaternion<Scalar>& qa,
                         const Quaternion<Scalar>& qb, Scalar delta) {
  if (std::abs(qa.norm() - Scalar(1)) > Scalar(1e-6) ||
      std::abs(qb.norm() - Scalar(1)) > Scalar(1e-6)) {
    throw std::invalid_argument("slerp: inputs must be unit quaternions");
  }
  if (delta < Scalar(0) || delta > Scalar(1)) {
    throw std::invalid_argument("slerp: delta outside [0, 1]");
  }
  Quaternion<Scalar> qbp = qb;
  Scalar cos_omega = qa.dot(qb);
  if (cos_omega < Scalar(0)) {
    qbp = -qbp;
    cos_omega = -cos_omega;
  }
  cos_omega = std::min(cos_omega, Scalar(1));
  const Scalar omega = std::acos(cos_omega);
  const Scalar sin_omega = std::sin(omega);

  Scalar wa, wb;
  if (sin_omega < Scalar(1e-6)) {
    wa = Scalar(1) - delta;  // lerp fallback
    wb = delta;
  } else {
    wa = std::sin((Scalar(1) - delta) * omega) / sin_omega;
    wb = std::sin(delta * omega) / sin_omega;
  }
  const Quaternion<Scalar> out{wa * qa.w + wb * qbp.w, wa * qa.x + wb * qbp.x,
                               wa * qa.y + wb * qbp.y, wa * qa.z + wb * qbp.z};
  return out.normalized();
}

/// Relative angle between two rotations, in degrees. Symmetric, zero iff
/// ra == rb. Computed as atan2 of the sine (from the skew part of ra^T rb)
/// and cosine (from its trace): the pure-arccos form quantizes near 0 and
/// cannot resolve angles below ~1e-6 degrees, this form resolves to machine
/// precision over the whole range.
template <typename Scalar>
Scalar rotation_angle_deg(const Mat3<Scalar>& ra, const Mat3<Scalar>& rb) {
  const Mat3<Scalar> d = ra.transpose() * rb;
  const Scalar c = (d.trace() - Scalar(1)) / Scalar(2);
  const Vec3<Scalar> skew(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0),
                          d(1, 0) - d(0, 1));
  const Scalar s = skew.norm() / Scalar(2);
  const Scalar clamped = std::min(Scalar(1), std::max(Scalar(-1), c));
  return std::atan2(s, clamped) * Scalar(180) / Scalar(M_PI);
}

/// Pinhole camera intrinsics, all in pixels.
struct PinholeIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const {
    if (!(fx > 0) || !(fy > 0)) {
      throw std::invalid_argument("intrinsics: focal lengths must be > 0");
    }
    if (!(cx > 0 && cx < width) || !(cy > 0 && cy < height)) {
      throw std::invalid_argument(
          "intrinsics: principal point outside image bounds");
    }
  }

  bool operator==(const PinholeIntrinsics&) const = default;
};

/// Camera extrinsic: X_cam = rotation * X_world + translation.
struct SE3Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d to_camera(const Eigen::Vector3d& x_world) const {
    return rotation * x_world + translation;
  }

  /// Camera center in world coordinates, -R^T t.
  Eigen::Vector3d center() const {
    return -(rotation.transpose() * translation);
  }
};

/// Projects a world point through pose and intrinsics. Returns the pixel, or
/// nullopt when the point is behind the camera or lands outside
/// [0, width) x [0, height). Out-of-view is a value, not an error.
inline std::optional<Eigen::Vector2d> project(const SE3Pose& pose,
                                              const PinholeIntrinsics& k,
                                              const Eigen::Vector3d& point) {
  const Eigen::Vector3d pc = pose.to_camera(point);
  if (!(pc.z() > 0)) return std::nullopt;
  const double u = k.fx * pc.x() / pc.z() + k.cx;
  const double v = k.fy * pc.y() / pc.z() + k.cy;
  if (u < 0 || u >= k.width || v < 0 || v >= k.height) return std::nullopt;
  return Eigen::Vector2d(u, v);
}

}  // namespace descsyn
