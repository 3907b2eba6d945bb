#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "descsyn/geometry.hpp"

// COLMAP text-model interop: images.txt (pose per image, points2D lines
// ignored) and cameras.txt (PINHOLE / SIMPLE_PINHOLE only). Parsing is
// total: any input either parses or raises a ParseError carrying the
// offending line number.

namespace descsyn {

struct ParseError : std::runtime_error {
  ParseError(std::size_t line_number, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_number) + ": " +
                           what),
        line(line_number) {}
  std::size_t line;
};

/// One images.txt record: camera-from-world quaternion and translation.
/// The quaternion is renormalized on load; inputs further than 1e-3 from
/// unit norm are rejected.
struct ColmapImageRecord {
  std::uint32_t image_id = 0;
  double qw = 1, qx = 0, qy = 0, qz = 0;
  double tx = 0, ty = 0, tz = 0;
  std::uint32_t camera_id = 0;
  std::string name;

  SE3Pose pose() const;
  static ColmapImageRecord from_pose(std::uint32_t image_id,
                                     const SE3Pose& pose,
                                     std::uint32_t camera_id,
                                     const std::string& name);
};

struct ColmapCameraRecord {
  std::uint32_t camera_id = 0;
  std::string model;  // PINHOLE or SIMPLE_PINHOLE
  int width = 0, height = 0;
  std::vector<double> params;

  PinholeIntrinsics intrinsics() const;
  static ColmapCameraRecord from_intrinsics(std::uint32_t camera_id,
                                            const PinholeIntrinsics& intr);
};

std::vector<ColmapImageRecord> parse_colmap_images(const std::string& text);
std::string write_colmap_images(const std::vector<ColmapImageRecord>& records);

std::vector<ColmapCameraRecord> parse_colmap_cameras(const std::string& text);
std::string write_colmap_cameras(
    const std::vector<ColmapCameraRecord>& records);

/// %.17g, enough digits to reproduce any double exactly.
std::string format_real(double v);

}  // namespace descsyn
