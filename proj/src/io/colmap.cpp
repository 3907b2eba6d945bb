#include "descsyn/io/colmap.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <unordered_set>

namespace descsyn {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

double parse_double(const std::string& tok, std::size_t line) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(line, "expected a real number, got '" + tok + "'");
  }
  return v;
}

std::uint32_t parse_u32(const std::string& tok, std::size_t line) {
  std::uint32_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(line, "expected a non-negative integer, got '" + tok + "'");
  }
  return v;
}

int parse_dim(const std::string& tok, std::size_t line) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v <= 0) {
    throw ParseError(line, "expected a positive integer, got '" + tok + "'");
  }
  return v;
}

bool is_comment_or_blank(const std::string& line) {
  for (const char c : line) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    return c == '#';
  }
  return true;  // blank
}

// Splits text into lines; a trailing newline does not produce a final
// empty line.
std::vector<std::string> to_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    if (end == std::string::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

}  // namespace

SE3Pose ColmapImageRecord::pose() const {
  const Quaterniond q = Quaterniond{qw, qx, qy, qz}.normalized();
  SE3Pose p;
  p.rotation = quat_to_rot(q);
  p.translation = Eigen::Vector3d(tx, ty, tz);
  return p;
}

ColmapImageRecord ColmapImageRecord::from_pose(std::uint32_t image_id,
                                               const SE3Pose& pose,
                                               std::uint32_t camera_id,
                                               const std::string& name) {
  const Quaterniond q = rot_to_quat<double>(pose.rotation);
  ColmapImageRecord rec;
  rec.image_id = image_id;
  rec.qw = q.w;
  rec.qx = q.x;
  rec.qy = q.y;
  rec.qz = q.z;
  rec.tx = pose.translation.x();
  rec.ty = pose.translation.y();
  rec.tz = pose.translation.z();
  rec.camera_id = camera_id;
  rec.name = name;
  return rec;
}

PinholeIntrinsics ColmapCameraRecord::intrinsics() const {
  PinholeIntrinsics k;
  k.width = width;
  k.height = height;
  if (model == "PINHOLE" && params.size() == 4) {
    k.fx = params[0];
    k.fy = params[1];
    k.cx = params[2];
    k.cy = params[3];
  } else if (model == "SIMPLE_PINHOLE" && params.size() == 3) {
    k.fx = k.fy = params[0];
    k.cx = params[1];
    k.cy = params[2];
  } else {
    throw std::invalid_argument("camera record: unsupported model " + model);
  }
  k.validate();
  return k;
}

ColmapCameraRecord ColmapCameraRecord::from_intrinsics(
    std::uint32_t camera_id, const PinholeIntrinsics& intr) {
  ColmapCameraRecord rec;
  rec.camera_id = camera_id;
  rec.width = intr.width;
  rec.height = intr.height;
  if (intr.fx == intr.fy) {
    rec.model = "SIMPLE_PINHOLE";
    rec.params = {intr.fx, intr.cx, intr.cy};
  } else {
    rec.model = "PINHOLE";
    rec.params = {intr.fx, intr.fy, intr.cx, intr.cy};
  }
  return rec;
}

std::vector<ColmapImageRecord> parse_colmap_images(const std::string& text) {
  std::vector<ColmapImageRecord> records;
  std::unordered_set<std::uint32_t> seen_ids;
  const std::vector<std::string> lines = to_lines(text);

  std::size_t pose_line = 0;  // 1-based line of a pending pose, 0 if none
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (pose_line != 0) {
      pose_line = 0;  // this line is the (ignored) points2D line
      continue;
    }
    if (is_comment_or_blank(lines[i])) continue;

    const auto tokens = split_ws(lines[i]);
    if (tokens.size() != 10) {
      throw ParseError(line_no,
                       "image line must have 10 fields "
                       "(IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME)");
    }
    ColmapImageRecord rec;
    rec.image_id = parse_u32(tokens[0], line_no);
    rec.qw = parse_double(tokens[1], line_no);
    rec.qx = parse_double(tokens[2], line_no);
    rec.qy = parse_double(tokens[3], line_no);
    rec.qz = parse_double(tokens[4], line_no);
    rec.tx = parse_double(tokens[5], line_no);
    rec.ty = parse_double(tokens[6], line_no);
    rec.tz = parse_double(tokens[7], line_no);
    rec.camera_id = parse_u32(tokens[8], line_no);
    rec.name = tokens[9];

    if (!std::isfinite(rec.tx) || !std::isfinite(rec.ty) ||
        !std::isfinite(rec.tz)) {
      throw ParseError(line_no, "non-finite translation");
    }
    const double norm = std::sqrt(rec.qw * rec.qw + rec.qx * rec.qx +
                                  rec.qy * rec.qy + rec.qz * rec.qz);
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-3) {
      throw ParseError(line_no, "quaternion is not normalizable");
    }
    rec.qw /= norm;
    rec.qx /= norm;
    rec.qy /= norm;
    rec.qz /= norm;

    if (!seen_ids.insert(rec.image_id).second) {
      throw ParseError(line_no, "duplicate image_id " +
                                    std::to_string(rec.image_id));
    }
    records.push_back(std::move(rec));
    pose_line = line_no;
  }
  if (pose_line != 0) {
    throw ParseError(pose_line, "image record is missing its points2D line");
  }
  return records;
}

std::string write_colmap_images(
    const std::vector<ColmapImageRecord>& records) {
  std::string out;
  out += "# Image list with two lines of data per image:\n";
  out += "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n";
  out += "# Number of images: " + std::to_string(records.size()) + "\n";
  for (const auto& r : records) {
    out += std::to_string(r.image_id) + " " + format_real(r.qw) + " " +
           format_real(r.qx) + " " + format_real(r.qy) + " " +
           format_real(r.qz) + " " + format_real(r.tx) + " " +
           format_real(r.ty) + " " + format_real(r.tz) + " " +
           std::to_string(r.camera_id) + " " + r.name + "\n";
    out += "\n";  // empty points2D line
  }
  return out;
}

std::vector<ColmapCameraRecord> parse_colmap_cameras(const std::string& text) {
  std::vector<ColmapCameraRecord> records;
  std::unordered_set<std::uint32_t> seen_ids;
  const std::vector<std::string> lines = to_lines(text);

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (is_comment_or_blank(lines[i])) continue;
    const auto tokens = split_ws(lines[i]);
    if (tokens.size() < 5) {
      throw ParseError(line_no,
                       "camera line must have at least 5 fields "
                       "(CAMERA_ID MODEL WIDTH HEIGHT PARAMS...)");
    }
    ColmapCameraRecord rec;
    rec.camera_id = parse_u32(tokens[0], line_no);
    rec.model = tokens[1];
    rec.width = parse_dim(tokens[2], line_no);
    rec.height = parse_dim(tokens[3], line_no);
    for (std::size_t t = 4; t < tokens.size(); ++t) {
      rec.params.push_back(parse_double(tokens[t], line_no));
    }
    const std::size_t expected =
        rec.model == "PINHOLE" ? 4 : rec.model == "SIMPLE_PINHOLE" ? 3 : 0;
    if (expected == 0) {
      throw ParseError(line_no, "unsupported camera model " + rec.model);
    }
    if (rec.params.size() != expected) {
      throw ParseError(line_no, "camera model " + rec.model + " expects " +
                                    std::to_string(expected) + " parameters");
    }
    if (!seen_ids.insert(rec.camera_id).second) {
      throw ParseError(line_no, "duplicate camera_id " +
                                    std::to_string(rec.camera_id));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::string write_colmap_cameras(
    const std::vector<ColmapCameraRecord>& records) {
  std::string out;
  out += "# Camera list with one line of data per camera:\n";
  out += "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
  out += "# Number of cameras: " + std::to_string(records.size()) + "\n";
  for (const auto& r : records) {
    out += std::to_string(r.camera_id) + " " + r.model + " " +
           std::to_string(r.width) + " " + std::to_string(r.height);
    for (const double p : r.params) out += " " + format_real(p);
    out += "\n";
  }
  return out;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace descsyn
