#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "descsyn/scene_oracle.hpp"

// Self-describing frame container: a text header (format version, optional
// scene parameters, ordered config snapshot, frame table with payload
// offsets), followed by per-frame binary blocks. Blocks hold keypoints as
// little-endian f64 pairs, descriptors as f32, optional ground-truth ids as
// u64 and optional coordinate labels as f64 triples, each guarded by a
// CRC32. Writing a dataset that was read back unchanged reproduces the file
// byte for byte.

namespace descsyn {

struct DatasetError : std::runtime_error {
  enum class Kind { malformed, version, truncated, checksum };

  DatasetError(Kind k, const std::string& what)
      : std::runtime_error(what), kind(k) {}
  Kind kind;
};

/// A synthetic scene is stored by its generation parameters; the generator
/// is deterministic, so regeneration is exact.
struct SceneParams {
  std::uint64_t seed = 0;
  int landmark_count = 0;
  int descriptor_dim = 0;
  double view_strength = 0;
  AlignedBox bounds;

  SyntheticScene generate() const {
    return generate_scene(seed, landmark_count, bounds, descriptor_dim,
                          view_strength);
  }
  static SceneParams of(const SyntheticScene& scene) {
    return {scene.seed, static_cast<int>(scene.landmarks.size()),
            scene.descriptor_dim, scene.view_strength, scene.bounds};
  }
};

struct DatasetManifest {
  int version = 1;
  std::optional<SceneParams> scene;
  std::vector<std::pair<std::string, std::string>> config;  // ordered
};

/// A frame plus optional explicit scene-coordinate labels (used for
/// synthetic samples whose targets were transferred by matching rather than
/// read off the oracle).
struct DatasetFrame {
  Frame frame;
  std::optional<Eigen::Matrix3Xd> coords;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<DatasetFrame> frames;
};

std::string serialize_dataset(const Dataset& ds);
Dataset parse_dataset(const std::string& bytes);

void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

// Whole-file helpers shared by the CLI and tests.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace descsyn
