#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "descsyn/geometry.hpp"

// Novel camera pose generation from a sparse reference set: k-nearest pairing
// on translation distance, uniform sampling along each pair's translation
// segment, and quaternion slerp for the rotations.

namespace descsyn {

struct PoseEntry {
  std::string id;
  SE3Pose pose;
  PinholeIntrinsics intrinsics;
};

/// Ordered reference pose set. Ids must be unique; at least two entries are
/// required for synthesis.
struct PoseSet {
  std::vector<PoseEntry> entries;

  const PoseEntry& at(const std::string& id) const;
  bool contains(const std::string& id) const;
  void validate() const;
};

enum class PairPolicy {
  kPerAnchor,       // every anchor keeps its k nearest, duplicates retained
  kDedupUnordered,  // unordered duplicates (i,j)/(j,i) collapsed
};

struct InterpConfig {
  int k = 3;
  int n_samples = 40;  // poses generated between each anchor pair
  PairPolicy pair_policy = PairPolicy::kDedupUnordered;
};

/// An interpolated pose with its provenance: the anchor pair and the
/// interpolation fraction delta = n / (n_samples + 1), 1 <= n <= n_samples.
struct NovelPose {
  SE3Pose pose;
  PinholeIntrinsics intrinsics;  // inherited from anchor_a
  std::string anchor_a;
  std::string anchor_b;
  int sample_index = 0;  // the n above
  double delta = 0;
};

/// Squared Euclidean distances from the anchor's translation to every other
/// pose's translation, one entry per other pose, in set order. Only the
/// ordering matters downstream, so the squared form is kept as is.
std::vector<std::pair<std::string, double>> pairwise_distances(
    const PoseSet& poses, const std::string& anchor);

/// Anchor pairs selected by the k-nearest rule. Per-anchor policy: each
/// anchor paired with its k nearest neighbours, ties broken by smaller id.
/// Dedup policy: same pairs with unordered duplicates collapsed to
/// (min id, max id), first occurrence kept. Output order is deterministic:
/// anchors in set order, neighbours by ascending distance.
std::vector<std::pair<std::string, std::string>> top_k_pairs(
    const PoseSet& poses, const InterpConfig& cfg);

/// For each selected pair and each n in 1..n_samples, the pose at
/// delta = n / (n_samples + 1): translation linearly interpolated, rotation
/// slerped. Endpoints are excluded, so no reference pose is duplicated and
/// the output has exactly |pairs| * n_samples entries.
std::vector<NovelPose> synthesize_poses(const PoseSet& poses,
                                        const InterpConfig& cfg);

}  // namespace descsyn
