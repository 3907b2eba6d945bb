#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "descsyn/scene_oracle.hpp"

// 2D-2D correspondence search between a reference frame and a synthesized
// frame, the match-count quality filter, and 3D label transfer onto the
// synthetic keypoints.

namespace descsyn {

/// One-to-one index pairs (ref_index, syn_index) with their cosine
/// similarities.
struct MatchSet {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  std::vector<double> scores;

  std::size_t size() const { return pairs.size(); }
};

struct FilterDecision {
  bool accepted = false;
  int match_count = 0;
  int threshold = 0;
};

/// A synthetic descriptor with the scene coordinate inherited from its
/// matched reference keypoint.
struct LabeledSample {
  Eigen::VectorXf descriptor;
  Eigen::Vector3d target;
  std::string source_frame;
  Eigen::Vector2d keypoint;
};

/// Mutual-nearest-neighbour matching on cosine similarity with a Lowe ratio
/// test applied in both directions (this keeps the result symmetric in the
/// frame order) and a minimum-similarity cutoff. Ratio compares distance
/// proxies: (1 - best) <= ratio * (1 - second best); frames with a single
/// descriptor skip the test. Ties are broken toward the lower index. Empty
/// frames yield an empty MatchSet.
MatchSet match_descriptors(const Frame& ref, const Frame& syn, double ratio,
                           double min_score);

/// Accepts the frame iff the match count reaches eta (inclusive).
FilterDecision filter_frame(const MatchSet& m, int eta);

/// The match-count threshold scaled to the configured keypoint budget,
/// eta * max_keypoints / 2048, rounded to nearest.
int effective_eta(int eta, int max_keypoints);

/// One LabeledSample per match: descriptor and keypoint from the synthetic
/// frame, target from the reference keypoint's scene coordinate. Reference
/// keypoints without a coordinate are dropped.
std::vector<LabeledSample> transfer_labels(
    const MatchSet& m, const Frame& ref,
    const std::vector<std::optional<Eigen::Vector3d>>& ref_coords,
    const Frame& syn);

std::vector<LabeledSample> transfer_labels(
    const MatchSet& m, const Frame& ref,
    const std::vector<Eigen::Vector3d>& ref_coords, const Frame& syn);

}  // namespace descsyn
