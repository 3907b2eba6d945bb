#include "descsyn/pose_synthesis.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <unordered_set>

namespace descsyn {

const PoseEntry& PoseSet::at(const std::string& id) const {
  for (const auto& e : entries) {
    if (e.id == id) return e;
  }
  throw std::invalid_argument("pose set: unknown id '" + id + "'");
}

bool PoseSet::contains(const std::string& id) const {
  return std::any_of(entries.begin(), entries.end(),
                     [&](const PoseEntry& e) { return e.id == id; });
}

void PoseSet::validate() const {
  if (entries.empty()) {
    throw std::invalid_argument("pose set: empty");
  }
  std::unordered_set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.id).second) {
      throw std::invalid_argument("pose set: duplicate id '" + e.id + "'");
    }
  }
}

std::vector<std::pair<std::string, double>> pairwise_distances(
    const PoseSet& poses, const std::string& anchor) {
  poses.validate();
  const Eigen::Vector3d ta = poses.at(anchor).pose.translation;
  std::vector<std::pair<std::string, double>> out;
  out.reserve(poses.entries.size() - 1);
  for (const auto& e : poses.entries) {
    if (e.id == anchor) continue;
    out.emplace_back(e.id, (e.pose.translation - ta).squaredNorm());
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> top_k_pairs(
    const PoseSet& poses, const InterpConfig& cfg) {
  poses.validate();
  if (cfg.k < 1 || cfg.k >= static_cast<int>(poses.entries.size())) {
    throw std::invalid_argument(
        "top_k_pairs: k must satisfy 1 <= k < pose count");
  }

  std::vector<std::pair<std::string, std::string>> pairs;
  std::set<std::pair<std::string, std::string>> seen;  // dedup policy only
  for (const auto& anchor : poses.entries) {
    auto dists = pairwise_distances(poses, anchor.id);
    std::sort(dists.begin(), dists.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second < b.second : a.first < b.first;
    });
    dists.resize(static_cast<std::size_t>(cfg.k));
    for (const auto& [other, dist] : dists) {
      (void)dist;
      if (cfg.pair_policy == PairPolicy::kPerAnchor) {
        pairs.emplace_back(anchor.id, other);
      } else {
        auto key = std::minmax(anchor.id, other);
        if (seen.insert({key.first, key.second}).second) {
          pairs.emplace_back(key.first, key.second);
        }
      }
    }
  }
  return pairs;
}

std::vector<NovelPose> synthesize_poses(const PoseSet& poses,
                                        const InterpConfig& cfg) {
  if (cfg.n_samples < 1) {
    throw std::invalid_argument("synthesize_poses: n_samples must be >= 1");
  }
  const auto pairs = top_k_pairs(poses, cfg);

  std::vector<NovelPose> out;
  out.reserve(pairs.size() * static_cast<std::size_t>(cfg.n_samples));
  for (const auto& [id_a, id_b] : pairs) {
    const PoseEntry& a = poses.at(id_a);
    const PoseEntry& b = poses.at(id_b);
    const Quaterniond qa = rot_to_quat<double>(a.pose.rotation);
    const Quaterniond qb = rot_to_quat<double>(b.pose.rotation);
    for (int n = 1; n <= cfg.n_samples; ++n) {
      const double delta = static_cast<double>(n) / (cfg.n_samples + 1);
      NovelPose np;
      np.pose.translation =
          a.pose.translation +
          delta * (b.pose.translation - a.pose.translation);
      np.pose.rotation = quat_to_rot(slerp(qa, qb, delta));
      np.intrinsics = a.intrinsics;
      np.anchor_a = id_a;
      np.anchor_b = id_b;
      np.sample_index = n;
      np.delta = delta;
      out.push_back(std::move(np));
    }
  }
  return out;
}

}  // namespace descsyn
