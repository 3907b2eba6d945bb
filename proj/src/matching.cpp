#include "descsyn/matching.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace descsyn {

namespace {

// Best and second-best similarity per column of `sim` along one axis.
struct BestTwo {
  Eigen::Index best = -1;
  double s1 = -2.0;
  double s2 = -2.0;
};

// Scans row i of sim; first maximum wins, so ties break to the lower index.
BestTwo best_two_in_row(const Eigen::MatrixXd& sim, Eigen::Index i) {
  BestTwo bt;
  for (Eigen::Index j = 0; j < sim.cols(); ++j) {
    const double s = sim(i, j);
    if (s > bt.s1) {
      bt.s2 = bt.s1;
      bt.s1 = s;
      bt.best = j;
    } else if (s > bt.s2) {
      bt.s2 = s;
    }
  }
  return bt;
}

BestTwo best_two_in_col(const Eigen::MatrixXd& sim, Eigen::Index j) {
  BestTwo bt;
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    const double s = sim(i, j);
    if (s > bt.s1) {
      bt.s2 = bt.s1;
      bt.s1 = s;
      bt.best = i;
    } else if (s > bt.s2) {
      bt.s2 = s;
    }
  }
  return bt;
}

bool passes_ratio(const BestTwo& bt, double ratio, Eigen::Index candidates) {
  if (candidates < 2) return true;  // no second neighbour to compare against
  return (1.0 - bt.s1) <= ratio * (1.0 - bt.s2);
}

}  // namespace

MatchSet match_descriptors(const Frame& ref, const Frame& syn, double ratio,
                           double min_score) {
  MatchSet out;
  if (ref.empty() || syn.empty()) return out;
  if (ref.descriptors.rows() != syn.descriptors.rows()) {
    throw std::invalid_argument(
        "match_descriptors: descriptor dimension mismatch");
  }

  // Unit descriptors, so the Gram matrix holds the cosine similarities.
  // Accumulated in double regardless of descriptor storage precision.
  const Eigen::MatrixXd sim = ref.descriptors.cast<double>().transpose() *
                              syn.descriptors.cast<double>();

  const Eigen::Index n_ref = sim.rows();
  const Eigen::Index n_syn = sim.cols();
  std::vector<BestTwo> by_syn(static_cast<std::size_t>(n_syn));
  for (Eigen::Index j = 0; j < n_syn; ++j) by_syn[j] = best_two_in_col(sim, j);

  for (Eigen::Index i = 0; i < n_ref; ++i) {
    const BestTwo fwd = best_two_in_row(sim, i);
    const Eigen::Index j = fwd.best;
    if (j < 0) continue;
    const BestTwo& bwd = by_syn[static_cast<std::size_t>(j)];
    if (bwd.best != i) continue;  // not mutual
    if (fwd.s1 < min_score) continue;
    if (!passes_ratio(fwd, ratio, n_syn) || !passes_ratio(bwd, ratio, n_ref)) {
      continue;
    }
    out.pairs.emplace_back(i, j);
    // Unit norm only holds to storage precision, so nudge into [-1, 1].
    out.scores.push_back(std::clamp(fwd.s1, -1.0, 1.0));
  }
  return out;
}

FilterDecision filter_frame(const MatchSet& m, int eta) {
  if (eta < 0) throw std::invalid_argument("filter_frame: eta must be >= 0");
  FilterDecision d;
  d.match_count = static_cast<int>(m.pairs.size());
  d.threshold = eta;
  d.accepted = d.match_count >= eta;
  return d;
}

int effective_eta(int eta, int max_keypoints) {
  return static_cast<int>(std::lround(eta * max_keypoints / 2048.0));
}

std::vector<LabeledSample> transfer_labels(
    const MatchSet& m, const Frame& ref,
    const std::vector<std::optional<Eigen::Vector3d>>& ref_coords,
    const Frame& syn) {
  if (static_cast<Eigen::Index>(ref_coords.size()) != ref.size()) {
    throw std::invalid_argument(
        "transfer_labels: ref_coords not parallel to ref keypoints");
  }
  std::vector<LabeledSample> out;
  out.reserve(m.pairs.size());
  for (const auto& [ri, si] : m.pairs) {
    if (ri < 0 || ri >= ref.size() || si < 0 || si >= syn.size()) {
      throw std::invalid_argument("transfer_labels: match index out of range");
    }
    const auto& coord = ref_coords[static_cast<std::size_t>(ri)];
    if (!coord.has_value()) continue;  // reference keypoint lacks a 3D point
    LabeledSample s;
    s.descriptor = syn.descriptors.col(si);
    s.target = *coord;
    s.source_frame = syn.frame_id;
    s.keypoint = syn.keypoints.col(si);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<LabeledSample> transfer_labels(
    const MatchSet& m, const Frame& ref,
    const std::vector<Eigen::Vector3d>& ref_coords, const Frame& syn) {
  std::vector<std::optional<Eigen::Vector3d>> opt(ref_coords.begin(),
                                                  ref_coords.end());
  return transfer_labels(m, ref, opt, syn);
}

}  // namespace descsyn
