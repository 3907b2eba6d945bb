#include "descsyn/pose_synthesis.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

#include "test_util.hpp"

using namespace descsyn;
namespace tu = descsyn::testutil;

namespace {

const PinholeIntrinsics kIntr{500, 500, 320, 240, 640, 480};

PoseEntry make_entry(const std::string& id, const Eigen::Vector3d& t,
                     const Eigen::Matrix3d& r = Eigen::Matrix3d::Identity()) {
  PoseEntry e;
  e.id = id;
  e.pose.rotation = r;
  e.pose.translation = t;
  e.intrinsics = kIntr;
  return e;
}

// Brute-force reference for top_k_pairs, enumerating and sorting all
// distances per anchor.
std::set<std::pair<std::string, std::string>> brute_force_pairs(
    const PoseSet& poses, int k, PairPolicy policy) {
  std::set<std::pair<std::string, std::string>> result;
  for (const auto& anchor : poses.entries) {
    std::vector<std::pair<double, std::string>> dists;
    for (const auto& other : poses.entries) {
      if (other.id == anchor.id) continue;
      dists.emplace_back(
          (other.pose.translation - anchor.pose.translation).squaredNorm(),
          other.id);
    }
    std::sort(dists.begin(), dists.end());
    for (int i = 0; i < k; ++i) {
      if (policy == PairPolicy::kPerAnchor) {
        result.insert({anchor.id, dists[i].second});
      } else {
        result.insert({std::min(anchor.id, dists[i].second),
                       std::max(anchor.id, dists[i].second)});
      }
    }
  }
  return result;
}

}  // namespace

TEST_CASE("pairwise_distances uses squared Euclidean norms") {
  PoseSet poses;
  poses.entries.push_back(make_entry("a", {0, 0, 0}));
  poses.entries.push_back(make_entry("b", {3, 4, 0}));
  const auto dists = pairwise_distances(poses, "a");
  REQUIRE(dists.size() == 1);
  CHECK(dists[0].first == "b");
  CHECK(dists[0].second == doctest::Approx(25.0));  // 3-4-5 triangle, squared
}

TEST_CASE("pairwise_distances covers every other pose once") {
  PoseSet poses;
  poses.entries.push_back(make_entry("a", {0, 0, 0}));
  poses.entries.push_back(make_entry("b", {1, 0, 0}));
  poses.entries.push_back(make_entry("c", {2, 0, 0}));
  const auto dists = pairwise_distances(poses, "a");
  REQUIRE(dists.size() == 2);
  CHECK(dists[0].second == doctest::Approx(1.0));
  CHECK(dists[1].second == doctest::Approx(4.0));

  CHECK_THROWS_AS(pairwise_distances(poses, "nope"), std::invalid_argument);
}

TEST_CASE("top_k_pairs per-anchor picks k nearest per anchor") {
  PoseSet poses;
  poses.entries.push_back(make_entry("a", {0, 0, 0}));
  poses.entries.push_back(make_entry("b", {1, 0, 0}));
  poses.entries.push_back(make_entry("c", {5, 0, 0}));
  InterpConfig cfg;
  cfg.k = 1;
  cfg.pair_policy = PairPolicy::kPerAnchor;
  const auto pairs = top_k_pairs(poses, cfg);
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0] == std::pair<std::string, std::string>("a", "b"));
  CHECK(pairs[1] == std::pair<std::string, std::string>("b", "a"));
  CHECK(pairs[2] == std::pair<std::string, std::string>("c", "b"));
}

TEST_CASE("top_k_pairs dedup collapses mutual nearest neighbours") {
  PoseSet poses;
  poses.entries.push_back(make_entry("a", {0, 0, 0}));
  poses.entries.push_back(make_entry("b", {1, 0, 0}));
  InterpConfig cfg;
  cfg.k = 1;
  cfg.pair_policy = PairPolicy::kDedupUnordered;
  const auto pairs = top_k_pairs(poses, cfg);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0] == std::pair<std::string, std::string>("a", "b"));
}

TEST_CASE("top_k_pairs on a square keeps edges, drops diagonals") {
  PoseSet poses;
  poses.entries.push_back(make_entry("a", {0, 0, 0}));
  poses.entries.push_back(make_entry("b", {1, 0, 0}));
  poses.entries.push_back(make_entry("c", {1, 1, 0}));
  poses.entries.push_back(make_entry("d", {0, 1, 0}));
  InterpConfig cfg;
  cfg.k = 2;
  cfg.pair_policy = PairPolicy::kDedupUnordered;
  const auto pairs = top_k_pairs(poses, cfg);
  CHECK(pairs.size() == 4);
  const std::set<std::pair<std::string, std::string>> got(pairs.begin(),
                                                          pairs.end());
  CHECK(got == brute_force_pairs(poses, 2, PairPolicy::kDedupUnordered));
  CHECK(got.count({"a", "c"}) == 0);  // diagonal
  CHECK(got.count({"b", "d"}) == 0);
}

TEST_CASE("top_k_pairs breaks distance ties by smaller id") {
  PoseSet poses;
  poses.entries.push_back(make_entry("m", {0, 0, 0}));
  poses.entries.push_back(make_entry("z", {1, 0, 0}));
  poses.entries.push_back(make_entry("b", {-1, 0, 0}));  // same distance as z
  InterpConfig cfg;
  cfg.k = 1;
  cfg.pair_policy = PairPolicy::kPerAnchor;
  const auto pairs = top_k_pairs(poses, cfg);
  CHECK(pairs[0] == std::pair<std::string, std::string>("m", "b"));
}

TEST_CASE("top_k_pairs rejects k >= pose count") {
  PoseSet poses;
  poses.entries.push_back(make_entry("a", {0, 0, 0}));
  poses.entries.push_back(make_entry("b", {1, 0, 0}));
  InterpConfig cfg;
  cfg.k = 2;
  CHECK_THROWS_AS(top_k_pairs(poses, cfg), std::invalid_argument);
}

TEST_CASE("synthesize_poses samples the segment uniformly, endpoints excluded") {
  PoseSet poses;
  poses.entries.push_back(make_entry("a", {0, 0, 0}));
  poses.entries.push_back(make_entry("b", {1, 0, 0}));
  InterpConfig cfg;
  cfg.k = 1;
  cfg.n_samples = 3;
  cfg.pair_policy = PairPolicy::kDedupUnordered;
  const auto novel = synthesize_poses(poses, cfg);
  REQUIRE(novel.size() == 3);
  CHECK(novel[0].pose.translation.x() == 0.25);  // n/(N+1), exact in binary
  CHECK(novel[1].pose.translation.x() == 0.5);
  CHECK(novel[2].pose.translation.x() == 0.75);
  for (const auto& np : novel) {
    CHECK(np.pose.translation.y() == 0.0);
    CHECK((np.pose.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-12);
    CHECK(np.anchor_a == "a");
    CHECK(np.anchor_b == "b");
    CHECK(np.delta > 0.0);
    CHECK(np.delta < 1.0);
  }
}

TEST_CASE("40 reference poses with per-anchor k=1 yield 1600 novel poses") {
  Rng rng(777);
  PoseSet poses;
  for (int i = 0; i < 40; ++i) {
    poses.entries.push_back(
        make_entry("p" + std::to_string(100 + i),
                   Eigen::Vector3d(rng.uniform(-2, 2), rng.uniform(-2, 2),
                                   rng.uniform(-2, 2)),
                   tu::random_rotation(rng)));
  }
  InterpConfig cfg;
  cfg.k = 1;
  cfg.n_samples = 40;
  cfg.pair_policy = PairPolicy::kPerAnchor;
  const auto novel = synthesize_poses(poses, cfg);
  CHECK(novel.size() == 40 * 40);
}

TEST_CASE("synthesize_poses midpoint rotation halves a z-rotation") {
  PoseSet poses;
  poses.entries.push_back(make_entry("a", {0, 0, 0}));
  poses.entries.push_back(make_entry("b", {1, 0, 0}, tu::rot_z(M_PI / 2)));
  InterpConfig cfg;
  cfg.k = 1;
  cfg.n_samples = 1;
  cfg.pair_policy = PairPolicy::kDedupUnordered;
  const auto novel = synthesize_poses(poses, cfg);
  REQUIRE(novel.size() == 1);
  CHECK((novel[0].pose.rotation - tu::rot_z(M_PI / 4)).norm() < 1e-12);
  CHECK(novel[0].delta == 0.5);
}

TEST_CASE("synthesis is deterministic, bit for bit") {
  Rng rng(2024);
  PoseSet poses;
  for (int i = 0; i < 8; ++i) {
    poses.entries.push_back(make_entry(
        "v" + std::to_string(i),
        Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1),
                        rng.uniform(-1, 1)),
        tu::random_rotation(rng)));
  }
  InterpConfig cfg;
  cfg.k = 3;
  cfg.n_samples = 7;
  const auto a = synthesize_poses(poses, cfg);
  const auto b = synthesize_poses(poses, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].pose.translation == b[i].pose.translation);
    CHECK(a[i].pose.rotation == b[i].pose.rotation);
    CHECK(a[i].delta == b[i].delta);
    CHECK(a[i].anchor_a == b[i].anchor_a);
    CHECK(a[i].anchor_b == b[i].anchor_b);
  }
}

TEST_CASE("count law, segment membership and rotation fraction hold on "
          "randomized sets") {
  Rng rng(90210);
  for (int trial = 0; trial < 12; ++trial) {
    const int n_poses = 3 + static_cast<int>(rng.uniform_u64(10));
    PoseSet poses;
    for (int i = 0; i < n_poses; ++i) {
      poses.entries.push_back(make_entry(
          "t" + std::to_string(10 + i),
          Eigen::Vector3d(rng.uniform(-2, 2), rng.uniform(-2, 2),
                          rng.uniform(-2, 2)),
          tu::random_rotation(rng)));
    }
    InterpConfig cfg;
    cfg.k = 1 + static_cast<int>(rng.uniform_u64(
                    static_cast<std::uint64_t>(std::min(4, n_poses - 1))));
    cfg.n_samples = 1 + static_cast<int>(rng.uniform_u64(10));
    cfg.pair_policy = trial % 2 == 0 ? PairPolicy::kPerAnchor
                                     : PairPolicy::kDedupUnordered;

    const auto pairs = top_k_pairs(poses, cfg);
    const auto expected = brute_force_pairs(poses, cfg.k, cfg.pair_policy);
    if (cfg.pair_policy == PairPolicy::kPerAnchor) {
      CHECK(pairs.size() == static_cast<std::size_t>(n_poses) * cfg.k);
    } else {
      CHECK(pairs.size() == expected.size());
    }

    const auto novel = synthesize_poses(poses, cfg);
    CHECK(novel.size() == pairs.size() * static_cast<std::size_t>(cfg.n_samples));

    for (const auto& np : novel) {
      const Eigen::Vector3d ta = poses.at(np.anchor_a).pose.translation;
      const Eigen::Vector3d tb = poses.at(np.anchor_b).pose.translation;
      const Eigen::Vector3d seg = tb - ta;
      const Eigen::Vector3d off = np.pose.translation - ta;
      CHECK(off.cross(seg).norm() < 1e-9);  // on the line
      if (seg.squaredNorm() > 0) {
        const double ratio = off.dot(seg) / seg.squaredNorm();
        CHECK(ratio > 0.0);
        CHECK(ratio < 1.0);
      }
      // No novel pose coincides with a reference pose.
      for (const auto& e : poses.entries) {
        const bool same_t =
            (np.pose.translation - e.pose.translation).norm() < 1e-12;
        const bool same_r = (np.pose.rotation - e.pose.rotation).norm() < 1e-12;
        CHECK_FALSE((same_t && same_r));
      }
      // Rotation advances by delta times the anchor-to-anchor angle.
      const double full = rotation_angle_deg<double>(
          poses.at(np.anchor_a).pose.rotation,
          poses.at(np.anchor_b).pose.rotation);
      const double part = rotation_angle_deg<double>(
          poses.at(np.anchor_a).pose.rotation, np.pose.rotation);
      CHECK(std::abs(part - np.delta * full) * M_PI / 180.0 < 1e-6);
    }
  }
}

TEST_CASE("coincident camera translations still interpolate") {
  PoseSet poses;
  poses.entries.push_back(make_entry("a", {1, 1, 1}));
  poses.entries.push_back(make_entry("b", {1, 1, 1}, tu::rot_z(M_PI / 2)));
  InterpConfig cfg;
  cfg.k = 1;
  cfg.n_samples = 1;
  cfg.pair_policy = PairPolicy::kDedupUnordered;
  const auto novel = synthesize_poses(poses, cfg);
  REQUIRE(novel.size() == 1);
  CHECK((novel[0].pose.translation - Eigen::Vector3d(1, 1, 1)).norm() == 0.0);
  CHECK((novel[0].pose.rotation - tu::rot_z(M_PI / 4)).norm() < 1e-12);
}

TEST_CASE("novel poses inherit anchor_a intrinsics") {
  PoseSet poses;
  poses.entries.push_back(make_entry("a", {0, 0, 0}));
  poses.entries.back().intrinsics.fx = 123;
  poses.entries.push_back(make_entry("b", {1, 0, 0}));
  InterpConfig cfg;
  cfg.k = 1;
  cfg.n_samples = 2;
  cfg.pair_policy = PairPolicy::kDedupUnordered;
  const auto novel = synthesize_poses(poses, cfg);
  for (const auto& np : novel) CHECK(np.intrinsics.fx == 123);
}
