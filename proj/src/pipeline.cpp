#include "descsyn/pipeline.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "descsyn/io/colmap.hpp"

namespace descsyn {

namespace {

double to_double(const std::string& tok, const std::string& context) {
  double v = 0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    throw std::invalid_argument(context + ": bad real '" + tok + "'");
  }
  return v;
}

long long to_int(const std::string& tok, const std::string& context) {
  long long v = 0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    throw std::invalid_argument(context + ": bad integer '" + tok + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& tok, const std::string& context) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    throw std::invalid_argument(context + ": bad unsigned '" + tok + "'");
  }
  return v;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> tokens;
  std::istringstream ss(s);
  std::string tok;
  while (ss >> tok) tokens.push_back(tok);
  return tokens;
}

std::string policy_name(PairPolicy p) {
  return p == PairPolicy::kPerAnchor ? "per-anchor" : "dedup-unordered";
}

PairPolicy policy_from_name(const std::string& name) {
  if (name == "per-anchor") return PairPolicy::kPerAnchor;
  if (name == "dedup-unordered") return PairPolicy::kDedupUnordered;
  throw std::invalid_argument("unknown pair_policy '" + name + "'");
}

}  // namespace

void RunConfig::validate() const {
  if (landmark_count < 1) throw std::invalid_argument("config: landmark_count must be >= 1");
  if (descriptor_dim < 1) throw std::invalid_argument("config: descriptor_dim must be >= 1");
  if (view_strength < 0) throw std::invalid_argument("config: view_strength must be >= 0");
  if (bounds.empty()) throw std::invalid_argument("config: empty bounds");
  if (train_views < 2) throw std::invalid_argument("config: train_views must be >= 2");
  if (query_views < 1) throw std::invalid_argument("config: query_views must be >= 1");
  if (!(camera_radius_min > 0) || camera_radius_max < camera_radius_min) {
    throw std::invalid_argument("config: camera radii must satisfy 0 < min <= max");
  }
  if (!(camera_cap_deg > 0) || camera_cap_deg > 180) {
    throw std::invalid_argument("config: camera_cap_deg must be in (0, 180]");
  }
  intrinsics.validate();
  if (interp.k < 1 || interp.k >= train_views) {
    throw std::invalid_argument("config: pair_k must satisfy 1 <= k < train_views");
  }
  if (interp.n_samples < 1) throw std::invalid_argument("config: samples_per_pair must be >= 1");
  render.validate();
  if (!(match_ratio > 0)) throw std::invalid_argument("config: match_ratio must be > 0");
  if (match_min_score < -1 || match_min_score > 1) {
    throw std::invalid_argument("config: match_min_score must be in [-1, 1]");
  }
  if (eta < 0) throw std::invalid_argument("config: eta must be >= 0");
  train.validate();
  if (uncertainty_floor < 0 || uncertainty_floor > 1) {
    throw std::invalid_argument("config: uncertainty_floor must be in [0, 1]");
  }
  ransac.validate();
}

int RunConfig::effective_eta() const {
  return descsyn::effective_eta(eta, render.max_keypoints);
}

std::string RunConfig::serialized() const {
  std::string out;
  const auto add = [&out](const std::string& key, const std::string& value) {
    out += key + " = " + value + "\n";
  };
  add("seed", std::to_string(seed));
  add("landmark_count", std::to_string(landmark_count));
  add("descriptor_dim", std::to_string(descriptor_dim));
  add("view_strength", format_real(view_strength));
  add("bounds", format_real(bounds.min.x()) + " " + format_real(bounds.min.y()) +
                    " " + format_real(bounds.min.z()) + " " +
                    format_real(bounds.max.x()) + " " +
                    format_real(bounds.max.y()) + " " +
                    format_real(bounds.max.z()));
  add("train_views", std::to_string(train_views));
  add("query_views", std::to_string(query_views));
  add("camera_radius_min", format_real(camera_radius_min));
  add("camera_radius_max", format_real(camera_radius_max));
  add("camera_cap_deg", format_real(camera_cap_deg));
  add("target_jitter", format_real(target_jitter));
  add("roll_jitter_deg", format_real(roll_jitter_deg));
  add("fx", format_real(intrinsics.fx));
  add("fy", format_real(intrinsics.fy));
  add("cx", format_real(intrinsics.cx));
  add("cy", format_real(intrinsics.cy));
  add("width", std::to_string(intrinsics.width));
  add("height", std::to_string(intrinsics.height));
  add("pair_k", std::to_string(interp.k));
  add("pair_policy", policy_name(interp.pair_policy));
  add("samples_per_pair", std::to_string(interp.n_samples));
  add("pixel_noise_sigma", format_real(render.pixel_noise_sigma));
  add("descriptor_noise_sigma", format_real(render.descriptor_noise_sigma));
  add("artifact_prob", format_real(render.artifact_prob));
  add("artifact_fraction", format_real(render.artifact_fraction));
  add("max_keypoints", std::to_string(render.max_keypoints));
  add("match_ratio", format_real(match_ratio));
  add("match_min_score", format_real(match_min_score));
  add("eta", std::to_string(eta));
  add("learning_rate", format_real(train.learning_rate));
  add("decay_factor", format_real(train.decay_factor));
  add("decay_interval", std::to_string(train.decay_interval));
  add("batch_size", std::to_string(train.batch_size));
  add("epochs", std::to_string(train.epochs));
  add("adam_beta1", format_real(train.adam_beta1));
  add("adam_beta2", format_real(train.adam_beta2));
  add("adam_epsilon", format_real(train.adam_epsilon));
  add("uncertainty_floor", format_real(uncertainty_floor));
  add("ransac_max_iterations", std::to_string(ransac.max_iterations));
  add("ransac_inlier_threshold", format_real(ransac.inlier_threshold));
  add("ransac_confidence", format_real(ransac.confidence));
  add("ransac_min_inliers", std::to_string(ransac.min_inliers));
  return out;
}

std::uint64_t RunConfig::config_hash() const {
  const std::string text = serialized();
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const char c : text) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const std::string ctx = "config key '" + key + "'";
  if (key == "seed") seed = to_u64(value, ctx);
  else if (key == "landmark_count") landmark_count = static_cast<int>(to_int(value, ctx));
  else if (key == "descriptor_dim") descriptor_dim = static_cast<int>(to_int(value, ctx));
  else if (key == "view_strength") view_strength = to_double(value, ctx);
  else if (key == "bounds") {
    const auto tokens = split_ws(value);
    if (tokens.size() != 6) throw std::invalid_argument(ctx + ": expects 6 reals");
    for (int a = 0; a < 3; ++a) bounds.min[a] = to_double(tokens[a], ctx);
    for (int a = 0; a < 3; ++a) bounds.max[a] = to_double(tokens[3 + a], ctx);
  }
  else if (key == "train_views") train_views = static_cast<int>(to_int(value, ctx));
  else if (key == "query_views") query_views = static_cast<int>(to_int(value, ctx));
  else if (key == "camera_radius_min") camera_radius_min = to_double(value, ctx);
  else if (key == "camera_radius_max") camera_radius_max = to_double(value, ctx);
  else if (key == "camera_cap_deg") camera_cap_deg = to_double(value, ctx);
  else if (key == "target_jitter") target_jitter = to_double(value, ctx);
  else if (key == "roll_jitter_deg") roll_jitter_deg = to_double(value, ctx);
  else if (key == "fx") intrinsics.fx = to_double(value, ctx);
  else if (key == "fy") intrinsics.fy = to_double(value, ctx);
  else if (key == "cx") intrinsics.cx = to_double(value, ctx);
  else if (key == "cy") intrinsics.cy = to_double(value, ctx);
  else if (key == "width") intrinsics.width = static_cast<int>(to_int(value, ctx));
  else if (key == "height") intrinsics.height = static_cast<int>(to_int(value, ctx));
  else if (key == "pair_k") interp.k = static_cast<int>(to_int(value, ctx));
  else if (key == "pair_policy") interp.pair_policy = policy_from_name(value);
  else if (key == "samples_per_pair") interp.n_samples = static_cast<int>(to_int(value, ctx));
  else if (key == "pixel_noise_sigma") render.pixel_noise_sigma = to_double(value, ctx);
  else if (key == "descriptor_noise_sigma") render.descriptor_noise_sigma = to_double(value, ctx);
  else if (key == "artifact_prob") render.artifact_prob = to_double(value, ctx);
  else if (key == "artifact_fraction") render.artifact_fraction = to_double(value, ctx);
  else if (key == "max_keypoints") render.max_keypoints = static_cast<int>(to_int(value, ctx));
  else if (key == "match_ratio") match_ratio = to_double(value, ctx);
  else if (key == "match_min_score") match_min_score = to_double(value, ctx);
  else if (key == "eta") eta = static_cast<int>(to_int(value, ctx));
  else if (key == "learning_rate") train.learning_rate = to_double(value, ctx);
  else if (key == "decay_factor") train.decay_factor = to_double(value, ctx);
  else if (key == "decay_interval") train.decay_interval = static_cast<int>(to_int(value, ctx));
  else if (key == "batch_size") train.batch_size = static_cast<int>(to_int(value, ctx));
  else if (key == "epochs") train.epochs = static_cast<int>(to_int(value, ctx));
  else if (key == "adam_beta1") train.adam_beta1 = to_double(value, ctx);
  else if (key == "adam_beta2") train.adam_beta2 = to_double(value, ctx);
  else if (key == "adam_epsilon") train.adam_epsilon = to_double(value, ctx);
  else if (key == "uncertainty_floor") uncertainty_floor = to_double(value, ctx);
  else if (key == "ransac_max_iterations") ransac.max_iterations = static_cast<int>(to_int(value, ctx));
  else if (key == "ransac_inlier_threshold") ransac.inlier_threshold = to_double(value, ctx);
  else if (key == "ransac_confidence") ransac.confidence = to_double(value, ctx);
  else if (key == "ransac_min_inliers") ransac.min_inliers = static_cast<int>(to_int(value, ctx));
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> all = {
      "seed", "landmark_count", "descriptor_dim", "view_strength", "bounds",
      "train_views", "query_views", "camera_radius_min", "camera_radius_max",
      "camera_cap_deg", "target_jitter", "roll_jitter_deg", "fx", "fy", "cx", "cy", "width",
      "height", "pair_k", "pair_policy", "samples_per_pair",
      "pixel_noise_sigma", "descriptor_noise_sigma", "artifact_prob",
      "artifact_fraction", "max_keypoints", "match_ratio", "match_min_score",
      "eta", "learning_rate", "decay_factor", "decay_interval", "batch_size",
      "epochs", "adam_beta1", "adam_beta2", "adam_epsilon",
      "uncertainty_floor", "ransac_max_iterations", "ransac_inlier_threshold",
      "ransac_confidence", "ransac_min_inliers"};
  return all;
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected 'key = value'");
    }
    const auto trim = [](std::string s) {
      const std::size_t b = s.find_first_not_of(" \t");
      const std::size_t e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": empty key");
    }
    cfg.set(key, value);
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  return from_text(read_file(path));
}

RunConfig RunConfig::benchmark_default() {
  RunConfig cfg;
  cfg.seed = 1;
  cfg.landmark_count = 500;
  cfg.descriptor_dim = 64;
  cfg.view_strength = 0.4;
  cfg.train_views = 12;
  cfg.query_views = 40;
  cfg.camera_cap_deg = 70.0;
  cfg.interp.k = 3;
  cfg.interp.n_samples = 10;
  cfg.render.max_keypoints = 128;
  cfg.render.pixel_noise_sigma = 1.0;
  cfg.render.descriptor_noise_sigma = 0.01;
  cfg.render.artifact_prob = 0.15;
  cfg.render.artifact_fraction = 0.9;
  cfg.match_min_score = 0.6;
  cfg.train.epochs = 30;
  cfg.train.decay_interval = 10;
  return cfg;
}

SyntheticScene make_scene(const RunConfig& cfg) {
  return generate_scene(cfg.seed, cfg.landmark_count, cfg.bounds,
                        cfg.descriptor_dim, cfg.view_strength);
}

SE3Pose look_at_pose(const Eigen::Vector3d& center,
                     const Eigen::Vector3d& target, double roll_rad) {
  Eigen::Vector3d z = target - center;
  if (z.norm() < 1e-12) {
    throw std::invalid_argument("look_at_pose: target coincides with center");
  }
  z.normalize();
  Eigen::Vector3d up(0, 0, 1);
  if (std::abs(z.dot(up)) > 0.999) up = Eigen::Vector3d(0, 1, 0);
  Eigen::Vector3d x = z.cross(up).normalized();
  Eigen::Vector3d y = z.cross(x);
  const Eigen::Vector3d xr = std::cos(roll_rad) * x + std::sin(roll_rad) * y;
  const Eigen::Vector3d yr = -std::sin(roll_rad) * x + std::cos(roll_rad) * y;

  SE3Pose pose;
  pose.rotation.row(0) = xr.transpose();
  pose.rotation.row(1) = yr.transpose();
  pose.rotation.row(2) = z.transpose();
  pose.translation = -(pose.rotation * center);
  return pose;
}

namespace {

PoseSet make_pose_set(const RunConfig& cfg, int count,
                      const std::string& prefix, std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::Vector3d scene_center = cfg.bounds.center();
  const double cos_cap = std::cos(cfg.camera_cap_deg * M_PI / 180.0);
  PoseSet set;
  set.entries.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    // Uniform over the spherical sector about +z.
    const double cos_theta = rng.uniform(cos_cap, 1.0);
    const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    const Eigen::Vector3d dir(sin_theta * std::cos(phi),
                              sin_theta * std::sin(phi), cos_theta);
    const double radius =
        rng.uniform(cfg.camera_radius_min, cfg.camera_radius_max);
    const Eigen::Vector3d center = scene_center + radius * dir;
    Eigen::Vector3d target = scene_center;
    for (int a = 0; a < 3; ++a) {
      target[a] += cfg.target_jitter * rng.uniform(-1.0, 1.0);
    }
    const double roll =
        rng.uniform(-cfg.roll_jitter_deg, cfg.roll_jitter_deg) * M_PI / 180.0;
    set.entries.push_back(
        {format_frame_id(prefix, i), look_at_pose(center, target, roll),
         cfg.intrinsics});
  }
  return set;
}

}  // namespace

PoseSet make_training_poses(const RunConfig& cfg) {
  return make_pose_set(cfg, cfg.train_views, "train", cfg.train_pose_seed());
}

PoseSet make_query_poses(const RunConfig& cfg) {
  return make_pose_set(cfg, cfg.query_views, "query", cfg.query_pose_seed());
}

std::vector<RenderedView> render_pose_set(const SyntheticScene& scene,
                                          const PoseSet& poses,
                                          const RunConfig& cfg,
                                          std::uint64_t ordinal_base,
                                          bool synthetic) {
  std::vector<RenderedView> views;
  views.reserve(poses.entries.size());
  for (std::size_t i = 0; i < poses.entries.size(); ++i) {
    const PoseEntry& e = poses.entries[i];
    RenderedView rv = render_view(scene, e.pose, e.intrinsics, cfg.render,
                                  cfg.seed ^ (ordinal_base + i));
    rv.frame.frame_id = e.id;
    rv.frame.is_synthetic = synthetic;
    views.push_back(std::move(rv));
  }
  return views;
}

std::vector<RenderedView> render_novel_views(
    const SyntheticScene& scene, const std::vector<NovelPose>& novel,
    const RunConfig& cfg) {
  std::vector<RenderedView> views;
  views.reserve(novel.size());
  for (std::size_t i = 0; i < novel.size(); ++i) {
    RenderedView rv = render_view(scene, novel[i].pose, novel[i].intrinsics,
                                  cfg.render, cfg.seed ^ (kNovelOrdinalBase + i));
    rv.frame.frame_id = format_frame_id("novel", static_cast<int>(i));
    rv.frame.is_synthetic = true;
    views.push_back(std::move(rv));
  }
  return views;
}

std::vector<ProvenanceEntry> novel_provenance(
    const std::vector<NovelPose>& novel) {
  std::vector<ProvenanceEntry> out;
  out.reserve(novel.size());
  for (std::size_t i = 0; i < novel.size(); ++i) {
    out.push_back({format_frame_id("novel", static_cast<int>(i)),
                   novel[i].anchor_a, novel[i].anchor_b,
                   novel[i].sample_index, novel[i].delta});
  }
  return out;
}

std::string write_provenance_csv(const std::vector<ProvenanceEntry>& entries) {
  std::string out = "novel_id,anchor_a,anchor_b,sample_index,delta\n";
  for (const auto& e : entries) {
    out += e.novel_id + "," + e.anchor_a + "," + e.anchor_b + "," +
           std::to_string(e.sample_index) + "," + format_real(e.delta) + "\n";
  }
  return out;
}

std::vector<ProvenanceEntry> parse_provenance_csv(const std::string& text) {
  std::vector<ProvenanceEntry> out;
  std::istringstream ss(text);
  std::string line;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 5) {
      throw std::invalid_argument("provenance line " +
                                  std::to_string(line_no) +
                                  ": expected 5 fields");
    }
    ProvenanceEntry e;
    e.novel_id = fields[0];
    e.anchor_a = fields[1];
    e.anchor_b = fields[2];
    e.sample_index = static_cast<int>(to_int(fields[3], "provenance"));
    e.delta = to_double(fields[4], "provenance");
    out.push_back(std::move(e));
  }
  return out;
}

MatchFilterOutput match_and_filter(
    const SyntheticScene& scene, const std::vector<Frame>& train_frames,
    const std::vector<Frame>& novel_frames,
    const std::vector<ProvenanceEntry>& provenance, const RunConfig& cfg,
    const std::unordered_map<std::string, bool>& corrupted_by_id) {
  std::unordered_map<std::string, const Frame*> train_by_id;
  for (const Frame& f : train_frames) train_by_id[f.frame_id] = &f;
  std::unordered_map<std::string, const ProvenanceEntry*> prov_by_id;
  for (const auto& p : provenance) prov_by_id[p.novel_id] = &p;

  // Ground-truth coordinates of the training keypoints, computed once per
  // anchor frame.
  std::unordered_map<std::string, std::vector<Eigen::Vector3d>> coords_by_id;

  const int eta_eff = cfg.effective_eta();
  MatchFilterOutput out;
  for (const Frame& novel : novel_frames) {
    const auto prov_it = prov_by_id.find(novel.frame_id);
    if (prov_it == prov_by_id.end()) {
      throw std::invalid_argument("match_and_filter: no provenance for " +
                                  novel.frame_id);
    }
    const std::string& anchor_id = prov_it->second->anchor_a;
    const auto train_it = train_by_id.find(anchor_id);
    if (train_it == train_by_id.end()) {
      throw std::invalid_argument("match_and_filter: unknown anchor " +
                                  anchor_id);
    }
    const Frame& ref = *train_it->second;

    const MatchSet m =
        match_descriptors(ref, novel, cfg.match_ratio, cfg.match_min_score);
    const FilterDecision decision = filter_frame(m, eta_eff);

    MatchFilterRow row;
    row.novel_id = novel.frame_id;
    row.anchor_a = anchor_id;
    row.match_count = decision.match_count;
    row.threshold = eta_eff;
    row.accepted = decision.accepted;
    if (const auto it = corrupted_by_id.find(novel.frame_id);
        it != corrupted_by_id.end()) {
      row.corrupted = it->second;
    }
    out.rows.push_back(row);
    if (!decision.accepted) continue;

    auto& ref_coords = coords_by_id[anchor_id];
    if (ref_coords.empty()) ref_coords = gt_coordinates(scene, ref);
    const std::vector<LabeledSample> samples =
        transfer_labels(m, ref, ref_coords, novel);

    DatasetFrame df;
    df.frame.frame_id = novel.frame_id;
    df.frame.pose = novel.pose;
    df.frame.intrinsics = novel.intrinsics;
    df.frame.is_synthetic = true;
    const auto n = static_cast<Eigen::Index>(samples.size());
    df.frame.keypoints.resize(2, n);
    df.frame.descriptors.resize(novel.descriptors.rows(), n);
    df.coords = Eigen::Matrix3Xd(3, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const LabeledSample& s = samples[static_cast<std::size_t>(i)];
      df.frame.keypoints.col(i) = s.keypoint;
      df.frame.descriptors.col(i) = s.descriptor;
      df.coords->col(i) = s.target;
    }
    out.labeled.push_back(std::move(df));
  }
  return out;
}

std::string write_match_report_csv(const std::vector<MatchFilterRow>& rows) {
  std::string out =
      "novel_id,anchor_a,match_count,threshold,accepted,corrupted\n";
  for (const auto& r : rows) {
    out += r.novel_id + "," + r.anchor_a + "," +
           std::to_string(r.match_count) + "," + std::to_string(r.threshold) +
           "," + (r.accepted ? "1" : "0") + "," + (r.corrupted ? "1" : "0") +
           "\n";
  }
  // Match-count distribution over all novel frames, box-plot style.
  if (!rows.empty()) {
    std::vector<double> counts;
    counts.reserve(rows.size());
    for (const auto& r : rows) counts.push_back(r.match_count);
    std::sort(counts.begin(), counts.end());
    const auto pct = [&counts](double q) {
      const double idx = q * static_cast<double>(counts.size() - 1);
      const std::size_t lo = static_cast<std::size_t>(idx);
      const std::size_t hi = std::min(lo + 1, counts.size() - 1);
      const double frac = idx - static_cast<double>(lo);
      return counts[lo] * (1 - frac) + counts[hi] * frac;
    };
    int accepted = 0;
    for (const auto& r : rows) accepted += r.accepted ? 1 : 0;
    out += "# accepted " + std::to_string(accepted) + " of " +
           std::to_string(rows.size()) + "\n";
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "# match_count percentiles p0=%g p25=%g p50=%g p75=%g "
                  "p100=%g\n",
                  pct(0.0), pct(0.25), pct(0.5), pct(0.75), pct(1.0));
    out += buf;
  }
  return out;
}

std::vector<FrameSamples> samples_from_gt_frames(
    const SyntheticScene& scene, const std::vector<Frame>& frames) {
  std::vector<FrameSamples> out;
  out.reserve(frames.size());
  for (const Frame& f : frames) {
    const std::vector<Eigen::Vector3d> coords = gt_coordinates(scene, f);
    FrameSamples fs;
    fs.frame_id = f.frame_id;
    fs.descriptors = f.descriptors;
    fs.targets.resize(3, f.size());
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      fs.targets.col(i) = coords[static_cast<std::size_t>(i)];
    }
    out.push_back(std::move(fs));
  }
  return out;
}

std::vector<FrameSamples> samples_from_labeled(
    const std::vector<DatasetFrame>& labeled) {
  std::vector<FrameSamples> out;
  out.reserve(labeled.size());
  for (const DatasetFrame& df : labeled) {
    if (!df.coords.has_value()) {
      throw std::invalid_argument("samples_from_labeled: frame '" +
                                  df.frame.frame_id + "' has no coords block");
    }
    FrameSamples fs;
    fs.frame_id = df.frame.frame_id;
    fs.descriptors = df.frame.descriptors;
    fs.targets = *df.coords;
    out.push_back(std::move(fs));
  }
  return out;
}

EvaluationResult evaluate_frames(const RegressorParams& params,
                                 const std::vector<Frame>& query_frames,
                                 const RunConfig& cfg,
                                 const std::string& run_label) {
  if (query_frames.empty()) {
    throw std::invalid_argument("evaluate_frames: no query frames");
  }
  EvaluationResult result;
  const std::uint64_t ransac_base = cfg.ransac_seed();
  for (std::size_t qi = 0; qi < query_frames.size(); ++qi) {
    const Frame& frame = query_frames[qi];
    const auto preds = predict_frame(params, frame, cfg.uncertainty_floor);
    std::vector<Correspondence> corrs;
    corrs.reserve(preds.size());
    for (const auto& p : preds) corrs.push_back({p.pixel, p.point});

    PoseEstimate estimate;
    if (corrs.size() >= 6) {
      RansacConfig rc = cfg.ransac;
      rc.seed = mix_seed(ransac_base, qi);
      estimate = ransac_pnp(corrs, frame.intrinsics, rc);
    }

    const auto [trans_cm, rot_deg] = pose_errors(estimate.pose, frame.pose);
    EvalRow row;
    row.run_label = run_label;
    row.frame_id = frame.frame_id;
    row.trans_err_cm = trans_cm;
    row.rot_err_deg = rot_deg;
    row.inliers = static_cast<int>(estimate.inlier_indices.size());
    row.converged = estimate.converged;
    if (!row.converged) ++result.nonconverged;
    result.rows.push_back(std::move(row));
  }

  const bool exclude =
      result.nonconverged > 0 &&
      static_cast<double>(result.nonconverged) <
          0.05 * static_cast<double>(result.rows.size());
  result.flagged =
      result.nonconverged > 0 && !exclude;

  std::vector<double> trans, rot;
  double trans_sum = 0, rot_sum = 0;
  for (const auto& row : result.rows) {
    if (exclude && !row.converged) continue;
    trans.push_back(row.trans_err_cm);
    rot.push_back(row.rot_err_deg);
    trans_sum += row.trans_err_cm;
    rot_sum += row.rot_err_deg;
  }
  result.median_trans_cm = median(trans);
  result.median_rot_deg = median(rot);
  result.mean_trans_cm = trans_sum / static_cast<double>(trans.size());
  result.mean_rot_deg = rot_sum / static_cast<double>(rot.size());
  return result;
}

BenchmarkRun run_benchmark_point(RunConfig cfg, int train_views,
                                 std::uint64_t seed, bool with_augmented) {
  cfg.train_views = train_views;
  cfg.seed = seed;
  cfg.validate();

  const SyntheticScene scene = make_scene(cfg);
  const PoseSet train_poses = make_training_poses(cfg);
  const PoseSet query_poses = make_query_poses(cfg);

  std::vector<Frame> train_frames;
  for (auto& rv :
       render_pose_set(scene, train_poses, cfg, kTrainOrdinalBase, false)) {
    train_frames.push_back(std::move(rv.frame));
  }
  std::vector<Frame> query_frames;
  for (auto& rv :
       render_pose_set(scene, query_poses, cfg, kQueryOrdinalBase, false)) {
    query_frames.push_back(std::move(rv.frame));
  }

  const std::vector<FrameSamples> base_samples =
      samples_from_gt_frames(scene, train_frames);

  TrainConfig tc = cfg.train;
  tc.seed = cfg.train_seed();

  BenchmarkRun run;
  run.train_views = train_views;
  run.seed = seed;

  {
    const TrainResult tr = train(base_samples, tc);
    ArmSummary& arm = run.baseline;
    arm.loss_trace = tr.epoch_losses;
    arm.init_checksum =
        params_checksum(init_params(cfg.descriptor_dim, tc.seed));
    arm.training_frames = static_cast<int>(base_samples.size());
    for (const auto& fs : base_samples) arm.training_samples += fs.size();
    arm.eval = evaluate_frames(tr.params, query_frames, cfg, "baseline");
  }

  if (with_augmented) {
    const std::vector<NovelPose> novel = synthesize_poses(train_poses, cfg.interp);
    std::vector<Frame> novel_frames;
    std::unordered_map<std::string, bool> corrupted;
    for (auto& rv : render_novel_views(scene, novel, cfg)) {
      corrupted[rv.frame.frame_id] = rv.corrupted;
      novel_frames.push_back(std::move(rv.frame));
    }
    const MatchFilterOutput mf =
        match_and_filter(scene, train_frames, novel_frames,
                         novel_provenance(novel), cfg, corrupted);

    std::vector<FrameSamples> aug_samples = base_samples;
    for (auto& fs : samples_from_labeled(mf.labeled)) {
      aug_samples.push_back(std::move(fs));
    }

    const TrainResult tr = train(aug_samples, tc);
    ArmSummary arm;
    arm.loss_trace = tr.epoch_losses;
    arm.init_checksum =
        params_checksum(init_params(cfg.descriptor_dim, tc.seed));
    arm.training_frames = static_cast<int>(aug_samples.size());
    for (const auto& fs : aug_samples) arm.training_samples += fs.size();
    arm.synthetic_total = static_cast<int>(novel_frames.size());
    arm.synthetic_accepted = static_cast<int>(mf.labeled.size());
    arm.eval = evaluate_frames(tr.params, query_frames, cfg, "augmented");
    run.augmented = std::move(arm);

    const double base_t = run.baseline.eval.median_trans_cm;
    const double base_r = run.baseline.eval.median_rot_deg;
    if (base_t > 0) {
      run.improvement_trans_pct =
          (base_t - run.augmented->eval.median_trans_cm) / base_t * 100.0;
    }
    if (base_r > 0) {
      run.improvement_rot_pct =
          (base_r - run.augmented->eval.median_rot_deg) / base_r * 100.0;
    }
  }
  return run;
}

std::vector<BenchmarkRun> run_benchmark(const RunConfig& cfg,
                                        const std::vector<int>& views_sweep,
                                        const std::vector<std::uint64_t>& seeds,
                                        bool with_augmented) {
  std::vector<BenchmarkRun> runs;
  for (const int views : views_sweep) {
    for (const std::uint64_t seed : seeds) {
      runs.push_back(run_benchmark_point(cfg, views, seed, with_augmented));
    }
  }
  return runs;
}

std::string benchmark_report_csv(const std::vector<BenchmarkRun>& runs,
                                 const RunConfig& cfg) {
  std::string out = report_preamble(cfg);
  out +=
      "views,seed,arm,median_trans_cm,median_rot_deg,mean_trans_cm,"
      "mean_rot_deg,nonconverged,flagged,synthetic_total,synthetic_accepted,"
      "init_checksum\n";
  char buf[64];
  const auto arm_row = [&out, &buf](const BenchmarkRun& run,
                                    const std::string& name,
                                    const ArmSummary& arm) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6g,%.6g",
                  arm.eval.median_trans_cm, arm.eval.median_rot_deg,
                  arm.eval.mean_trans_cm, arm.eval.mean_rot_deg);
    out += std::to_string(run.train_views) + "," + std::to_string(run.seed) +
           "," + name + "," + buf + "," +
           std::to_string(arm.eval.nonconverged) + "," +
           (arm.eval.flagged ? "1" : "0") + "," +
           std::to_string(arm.synthetic_total) + "," +
           std::to_string(arm.synthetic_accepted) + "," +
           std::to_string(arm.init_checksum) + "\n";
  };
  for (const auto& run : runs) {
    arm_row(run, "baseline", run.baseline);
    if (run.augmented.has_value()) {
      arm_row(run, "augmented", *run.augmented);
      std::snprintf(buf, sizeof buf, "%.6g,%.6g", run.improvement_trans_pct,
                    run.improvement_rot_pct);
      out += std::to_string(run.train_views) + "," +
             std::to_string(run.seed) + ",improvement," + buf + ",,,,,,," +
             "\n";
    }
  }
  return out;
}

std::string report_preamble(const RunConfig& cfg) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(cfg.config_hash()));
  std::string out = "# config_hash ";
  out += buf;
  out += "\n";
  std::istringstream ss(cfg.serialized());
  std::string line;
  while (std::getline(ss, line)) out += "# " + line + "\n";
  return out;
}

std::string format_frame_id(const std::string& prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%05d", index);
  return prefix + buf;
}

PoseSet pose_set_from_dataset(const Dataset& ds) {
  PoseSet set;
  set.entries.reserve(ds.frames.size());
  for (const auto& df : ds.frames) {
    set.entries.push_back(
        {df.frame.frame_id, df.frame.pose, df.frame.intrinsics});
  }
  set.validate();
  return set;
}

PoseSet pose_set_from_colmap(const std::string& images_text,
                             const std::string& cameras_text) {
  const auto images = parse_colmap_images(images_text);
  const auto cameras = parse_colmap_cameras(cameras_text);
  std::unordered_map<std::uint32_t, PinholeIntrinsics> intr_by_id;
  for (const auto& c : cameras) intr_by_id[c.camera_id] = c.intrinsics();

  PoseSet set;
  set.entries.reserve(images.size());
  for (const auto& rec : images) {
    const auto it = intr_by_id.find(rec.camera_id);
    if (it == intr_by_id.end()) {
      throw std::invalid_argument("pose import: image '" + rec.name +
                                  "' references unknown camera_id " +
                                  std::to_string(rec.camera_id));
    }
    set.entries.push_back({rec.name, rec.pose(), it->second});
  }
  set.validate();
  return set;
}

std::vector<NovelPose> novel_poses_from_files(
    const std::string& images_text, const std::string& cameras_text,
    const std::vector<ProvenanceEntry>& provenance) {
  const PoseSet set = pose_set_from_colmap(images_text, cameras_text);
  std::unordered_map<std::string, const ProvenanceEntry*> prov_by_id;
  for (const auto& p : provenance) prov_by_id[p.novel_id] = &p;

  std::vector<NovelPose> out;
  out.reserve(set.entries.size());
  for (const auto& e : set.entries) {
    const auto it = prov_by_id.find(e.id);
    if (it == prov_by_id.end()) {
      throw std::invalid_argument("novel poses: no provenance entry for '" +
                                  e.id + "'");
    }
    NovelPose np;
    np.pose = e.pose;
    np.intrinsics = e.intrinsics;
    np.anchor_a = it->second->anchor_a;
    np.anchor_b = it->second->anchor_b;
    np.sample_index = it->second->sample_index;
    np.delta = it->second->delta;
    out.push_back(std::move(np));
  }
  return out;
}

}  // namespace descsyn
