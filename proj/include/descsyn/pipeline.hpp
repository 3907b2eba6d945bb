#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "descsyn/io/dataset.hpp"
#include "descsyn/io/report.hpp"
#include "descsyn/matching.hpp"
#include "descsyn/pnp.hpp"
#include "descsyn/pose_synthesis.hpp"
#include "descsyn/regressor.hpp"
#include "descsyn/rng.hpp"
#include "descsyn/scene_oracle.hpp"

// Staged pipeline over the synthetic scene: seeded training/query cameras,
// pose synthesis, rendering, match-filter label transfer, the two training
// arms (with and without synthetic samples) and PnP evaluation. The CLI is a
// thin shell over these functions; the benchmark drives them in-process.

namespace descsyn {

/// Flat, fully resolved run configuration. Every knob is a config-file key
/// (same names) and a CLI flag; sub-seeds are derived from the master seed
/// so two arms of a comparison can never drift apart.
struct RunConfig {
  std::uint64_t seed = 1;

  // scene
  int landmark_count = 500;
  int descriptor_dim = 256;
  double view_strength = 0.6;
  AlignedBox bounds{Eigen::Vector3d(-1, -1, -1), Eigen::Vector3d(1, 1, 1)};

  // cameras: positions on a seeded shell sector around the scene looking at
  // a jittered target near the centre; camera_cap_deg is the angular radius
  // of the sector about +z (180 covers the whole sphere)
  int train_views = 12;
  int query_views = 40;
  double camera_radius_min = 3.2;
  double camera_radius_max = 4.0;
  double camera_cap_deg = 180.0;
  double target_jitter = 0.15;
  double roll_jitter_deg = 10.0;
  PinholeIntrinsics intrinsics{525.0, 525.0, 320.0, 240.0, 640, 480};

  InterpConfig interp{};
  RenderConfig render{};

  // matching
  double match_ratio = 0.95;
  double match_min_score = 0.7;
  int eta = 500;

  TrainConfig train{};
  double uncertainty_floor = 0.3;

  RansacConfig ransac{};

  void validate() const;

  /// eta scaled to the keypoint budget (eta * max_keypoints / 2048).
  int effective_eta() const;

  /// Canonical key = value text, one line per key, fixed order.
  std::string serialized() const;
  std::uint64_t config_hash() const;  // FNV-1a of serialized()

  void set(const std::string& key, const std::string& value);
  static RunConfig from_text(const std::string& text);
  static RunConfig from_file(const std::string& path);

  /// Every config-file key, in canonical order (the CLI mirrors these as
  /// flags).
  static const std::vector<std::string>& keys();

  /// The default seeded benchmark: desk-scale scene, sparse training views,
  /// short interpolation arcs.
  static RunConfig benchmark_default();

  std::uint64_t train_pose_seed() const { return mix_seed(seed, 0x11); }
  std::uint64_t query_pose_seed() const { return mix_seed(seed, 0x12); }
  std::uint64_t train_seed() const { return mix_seed(seed, 0x21); }
  std::uint64_t ransac_seed() const { return mix_seed(seed, 0x31); }
};

// View-seed ordinal spaces (view seed = master seed XOR ordinal).
inline constexpr std::uint64_t kTrainOrdinalBase = 0;
inline constexpr std::uint64_t kQueryOrdinalBase = 1ULL << 20;
inline constexpr std::uint64_t kNovelOrdinalBase = 1ULL << 21;

SyntheticScene make_scene(const RunConfig& cfg);
PoseSet make_training_poses(const RunConfig& cfg);
PoseSet make_query_poses(const RunConfig& cfg);

/// Camera-from-world pose at `center` looking toward `target`, rolled by
/// roll_rad about the optical axis.
SE3Pose look_at_pose(const Eigen::Vector3d& center,
                     const Eigen::Vector3d& target, double roll_rad);

/// Renders every entry of a pose set; view i uses seed
/// cfg.seed ^ (ordinal_base + i) and inherits the entry's id.
std::vector<RenderedView> render_pose_set(const SyntheticScene& scene,
                                          const PoseSet& poses,
                                          const RunConfig& cfg,
                                          std::uint64_t ordinal_base,
                                          bool synthetic);

/// Renders synthesized novel poses with ids novel_#####.
std::vector<RenderedView> render_novel_views(
    const SyntheticScene& scene, const std::vector<NovelPose>& novel,
    const RunConfig& cfg);

struct ProvenanceEntry {
  std::string novel_id;
  std::string anchor_a;
  std::string anchor_b;
  int sample_index = 0;
  double delta = 0;
};

std::vector<ProvenanceEntry> novel_provenance(
    const std::vector<NovelPose>& novel);
std::string write_provenance_csv(const std::vector<ProvenanceEntry>& entries);
std::vector<ProvenanceEntry> parse_provenance_csv(const std::string& text);

struct MatchFilterRow {
  std::string novel_id;
  std::string anchor_a;
  int match_count = 0;
  int threshold = 0;
  bool accepted = false;
  bool corrupted = false;  // oracle flag, when known
};

struct MatchFilterOutput {
  std::vector<DatasetFrame> labeled;  // accepted frames, coords attached
  std::vector<MatchFilterRow> rows;   // one per novel frame
};

/// Matches each novel frame against its anchor_a training frame, applies the
/// scaled match-count filter and transfers scene coordinates onto the
/// accepted frames' keypoints.
MatchFilterOutput match_and_filter(
    const SyntheticScene& scene, const std::vector<Frame>& train_frames,
    const std::vector<Frame>& novel_frames,
    const std::vector<ProvenanceEntry>& provenance, const RunConfig& cfg,
    const std::unordered_map<std::string, bool>& corrupted_by_id = {});

std::string write_match_report_csv(const std::vector<MatchFilterRow>& rows);

/// Ground-truth training samples for oracle-rendered frames.
std::vector<FrameSamples> samples_from_gt_frames(
    const SyntheticScene& scene, const std::vector<Frame>& frames);

/// Training samples from labeled dataset frames (coords blocks).
std::vector<FrameSamples> samples_from_labeled(
    const std::vector<DatasetFrame>& labeled);

struct EvaluationResult {
  std::vector<EvalRow> rows;
  double median_trans_cm = 0;
  double median_rot_deg = 0;
  double mean_trans_cm = 0;
  double mean_rot_deg = 0;
  int nonconverged = 0;
  bool flagged = false;  // >= 5% of frames failed to converge
};

/// predict_frame + ransac_pnp per query frame against the frame's rendered
/// pose. Medians exclude non-converged frames only while they stay under 5%.
EvaluationResult evaluate_frames(const RegressorParams& params,
                                 const std::vector<Frame>& query_frames,
                                 const RunConfig& cfg,
                                 const std::string& run_label);

struct ArmSummary {
  EvaluationResult eval;
  std::vector<double> loss_trace;
  std::uint64_t init_checksum = 0;
  int training_frames = 0;
  long training_samples = 0;
  int synthetic_total = 0;
  int synthetic_accepted = 0;
};

struct BenchmarkRun {
  int train_views = 0;
  std::uint64_t seed = 0;
  ArmSummary baseline;
  std::optional<ArmSummary> augmented;
  double improvement_trans_pct = 0;  // (base - aug) / base * 100
  double improvement_rot_pct = 0;
};

/// Runs one benchmark point. Both arms share the scene, the rendered
/// frames, the initialization seed and the evaluation seeds; they differ
/// only in the training-sample set.
BenchmarkRun run_benchmark_point(RunConfig cfg, int train_views,
                                 std::uint64_t seed, bool with_augmented);

std::vector<BenchmarkRun> run_benchmark(const RunConfig& cfg,
                                        const std::vector<int>& views_sweep,
                                        const std::vector<std::uint64_t>& seeds,
                                        bool with_augmented = true);

std::string benchmark_report_csv(const std::vector<BenchmarkRun>& runs,
                                 const RunConfig& cfg);

/// '#'-prefixed provenance header embedded at the top of report files:
/// config hash first, then the resolved config.
std::string report_preamble(const RunConfig& cfg);

std::string format_frame_id(const std::string& prefix, int index);

// Pose sources for synthesize-poses and render: an internal dataset, or
// COLMAP images.txt + cameras.txt.
PoseSet pose_set_from_dataset(const Dataset& ds);
PoseSet pose_set_from_colmap(const std::string& images_text,
                             const std::string& cameras_text);

/// Rebuilds renderable novel poses from the synthesize-poses output files.
/// Record order defines the view ordinals; anchors and deltas come from the
/// provenance sidecar.
std::vector<NovelPose> novel_poses_from_files(
    const std::string& images_text, const std::string& cameras_text,
    const std::vector<ProvenanceEntry>& provenance);

}  // namespace descsyn
