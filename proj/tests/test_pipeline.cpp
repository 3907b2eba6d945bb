#include "descsyn/pipeline.hpp"

#include <doctest.h>

#include <cstdio>

#include "descsyn/io/colmap.hpp"
#include "test_util.hpp"

using namespace descsyn;

namespace {

// Small enough to run the full stack in well under a second per stage.
RunConfig tiny_config() {
  RunConfig cfg;
  cfg.seed = 3;
  cfg.landmark_count = 150;
  cfg.descriptor_dim = 16;
  cfg.view_strength = 0.6;
  cfg.train_views = 6;
  cfg.query_views = 4;
  cfg.interp.k = 2;
  cfg.interp.n_samples = 2;
  cfg.render.max_keypoints = 96;
  cfg.render.pixel_noise_sigma = 0.5;
  cfg.render.descriptor_noise_sigma = 0.03;
  cfg.render.artifact_prob = 0.2;
  cfg.match_min_score = 0.5;
  cfg.eta = 500;  // scaled: 500 * 96 / 2048 = 23
  cfg.train.epochs = 2;
  return cfg;
}

}  // namespace

TEST_CASE("default config mirrors the documented hyperparameters") {
  const RunConfig cfg;
  CHECK(cfg.interp.k == 3);
  CHECK(cfg.interp.n_samples == 40);
  CHECK(cfg.interp.pair_policy == PairPolicy::kDedupUnordered);
  CHECK(cfg.eta == 500);
  CHECK(cfg.render.max_keypoints == 2048);
  CHECK(cfg.descriptor_dim == 256);
  CHECK(cfg.train.learning_rate == 5e-4);
  CHECK(cfg.train.decay_factor == 0.5);
  CHECK(cfg.train.batch_size == 4);
  CHECK(cfg.ransac.inlier_threshold == 3.0);
  CHECK(cfg.ransac.confidence == 0.99);
  CHECK(cfg.ransac.max_iterations == 1000);
  CHECK(cfg.ransac.min_inliers == 12);
  CHECK(cfg.match_ratio == 0.95);
  CHECK(cfg.match_min_score == 0.7);
}

TEST_CASE("config round-trips through its text form") {
  RunConfig cfg = tiny_config();
  cfg.set("eta", "123");
  cfg.set("pair_policy", "per-anchor");
  const std::string text = cfg.serialized();
  const RunConfig back = RunConfig::from_text(text);
  CHECK(back.serialized() == text);
  CHECK(back.eta == 123);
  CHECK(back.interp.pair_policy == PairPolicy::kPerAnchor);

  CHECK_THROWS_AS(cfg.set("no_such_key", "1"), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::from_text("eta 7\n"), std::invalid_argument);
  CHECK_NOTHROW(RunConfig::from_text("# comment\n\neta = 7\n"));
}

TEST_CASE("config hash tracks value changes") {
  RunConfig a = tiny_config();
  RunConfig b = tiny_config();
  CHECK(a.config_hash() == b.config_hash());
  b.set("eta", "9999");
  CHECK(a.config_hash() != b.config_hash());
}

TEST_CASE("every declared key is settable") {
  RunConfig cfg;
  for (const auto& key : RunConfig::keys()) {
    if (key == "pair_policy") {
      CHECK_NOTHROW(cfg.set(key, "dedup-unordered"));
    } else if (key == "bounds") {
      CHECK_NOTHROW(cfg.set(key, "-2 -2 -2 2 2 2"));
    } else {
      CHECK_NOTHROW(cfg.set(key, "1"));
    }
  }
}

TEST_CASE("pose sets are deterministic, disjoint, and look at the scene") {
  const RunConfig cfg = tiny_config();
  const PoseSet train_a = make_training_poses(cfg);
  const PoseSet train_b = make_training_poses(cfg);
  REQUIRE(train_a.entries.size() == 6);
  for (std::size_t i = 0; i < train_a.entries.size(); ++i) {
    CHECK(train_a.entries[i].pose.translation ==
          train_b.entries[i].pose.translation);
  }

  const PoseSet query = make_query_poses(cfg);
  for (const auto& t : train_a.entries) {
    CHECK(t.id.rfind("train_", 0) == 0);
    for (const auto& q : query.entries) {
      CHECK((t.pose.center() - q.pose.center()).norm() > 1e-6);
    }
    // The scene centre projects close to the principal point.
    const auto px = project(t.pose, t.intrinsics, cfg.bounds.center());
    REQUIRE(px.has_value());
    CHECK(std::abs(px->x() - t.intrinsics.cx) < 60);
    CHECK(std::abs(px->y() - t.intrinsics.cy) < 60);
    // Camera sits on the configured shell.
    const double r = (t.pose.center() - cfg.bounds.center()).norm();
    CHECK(r >= cfg.camera_radius_min - 1e-9);
    CHECK(r <= cfg.camera_radius_max + 1e-9);
  }
}

TEST_CASE("rendering a pose set twice is identical") {
  const RunConfig cfg = tiny_config();
  const SyntheticScene scene = make_scene(cfg);
  const PoseSet poses = make_training_poses(cfg);
  const auto a = render_pose_set(scene, poses, cfg, kTrainOrdinalBase, false);
  const auto b = render_pose_set(scene, poses, cfg, kTrainOrdinalBase, false);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].frame.keypoints == b[i].frame.keypoints);
    CHECK(a[i].frame.descriptors == b[i].frame.descriptors);
    CHECK(a[i].frame.frame_id == poses.entries[i].id);
    CHECK_FALSE(a[i].frame.is_synthetic);
  }
}

TEST_CASE("provenance csv round-trips") {
  const RunConfig cfg = tiny_config();
  const auto novel = synthesize_poses(make_training_poses(cfg), cfg.interp);
  const auto prov = novel_provenance(novel);
  const auto back = parse_provenance_csv(write_provenance_csv(prov));
  REQUIRE(back.size() == prov.size());
  for (std::size_t i = 0; i < prov.size(); ++i) {
    CHECK(back[i].novel_id == prov[i].novel_id);
    CHECK(back[i].anchor_a == prov[i].anchor_a);
    CHECK(back[i].anchor_b == prov[i].anchor_b);
    CHECK(back[i].sample_index == prov[i].sample_index);
    CHECK(back[i].delta == prov[i].delta);
  }
}

TEST_CASE("match_and_filter labels accepted frames and reports all") {
  const RunConfig cfg = tiny_config();
  const SyntheticScene scene = make_scene(cfg);
  const PoseSet train_poses = make_training_poses(cfg);

  std::vector<Frame> train_frames;
  for (auto& rv :
       render_pose_set(scene, train_poses, cfg, kTrainOrdinalBase, false)) {
    train_frames.push_back(std::move(rv.frame));
  }
  const auto novel = synthesize_poses(train_poses, cfg.interp);
  std::vector<Frame> novel_frames;
  std::unordered_map<std::string, bool> corrupted;
  for (auto& rv : render_novel_views(scene, novel, cfg)) {
    corrupted[rv.frame.frame_id] = rv.corrupted;
    novel_frames.push_back(std::move(rv.frame));
  }

  const auto mf = match_and_filter(scene, train_frames, novel_frames,
                                   novel_provenance(novel), cfg, corrupted);
  CHECK(mf.rows.size() == novel_frames.size());  // one report row per frame
  CHECK(!mf.labeled.empty());
  for (const auto& df : mf.labeled) {
    REQUIRE(df.coords.has_value());
    CHECK(df.coords->cols() == df.frame.size());
    CHECK(df.frame.is_synthetic);
    // Transferred coordinates lie inside the scene bounds.
    for (Eigen::Index i = 0; i < df.coords->cols(); ++i) {
      CHECK(cfg.bounds.contains(df.coords->col(i)));
    }
  }

  // eta = 0 keeps every frame.
  RunConfig keep_all = cfg;
  keep_all.eta = 0;
  const auto mf_all = match_and_filter(scene, train_frames, novel_frames,
                                       novel_provenance(novel), keep_all);
  for (const auto& row : mf_all.rows) CHECK(row.accepted);
  CHECK(mf_all.labeled.size() == novel_frames.size());
}

TEST_CASE("view seeds follow the seed-xor-ordinal derivation") {
  const RunConfig cfg = tiny_config();
  const SyntheticScene scene = make_scene(cfg);
  const PoseSet poses = make_query_poses(cfg);
  const auto views =
      render_pose_set(scene, poses, cfg, kQueryOrdinalBase, false);
  for (std::size_t i = 0; i < poses.entries.size(); ++i) {
    const RenderedView direct =
        render_view(scene, poses.entries[i].pose, poses.entries[i].intrinsics,
                    cfg.render, cfg.seed ^ (kQueryOrdinalBase + i));
    CHECK(views[i].frame.keypoints == direct.frame.keypoints);
    CHECK(views[i].frame.descriptors == direct.frame.descriptors);
  }
}

TEST_CASE("corrupted views dominate the discarded set") {
  RunConfig cfg = tiny_config();
  cfg.landmark_count = 300;
  // Random descriptors in very low dimensions draw spuriously high cosines,
  // so use the benchmark-scale descriptor setup here.
  cfg.descriptor_dim = 48;
  cfg.match_min_score = 0.6;
  cfg.camera_cap_deg = 70;
  cfg.train_views = 8;
  cfg.interp.k = 3;
  cfg.interp.n_samples = 6;          // 8 anchors -> plenty of novel views
  cfg.render.artifact_prob = 0.4;    // strong corruption presence
  cfg.render.artifact_fraction = 0.9;
  const SyntheticScene scene = make_scene(cfg);
  const PoseSet train_poses = make_training_poses(cfg);

  std::vector<Frame> train_frames;
  for (auto& rv :
       render_pose_set(scene, train_poses, cfg, kTrainOrdinalBase, false)) {
    train_frames.push_back(std::move(rv.frame));
  }
  const auto novel = synthesize_poses(train_poses, cfg.interp);
  std::vector<Frame> novel_frames;
  std::unordered_map<std::string, bool> corrupted;
  for (auto& rv : render_novel_views(scene, novel, cfg)) {
    corrupted[rv.frame.frame_id] = rv.corrupted;
    novel_frames.push_back(std::move(rv.frame));
  }
  const auto mf = match_and_filter(scene, train_frames, novel_frames,
                                   novel_provenance(novel), cfg, corrupted);

  int discarded = 0, discarded_corrupted = 0, corrupted_total = 0;
  for (const auto& row : mf.rows) {
    if (row.corrupted) ++corrupted_total;
    if (!row.accepted) {
      ++discarded;
      if (row.corrupted) ++discarded_corrupted;
    }
  }
  REQUIRE(discarded > 0);
  REQUIRE(corrupted_total > 0);
  // Most of what the filter rejects is oracle-corrupted, and most corrupted
  // views get rejected.
  CHECK(discarded_corrupted * 2 > discarded);
  CHECK(discarded_corrupted * 2 > corrupted_total);
}

TEST_CASE("noiseless overfit evaluation localizes below a centimetre") {
  RunConfig cfg = tiny_config();
  cfg.landmark_count = 200;
  cfg.descriptor_dim = 24;
  cfg.train_views = 5;
  cfg.interp.k = 2;
  cfg.camera_cap_deg = 70;
  cfg.render.max_keypoints = 64;
  cfg.render.pixel_noise_sigma = 0;
  cfg.render.descriptor_noise_sigma = 0;
  cfg.render.artifact_prob = 0;
  // The norm loss has a constant-magnitude gradient, so the final learning
  // rate sets the residual floor; the full 7-decay schedule pushes it to
  // millimetres.
  cfg.train.learning_rate = 1e-3;
  cfg.train.epochs = 120;
  cfg.train.decay_interval = 0;
  const SyntheticScene scene = make_scene(cfg);
  std::vector<Frame> train_frames;
  for (auto& rv : render_pose_set(scene, make_training_poses(cfg), cfg,
                                  kTrainOrdinalBase, false)) {
    train_frames.push_back(std::move(rv.frame));
  }
  TrainConfig tc = cfg.train;
  tc.seed = cfg.train_seed();
  const TrainResult tr =
      train(samples_from_gt_frames(scene, train_frames), tc);
  // Evaluating on the training views themselves: memorized descriptors and
  // exact keypoints should localize to well under a centimetre.
  const EvaluationResult eval =
      evaluate_frames(tr.params, train_frames, cfg, "overfit");
  std::printf("overfit eval median: %.3f cm / %.3f deg\n",
              eval.median_trans_cm, eval.median_rot_deg);
  CHECK(eval.median_trans_cm < 1.0);
  CHECK(eval.nonconverged == 0);
}

TEST_CASE("match report csv summarises acceptance and percentiles") {
  std::vector<MatchFilterRow> rows;
  rows.push_back({"novel_00000", "train_00000", 80, 23, true, false});
  rows.push_back({"novel_00001", "train_00001", 10, 23, false, true});
  const std::string csv = write_match_report_csv(rows);
  CHECK(csv.find("novel_00000,train_00000,80,23,1,0\n") != std::string::npos);
  CHECK(csv.find("# accepted 1 of 2\n") != std::string::npos);
  CHECK(csv.find("percentiles") != std::string::npos);
}

TEST_CASE("labeled samples feed training and evaluation end to end") {
  const RunConfig cfg = tiny_config();
  const SyntheticScene scene = make_scene(cfg);
  std::vector<Frame> train_frames;
  for (auto& rv : render_pose_set(scene, make_training_poses(cfg), cfg,
                                  kTrainOrdinalBase, false)) {
    train_frames.push_back(std::move(rv.frame));
  }
  std::vector<Frame> query_frames;
  for (auto& rv : render_pose_set(scene, make_query_poses(cfg), cfg,
                                  kQueryOrdinalBase, false)) {
    query_frames.push_back(std::move(rv.frame));
  }

  TrainConfig tc = cfg.train;
  tc.seed = cfg.train_seed();
  const TrainResult tr = train(samples_from_gt_frames(scene, train_frames), tc);
  const EvaluationResult eval =
      evaluate_frames(tr.params, query_frames, cfg, "tiny");
  CHECK(eval.rows.size() == query_frames.size());
  for (const auto& row : eval.rows) {
    CHECK(row.run_label == "tiny");
    CHECK(std::isfinite(row.trans_err_cm));
    CHECK(std::isfinite(row.rot_err_deg));
  }
  CHECK_THROWS_AS(evaluate_frames(tr.params, {}, cfg, "none"),
                  std::invalid_argument);
}

TEST_CASE("benchmark point keeps the arms isolated") {
  RunConfig cfg = tiny_config();
  const BenchmarkRun run = run_benchmark_point(cfg, 6, 3, true);
  REQUIRE(run.augmented.has_value());
  CHECK(run.baseline.init_checksum == run.augmented->init_checksum);
  CHECK(run.baseline.training_frames == 6);
  CHECK(run.augmented->training_frames >
        run.baseline.training_frames);  // synthetic frames added
  CHECK(run.augmented->synthetic_total > 0);
  CHECK(run.baseline.eval.rows.size() == 4);
  CHECK(run.augmented->eval.rows.size() == 4);
  // Improvement percentage is exactly (base - aug) / base.
  const double base = run.baseline.eval.median_trans_cm;
  const double aug = run.augmented->eval.median_trans_cm;
  CHECK(run.improvement_trans_pct ==
        doctest::Approx((base - aug) / base * 100.0).epsilon(1e-12));

  const std::string csv = benchmark_report_csv({run}, cfg);
  CHECK(csv.find("# config_hash") != std::string::npos);
  CHECK(csv.find("baseline") != std::string::npos);
  CHECK(csv.find("augmented") != std::string::npos);
  CHECK(csv.find("improvement") != std::string::npos);
}

TEST_CASE("benchmark sweep length matches the requested grid") {
  RunConfig cfg = tiny_config();
  cfg.query_views = 2;
  cfg.train.epochs = 1;
  const auto runs = run_benchmark(cfg, {6, 7}, {1, 2, 3},
                                  /*with_augmented=*/false);
  CHECK(runs.size() == 6);  // views x seeds
  for (const auto& run : runs) CHECK_FALSE(run.augmented.has_value());
}

TEST_CASE("pose sources load from datasets and COLMAP text") {
  const RunConfig cfg = tiny_config();
  const PoseSet poses = make_training_poses(cfg);

  // Through a dataset.
  Dataset ds;
  for (const auto& e : poses.entries) {
    DatasetFrame df;
    df.frame.frame_id = e.id;
    df.frame.pose = e.pose;
    df.frame.intrinsics = e.intrinsics;
    df.frame.keypoints.resize(2, 0);
    df.frame.descriptors.resize(0, 0);
    ds.frames.push_back(std::move(df));
  }
  const PoseSet from_ds = pose_set_from_dataset(parse_dataset(
      serialize_dataset(ds)));
  REQUIRE(from_ds.entries.size() == poses.entries.size());
  for (std::size_t i = 0; i < poses.entries.size(); ++i) {
    CHECK((from_ds.entries[i].pose.translation -
           poses.entries[i].pose.translation)
              .norm() == 0.0);
  }

  // Through COLMAP text (quaternion round-trip costs a few ulps).
  std::vector<ColmapImageRecord> images;
  for (std::size_t i = 0; i < poses.entries.size(); ++i) {
    images.push_back(ColmapImageRecord::from_pose(
        static_cast<std::uint32_t>(i + 1), poses.entries[i].pose, 1,
        poses.entries[i].id));
  }
  const std::string cameras_text = write_colmap_cameras(
      {ColmapCameraRecord::from_intrinsics(1, cfg.intrinsics)});
  const PoseSet from_colmap =
      pose_set_from_colmap(write_colmap_images(images), cameras_text);
  REQUIRE(from_colmap.entries.size() == poses.entries.size());
  for (std::size_t i = 0; i < poses.entries.size(); ++i) {
    CHECK((from_colmap.entries[i].pose.rotation -
           poses.entries[i].pose.rotation)
              .norm() < 1e-12);
  }
}
