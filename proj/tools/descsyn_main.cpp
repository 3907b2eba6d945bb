// descsyn: staged synthetic-localization pipeline. Subcommands cover pose
// synthesis, oracle rendering, match-based label transfer, regressor
// training, PnP evaluation and the paired baseline/augmented benchmark.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "descsyn/io/colmap.hpp"
#include "descsyn/io/dataset.hpp"
#include "descsyn/io/report.hpp"
#include "descsyn/pipeline.hpp"

namespace fs = std::filesystem;
using namespace descsyn;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::vector<std::pair<std::string, std::string>> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path,
                  "run configuration file (key = value lines)");
  cmd->add_option("--out", args.out_dir, "output directory");
  for (const std::string& key : RunConfig::keys()) {
    cmd->add_option_function<std::string>(
        "--" + key,
        [&args, key](const std::string& value) {
          args.overrides.emplace_back(key, value);
        },
        "override config key " + key);
  }
}

RunConfig resolve_config(const CommonArgs& args, bool benchmark_defaults) {
  RunConfig cfg =
      benchmark_defaults ? RunConfig::benchmark_default() : RunConfig();
  if (!args.config_path.empty()) {
    cfg = RunConfig::from_file(args.config_path);
  }
  for (const auto& [key, value] : args.overrides) cfg.set(key, value);
  cfg.validate();
  return cfg;
}

std::string out_path(const CommonArgs& args, const std::string& name) {
  fs::create_directories(args.out_dir);
  return (fs::path(args.out_dir) / name).string();
}

Dataset frames_to_dataset(const RunConfig& cfg, const SyntheticScene* scene,
                          std::vector<DatasetFrame> frames) {
  Dataset ds;
  if (scene != nullptr) ds.manifest.scene = SceneParams::of(*scene);
  std::istringstream ss(cfg.serialized());
  std::string line;
  while (std::getline(ss, line)) {
    const std::size_t eq = line.find(" = ");
    ds.manifest.config.emplace_back(line.substr(0, eq), line.substr(eq + 3));
  }
  ds.frames = std::move(frames);
  return ds;
}

PoseSet load_pose_source(const std::string& poses_path,
                         const std::string& cameras_path) {
  const std::string bytes = read_file(poses_path);
  if (bytes.rfind("DSYNDS", 0) == 0) {
    return pose_set_from_dataset(parse_dataset(bytes));
  }
  if (cameras_path.empty()) {
    throw std::invalid_argument(
        "a COLMAP pose source needs --cameras for the intrinsics");
  }
  return pose_set_from_colmap(bytes, read_file(cameras_path));
}

// Assigns camera ids to unique intrinsics, in first-appearance order.
std::pair<std::vector<ColmapCameraRecord>, std::map<std::string, std::uint32_t>>
camera_table(const std::vector<NovelPose>& novel) {
  std::vector<ColmapCameraRecord> cameras;
  std::map<std::string, std::uint32_t> id_by_key;
  for (const auto& np : novel) {
    const PinholeIntrinsics& k = np.intrinsics;
    const std::string key = format_real(k.fx) + "/" + format_real(k.fy) + "/" +
                            format_real(k.cx) + "/" + format_real(k.cy) + "/" +
                            std::to_string(k.width) + "/" +
                            std::to_string(k.height);
    if (id_by_key.find(key) == id_by_key.end()) {
      const auto id = static_cast<std::uint32_t>(cameras.size() + 1);
      cameras.push_back(ColmapCameraRecord::from_intrinsics(id, k));
      id_by_key[key] = id;
    }
  }
  return {cameras, id_by_key};
}

int cmd_synthesize_poses(const CommonArgs& args, const std::string& poses_path,
                         const std::string& cameras_path) {
  const RunConfig cfg = resolve_config(args, false);
  const PoseSet set = load_pose_source(poses_path, cameras_path);
  if (set.entries.size() < 2) {
    throw std::invalid_argument("pose synthesis needs at least 2 source poses");
  }
  const auto pairs = top_k_pairs(set, cfg.interp);
  const auto novel = synthesize_poses(set, cfg.interp);

  const auto [cameras, id_by_key] = camera_table(novel);
  std::vector<ColmapImageRecord> records;
  records.reserve(novel.size());
  for (std::size_t i = 0; i < novel.size(); ++i) {
    const PinholeIntrinsics& k = novel[i].intrinsics;
    const std::string key = format_real(k.fx) + "/" + format_real(k.fy) + "/" +
                            format_real(k.cx) + "/" + format_real(k.cy) + "/" +
                            std::to_string(k.width) + "/" +
                            std::to_string(k.height);
    records.push_back(ColmapImageRecord::from_pose(
        static_cast<std::uint32_t>(i + 1), novel[i].pose, id_by_key.at(key),
        format_frame_id("novel", static_cast<int>(i))));
  }
  write_file(out_path(args, "novel_poses.txt"), write_colmap_images(records));
  write_file(out_path(args, "novel_cameras.txt"),
             write_colmap_cameras(cameras));
  write_file(out_path(args, "novel_provenance.csv"),
             write_provenance_csv(novel_provenance(novel)));

  std::cout << "source poses: " << set.entries.size() << "\n"
            << "pairs (" << (cfg.interp.pair_policy == PairPolicy::kPerAnchor
                                 ? "per-anchor"
                                 : "dedup-unordered")
            << ", k=" << cfg.interp.k << "): " << pairs.size() << "\n"
            << "samples per pair: " << cfg.interp.n_samples << "\n"
            << "novel poses: " << pairs.size() << " x " << cfg.interp.n_samples
            << " = " << novel.size() << "\n";
  return 0;
}

int cmd_render(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args, false);
  const SyntheticScene scene = make_scene(cfg);

  std::string render_report = "frame_id,keypoints,corrupted\n";
  const auto render_set = [&](const PoseSet& poses, std::uint64_t base,
                              bool synthetic, const std::string& file) {
    std::vector<DatasetFrame> frames;
    for (auto& rv : render_pose_set(scene, poses, cfg, base, synthetic)) {
      render_report += rv.frame.frame_id + "," +
                       std::to_string(rv.frame.size()) + "," +
                       (rv.corrupted ? "1" : "0") + "\n";
      frames.push_back({std::move(rv.frame), std::nullopt});
    }
    write_dataset(frames_to_dataset(cfg, &scene, std::move(frames)),
                  out_path(args, file));
  };
  render_set(make_training_poses(cfg), kTrainOrdinalBase, false, "train.dsds");
  render_set(make_query_poses(cfg), kQueryOrdinalBase, false, "query.dsds");

  const fs::path novel_images = fs::path(args.out_dir) / "novel_poses.txt";
  const fs::path novel_cams = fs::path(args.out_dir) / "novel_cameras.txt";
  const fs::path novel_prov = fs::path(args.out_dir) / "novel_provenance.csv";
  if (fs::exists(novel_images) && fs::exists(novel_cams) &&
      fs::exists(novel_prov)) {
    const auto novel = novel_poses_from_files(
        read_file(novel_images.string()), read_file(novel_cams.string()),
        parse_provenance_csv(read_file(novel_prov.string())));
    std::vector<DatasetFrame> frames;
    for (auto& rv : render_novel_views(scene, novel, cfg)) {
      render_report += rv.frame.frame_id + "," +
                       std::to_string(rv.frame.size()) + "," +
                       (rv.corrupted ? "1" : "0") + "\n";
      frames.push_back({std::move(rv.frame), std::nullopt});
    }
    write_dataset(frames_to_dataset(cfg, &scene, std::move(frames)),
                  out_path(args, "novel.dsds"));
    std::cout << "rendered train + query + " << novel.size()
              << " novel views\n";
  } else {
    std::cout << "rendered train + query views (no novel poses found)\n";
  }
  write_file(out_path(args, "render_report.csv"), render_report);
  return 0;
}

std::unordered_map<std::string, bool> load_corruption_flags(
    const std::string& path) {
  std::unordered_map<std::string, bool> flags;
  if (!fs::exists(path)) return flags;
  std::istringstream ss(read_file(path));
  std::string line;
  bool header = true;
  while (std::getline(ss, line)) {
    if (header) {
      header = false;
      continue;
    }
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = line.rfind(',');
    if (c1 == std::string::npos || c2 == c1) continue;
    flags[line.substr(0, c1)] = line.substr(c2 + 1) == "1";
  }
  return flags;
}

int cmd_match_filter(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args, false);
  const Dataset train_ds = read_dataset(out_path(args, "train.dsds"));
  const Dataset novel_ds = read_dataset(out_path(args, "novel.dsds"));
  if (!train_ds.manifest.scene.has_value()) {
    throw std::invalid_argument("train.dsds carries no scene parameters");
  }
  const SyntheticScene scene = train_ds.manifest.scene->generate();
  const auto provenance = parse_provenance_csv(
      read_file(out_path(args, "novel_provenance.csv")));

  std::vector<Frame> train_frames, novel_frames;
  for (const auto& df : train_ds.frames) train_frames.push_back(df.frame);
  for (const auto& df : novel_ds.frames) novel_frames.push_back(df.frame);

  const auto corrupted =
      load_corruption_flags(out_path(args, "render_report.csv"));
  MatchFilterOutput mf = match_and_filter(scene, train_frames, novel_frames,
                                          provenance, cfg, corrupted);

  write_dataset(frames_to_dataset(cfg, &scene, std::move(mf.labeled)),
                out_path(args, "labeled.dsds"));
  write_file(out_path(args, "match_report.csv"),
             report_preamble(cfg) + write_match_report_csv(mf.rows));

  int accepted = 0;
  for (const auto& r : mf.rows) accepted += r.accepted ? 1 : 0;
  std::cout << "novel frames: " << mf.rows.size() << ", accepted " << accepted
            << " at eta_effective=" << cfg.effective_eta() << "\n";
  return 0;
}

int cmd_train(const CommonArgs& args, bool with_synthetic) {
  const RunConfig cfg = resolve_config(args, false);
  const Dataset train_ds = read_dataset(out_path(args, "train.dsds"));
  if (!train_ds.manifest.scene.has_value()) {
    throw std::invalid_argument("train.dsds carries no scene parameters");
  }
  const SyntheticScene scene = train_ds.manifest.scene->generate();

  std::vector<Frame> train_frames;
  for (const auto& df : train_ds.frames) train_frames.push_back(df.frame);
  std::vector<FrameSamples> samples = samples_from_gt_frames(scene, train_frames);
  if (with_synthetic) {
    const Dataset labeled = read_dataset(out_path(args, "labeled.dsds"));
    for (auto& fs : samples_from_labeled(labeled.frames)) {
      samples.push_back(std::move(fs));
    }
  }

  TrainConfig tc = cfg.train;
  tc.seed = cfg.train_seed();
  const std::uint64_t init_sum =
      params_checksum(init_params(cfg.descriptor_dim, tc.seed));
  const TrainResult tr = train(samples, tc);

  const std::string name = with_synthetic ? "augmented" : "baseline";
  save_checkpoint(tr.params, out_path(args, name + ".ckpt"));

  std::string report = report_preamble(cfg);
  report += "# init_checksum " + std::to_string(init_sum) + "\n";
  report += "epoch,mean_frame_loss\n";
  for (std::size_t e = 0; e < tr.epoch_losses.size(); ++e) {
    report += std::to_string(e) + "," + format_real(tr.epoch_losses[e]) + "\n";
  }
  write_file(out_path(args, "train_report_" + name + ".csv"), report);

  std::cout << name << ": trained on " << samples.size() << " frames, "
            << "init_checksum=" << init_sum << ", final loss "
            << tr.epoch_losses.back() << "\n";
  return 0;
}

int cmd_evaluate(const CommonArgs& args, const std::string& checkpoint,
                 std::string label) {
  const RunConfig cfg = resolve_config(args, false);
  if (label.empty()) label = fs::path(checkpoint).stem().string();
  const RegressorParams params = load_checkpoint(checkpoint);
  const Dataset query_ds = read_dataset(out_path(args, "query.dsds"));
  std::vector<Frame> query_frames;
  for (const auto& df : query_ds.frames) query_frames.push_back(df.frame);

  const EvaluationResult result =
      evaluate_frames(params, query_frames, cfg, label);
  write_file(out_path(args, "eval_" + label + ".csv"),
             report_preamble(cfg) + write_report(result.rows));

  std::cout << label << ": median " << result.median_trans_cm << " cm / "
            << result.median_rot_deg << " deg over " << result.rows.size()
            << " queries (" << result.nonconverged << " non-converged"
            << (result.flagged ? ", flagged" : "") << ")\n";
  return 0;
}

int cmd_benchmark(const CommonArgs& args, const std::vector<int>& views,
                  const std::vector<std::uint64_t>& seeds,
                  bool baseline_only) {
  const RunConfig cfg = resolve_config(args, true);
  const auto runs = run_benchmark(cfg, views, seeds, !baseline_only);
  write_file(out_path(args, "benchmark_report.csv"),
             benchmark_report_csv(runs, cfg));
  for (const auto& run : runs) {
    std::cout << "views=" << run.train_views << " seed=" << run.seed
              << " baseline median " << run.baseline.eval.median_trans_cm
              << " cm / " << run.baseline.eval.median_rot_deg << " deg";
    if (run.augmented.has_value()) {
      std::cout << "; augmented median "
                << run.augmented->eval.median_trans_cm << " cm / "
                << run.augmented->eval.median_rot_deg << " deg"
                << "; improvement " << run.improvement_trans_pct << "% / "
                << run.improvement_rot_pct << "%";
    }
    std::cout << "\n";
  }
  return 0;
}

int cmd_import_colmap(const CommonArgs& args, const std::string& images_path,
                      const std::string& cameras_path) {
  const RunConfig cfg = resolve_config(args, false);
  const PoseSet set =
      pose_set_from_colmap(read_file(images_path), read_file(cameras_path));
  std::vector<DatasetFrame> frames;
  frames.reserve(set.entries.size());
  for (const auto& e : set.entries) {
    DatasetFrame df;
    df.frame.frame_id = e.id;
    df.frame.pose = e.pose;
    df.frame.intrinsics = e.intrinsics;
    df.frame.keypoints.resize(2, 0);
    df.frame.descriptors.resize(0, 0);
    frames.push_back(std::move(df));
  }
  write_dataset(frames_to_dataset(cfg, nullptr, std::move(frames)),
                out_path(args, "imported_poses.dsds"));
  std::cout << "imported " << set.entries.size() << " poses\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic-data pipeline for keypoint scene-coordinate "
               "regression"};
  app.require_subcommand(1);

  CommonArgs synth_args, render_args, match_args, train_args, eval_args,
      bench_args, import_args;
  std::string poses_path, cameras_path;
  bool with_synthetic = false;
  std::string checkpoint, label;
  std::vector<int> bench_views{12};
  std::vector<std::uint64_t> bench_seeds{1};
  bool baseline_only = false;
  std::string import_images, import_cameras;

  auto* synth = app.add_subcommand("synthesize-poses",
                                   "interpolate novel poses from a pose set");
  add_common(synth, synth_args);
  synth->add_option("--poses", poses_path,
                    "pose source (.dsds dataset or COLMAP images.txt)")
      ->required();
  synth->add_option("--cameras", cameras_path,
                    "COLMAP cameras.txt (for COLMAP pose sources)");

  auto* render = app.add_subcommand(
      "render", "render training/query views (and novel poses when present)");
  add_common(render, render_args);

  auto* match = app.add_subcommand(
      "match-filter", "match novel frames to their anchors and transfer labels");
  add_common(match, match_args);

  auto* train_cmd =
      app.add_subcommand("train", "train the scene-coordinate regressor");
  add_common(train_cmd, train_args);
  train_cmd->add_flag("--with-synthetic", with_synthetic,
                      "include accepted synthetic samples");

  auto* eval = app.add_subcommand("evaluate",
                                  "PnP evaluation of a checkpoint on the "
                                  "query views");
  add_common(eval, eval_args);
  eval->add_option("--checkpoint", checkpoint, "regressor checkpoint")
      ->required();
  eval->add_option("--label", label, "run label for the report");

  auto* bench = app.add_subcommand(
      "benchmark", "paired baseline/augmented runs over a sparsity sweep");
  add_common(bench, bench_args);
  bench->add_option("--views", bench_views, "training view counts to sweep");
  bench->add_option("--bench-seeds", bench_seeds, "master seeds to sweep");
  bench->add_flag("--baseline-only", baseline_only,
                  "skip the augmented arm");

  auto* import = app.add_subcommand("import-colmap",
                                    "convert COLMAP text poses to a dataset");
  add_common(import, import_args);
  import->add_option("--images", import_images, "COLMAP images.txt")
      ->required();
  import->add_option("--cameras", import_cameras, "COLMAP cameras.txt")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      return cmd_synthesize_poses(synth_args, poses_path, cameras_path);
    }
    if (render->parsed()) return cmd_render(render_args);
    if (match->parsed()) return cmd_match_filter(match_args);
    if (train_cmd->parsed()) return cmd_train(train_args, with_synthetic);
    if (eval->parsed()) return cmd_evaluate(eval_args, checkpoint, label);
    if (bench->parsed()) {
      return cmd_benchmark(bench_args, bench_views, bench_seeds,
                           baseline_only);
    }
    if (import->parsed()) {
      return cmd_import_colmap(import_args, import_images, import_cameras);
    }
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 1;
  } catch (const DatasetError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
