#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "descsyn/io/dataset.hpp"

// Drives the installed binary through the staged pipeline in a scratch
// directory: render -> synthesize-poses -> render (novel) -> match-filter ->
// train (both arms) -> evaluate, plus the error paths.

namespace fs = std::filesystem;

namespace {

const char* kTinyConfig =
    "seed = 5\n"
    "landmark_count = 150\n"
    "descriptor_dim = 16\n"
    "view_strength = 0.6\n"
    "train_views = 6\n"
    "query_views = 4\n"
    "pair_k = 2\n"
    "samples_per_pair = 2\n"
    "max_keypoints = 96\n"
    "pixel_noise_sigma = 0.5\n"
    "descriptor_noise_sigma = 0.03\n"
    "artifact_prob = 0.2\n"
    "match_min_score = 0.5\n"
    "epochs = 2\n";

struct CliFixture {
  fs::path dir;
  fs::path config;

  CliFixture() {
    dir = fs::temp_directory_path() / "descsyn_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    config = dir / "run.cfg";
    std::ofstream(config) << kTinyConfig;
  }

  int run(const std::string& args) const {
    const std::string cmd = std::string(DESCSYN_CLI_PATH) + " " + args +
                            " > " + (dir / "stdout.txt").string() + " 2> " +
                            (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string common() const {
    return "--config " + config.string() + " --out " + dir.string();
  }

  std::string stdout_text() const {
    return descsyn::read_file((dir / "stdout.txt").string());
  }
  std::string stderr_text() const {
    return descsyn::read_file((dir / "stderr.txt").string());
  }
};

}  // namespace

TEST_CASE("the staged pipeline runs end to end through the CLI") {
  CliFixture fx;

  REQUIRE(fx.run("render " + fx.common()) == 0);
  CHECK(fs::exists(fx.dir / "train.dsds"));
  CHECK(fs::exists(fx.dir / "query.dsds"));
  CHECK(fs::exists(fx.dir / "render_report.csv"));

  // Stage idempotence: re-rendering reproduces the bytes.
  const std::string train_bytes =
      descsyn::read_file((fx.dir / "train.dsds").string());
  REQUIRE(fx.run("render " + fx.common()) == 0);
  CHECK(descsyn::read_file((fx.dir / "train.dsds").string()) == train_bytes);

  REQUIRE(fx.run("synthesize-poses " + fx.common() + " --poses " +
                 (fx.dir / "train.dsds").string()) == 0);
  CHECK(fs::exists(fx.dir / "novel_poses.txt"));
  CHECK(fs::exists(fx.dir / "novel_cameras.txt"));
  CHECK(fs::exists(fx.dir / "novel_provenance.csv"));
  CHECK(fx.stdout_text().find("novel poses:") != std::string::npos);

  // Second render picks up the novel poses.
  REQUIRE(fx.run("render " + fx.common()) == 0);
  CHECK(fs::exists(fx.dir / "novel.dsds"));
  CHECK(descsyn::read_file((fx.dir / "train.dsds").string()) == train_bytes);

  REQUIRE(fx.run("match-filter " + fx.common()) == 0);
  CHECK(fs::exists(fx.dir / "labeled.dsds"));
  CHECK(fs::exists(fx.dir / "match_report.csv"));

  REQUIRE(fx.run("train " + fx.common()) == 0);
  CHECK(fs::exists(fx.dir / "baseline.ckpt"));
  REQUIRE(fx.run("train " + fx.common() + " --with-synthetic") == 0);
  CHECK(fs::exists(fx.dir / "augmented.ckpt"));

  // Both arms started from the same initialization.
  const std::string base_report =
      descsyn::read_file((fx.dir / "train_report_baseline.csv").string());
  const std::string aug_report =
      descsyn::read_file((fx.dir / "train_report_augmented.csv").string());
  const auto checksum_line = [](const std::string& report) {
    const std::size_t pos = report.find("# init_checksum");
    return report.substr(pos, report.find('\n', pos) - pos);
  };
  CHECK(checksum_line(base_report) == checksum_line(aug_report));

  REQUIRE(fx.run("evaluate " + fx.common() + " --checkpoint " +
                 (fx.dir / "baseline.ckpt").string()) == 0);
  CHECK(fs::exists(fx.dir / "eval_baseline.csv"));
  const std::string eval_csv =
      descsyn::read_file((fx.dir / "eval_baseline.csv").string());
  CHECK(eval_csv.find("# config_hash") != std::string::npos);
  CHECK(eval_csv.find("baseline,median,") != std::string::npos);
}

TEST_CASE("import-colmap converts text poses to a dataset") {
  CliFixture fx;
  std::ofstream(fx.dir / "images.txt")
      << "# images\n1 1 0 0 0 0.1 -0.2 3.5 1 a.png\n\n"
         "2 0.92387953251128674 0 0.38268343236508978 0 0 0 3.5 1 b.png\n\n";
  std::ofstream(fx.dir / "cameras.txt")
      << "1 SIMPLE_PINHOLE 640 480 525 320 240\n";
  REQUIRE(fx.run("import-colmap " + fx.common() + " --images " +
                 (fx.dir / "images.txt").string() + " --cameras " +
                 (fx.dir / "cameras.txt").string()) == 0);
  const descsyn::Dataset ds =
      descsyn::read_dataset((fx.dir / "imported_poses.dsds").string());
  REQUIRE(ds.frames.size() == 2);
  CHECK(ds.frames[0].frame.frame_id == "a.png");
  CHECK(ds.frames[1].frame.intrinsics.fx == 525);

  // The imported dataset doubles as a pose source.
  REQUIRE(fx.run("synthesize-poses " + fx.common() + " --pair_k 1 " +
                 "--poses " + (fx.dir / "imported_poses.dsds").string()) ==
          0);
  CHECK(fx.stdout_text().find("novel poses: 1 x 2 = 2") != std::string::npos);
}

TEST_CASE("failures exit nonzero with a categorized message") {
  CliFixture fx;
  CHECK(fx.run("evaluate " + fx.common() + " --checkpoint missing.ckpt") != 0);
  CHECK(fx.stderr_text().find("error") != std::string::npos);

  std::ofstream(fx.dir / "bad.cfg") << "eta = not_a_number\n";
  CHECK(fx.run("render --config " + (fx.dir / "bad.cfg").string() + " --out " +
               fx.dir.string()) != 0);
  CHECK(fx.stderr_text().find("config error") != std::string::npos);

  std::ofstream(fx.dir / "bad_images.txt") << "1 1 0 0 0 0 0 0 1\n\n";
  CHECK(fx.run("import-colmap " + fx.common() + " --images " +
               (fx.dir / "bad_images.txt").string() + " --cameras " +
               (fx.dir / "bad_images.txt").string()) != 0);
  CHECK(fx.stderr_text().find("data error") != std::string::npos);

  CHECK(fx.run("synthesize-poses " + fx.common() + " --poses " +
               (fx.dir / "nonexistent.dsds").string()) != 0);
}
