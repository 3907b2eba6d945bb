#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "descsyn/matching.hpp"
#include "descsyn/scene_oracle.hpp"

// Keypoint scene-coordinate regressor: a dense ReLU network mapping a
// descriptor to (x, y, z, p), where p is a learned confidence used both as a
// precision weight in the loss and as a prediction filter. Trained with Adam
// on frame batches; all arithmetic in double, single-threaded, bitwise
// reproducible for a fixed seed.

namespace descsyn {

/// Hidden/output widths after the descriptor input.
inline constexpr std::array<int, 5> kRegressorLayerSizes{512, 1024, 1024, 512,
                                                         4};

struct RegressorParams {
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is out x in
  std::vector<Eigen::VectorXd> biases;

  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  void validate() const;
};

struct TrainConfig {
  double learning_rate = 5e-4;
  double decay_factor = 0.5;
  int decay_interval = 0;  // epochs between decays; 0 picks max(1, epochs/7)
  int batch_size = 4;      // frames per optimizer step
  int epochs = 30;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
  int effective_decay_interval() const;
};

struct Prediction {
  Eigen::Vector3d coordinate = Eigen::Vector3d::Zero();
  double uncertainty = 0.5;  // strictly inside (0, 1)
};

/// One frame's training samples in columnar form (a packed list of
/// LabeledSamples sharing a source frame).
struct FrameSamples {
  std::string frame_id;
  Eigen::MatrixXf descriptors;  // d x n
  Eigen::Matrix3Xd targets;     // metres, 3 x n

  Eigen::Index size() const { return descriptors.cols(); }
};

FrameSamples pack_samples(const std::string& frame_id,
                          const std::vector<LabeledSample>& samples);

/// He-uniform weights, zero biases, deterministic in (descriptor_dim, seed).
RegressorParams init_params(int descriptor_dim, std::uint64_t seed);

Prediction forward(const RegressorParams& params,
                   const Eigen::VectorXd& descriptor);

/// Per-sample loss p * ||c - w|| - log p: confidence acts as a precision
/// weight, the log barrier keeps it away from zero.
double sample_loss(const Prediction& pred, const Eigen::Vector3d& target);

/// Mean sample loss over one frame.
double frame_loss(const RegressorParams& params, const FrameSamples& frame);

struct Gradients {
  std::vector<Eigen::MatrixXd> d_weights;
  std::vector<Eigen::VectorXd> d_biases;

  static Gradients zeros_like(const RegressorParams& params);
};

/// Adds `scale` times the frame-loss gradient into `grads` and returns the
/// (unscaled) frame loss. Exposed so the finite-difference check can probe
/// the exact gradients training uses.
double accumulate_frame_gradients(const RegressorParams& params,
                                  const FrameSamples& frame, double scale,
                                  Gradients& grads);

struct TrainResult {
  RegressorParams params;
  std::vector<double> epoch_losses;  // mean frame loss per epoch
};

/// Adam over seeded-shuffled frame batches with stepwise learning-rate
/// decay. Frames without samples are ignored; an entirely empty training set
/// is an error.
TrainResult train(const std::vector<FrameSamples>& frames,
                  const TrainConfig& cfg);

struct PredictedCorrespondence {
  Eigen::Vector2d pixel;
  Eigen::Vector3d point;
  double uncertainty = 0;
};

/// Per-keypoint forward pass, dropping predictions with p < uncertainty_floor.
std::vector<PredictedCorrespondence> predict_frame(
    const RegressorParams& params, const Frame& frame,
    double uncertainty_floor);

// Versioned binary checkpoint: magic, layer dimension table, then weights
// and biases as little-endian doubles in layer order (column-major within a
// matrix).
std::string serialize_params(const RegressorParams& params);
RegressorParams deserialize_params(std::string_view bytes);
void save_checkpoint(const RegressorParams& params, const std::string& path);
RegressorParams load_checkpoint(const std::string& path);

/// FNV-1a over the serialized bytes; used to confirm two runs share an
/// initialization.
std::uint64_t params_checksum(const RegressorParams& params);

}  // namespace descsyn
