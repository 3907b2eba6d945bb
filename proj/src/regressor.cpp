#include "descsyn/regressor.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "descsyn/io/binary.hpp"
#include "descsyn/rng.hpp"

namespace descsyn {

namespace {

constexpr char kCheckpointMagic[8] = {'D', 'S', 'Y', 'N',
                                      'C', 'K', 'P', '1'};
constexpr double kResidualEps = 1e-12;  // subgradient cutoff for ||r|| at 0
constexpr double kProbClamp = 1e-15;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// -log(sigmoid(z)) = softplus(-z), stable for either sign.
double neg_log_sigmoid(double z) {
  return z >= 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

double clamp_prob(double p) {
  return std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
}

struct ForwardPass {
  // pre-activations per layer (z[l] = W[l] x[l-1] + b[l]); activations
  // follow by ReLU except at the output.
  std::vector<Eigen::MatrixXd> z;
  std::vector<Eigen::MatrixXd> x;  // x[0] is the input
};

ForwardPass run_forward(const RegressorParams& params,
                        const Eigen::MatrixXd& input) {
  ForwardPass fp;
  const std::size_t n_layers = params.weights.size();
  fp.z.resize(n_layers);
  fp.x.resize(n_layers + 1);
  fp.x[0] = input;
  for (std::size_t l = 0; l < n_layers; ++l) {
    fp.z[l].noalias() = params.weights[l] * fp.x[l];
    fp.z[l].colwise() += params.biases[l];
    fp.x[l + 1] = (l + 1 < n_layers) ? fp.z[l].cwiseMax(0.0) : fp.z[l];
  }
  return fp;
}

}  // namespace

void RegressorParams::validate() const {
  if (weights.size() != kRegressorLayerSizes.size() ||
      biases.size() != kRegressorLayerSizes.size()) {
    throw std::invalid_argument("regressor params: wrong layer count");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != kRegressorLayerSizes[l] ||
        biases[l].size() != kRegressorLayerSizes[l]) {
      throw std::invalid_argument("regressor params: inconsistent shapes");
    }
    if (l > 0 && weights[l].cols() != kRegressorLayerSizes[l - 1]) {
      throw std::invalid_argument("regressor params: inconsistent shapes");
    }
    if (!weights[l].allFinite() || !biases[l].allFinite()) {
      throw std::invalid_argument("regressor params: non-finite values");
    }
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) {
    throw std::invalid_argument("train config: learning_rate must be > 0");
  }
  if (!(decay_factor > 0 && decay_factor <= 1)) {
    throw std::invalid_argument("train config: decay_factor in (0, 1]");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("train config: batch_size must be >= 1");
  }
  if (epochs < 1) {
    throw std::invalid_argument("train config: epochs must be >= 1");
  }
}

int TrainConfig::effective_decay_interval() const {
  if (decay_interval > 0) return decay_interval;
  return std::max(1, epochs / 7);
}

FrameSamples pack_samples(const std::string& frame_id,
                          const std::vector<LabeledSample>& samples) {
  FrameSamples fs;
  fs.frame_id = frame_id;
  if (samples.empty()) return fs;
  const Eigen::Index d = samples.front().descriptor.size();
  fs.descriptors.resize(d, static_cast<Eigen::Index>(samples.size()));
  fs.targets.resize(3, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].descriptor.size() != d) {
      throw std::invalid_argument("pack_samples: mixed descriptor dimensions");
    }
    fs.descriptors.col(static_cast<Eigen::Index>(i)) = samples[i].descriptor;
    fs.targets.col(static_cast<Eigen::Index>(i)) = samples[i].target;
  }
  return fs;
}

RegressorParams init_params(int descriptor_dim, std::uint64_t seed) {
  if (descriptor_dim < 1) {
    throw std::invalid_argument("init_params: descriptor_dim must be >= 1");
  }
  Rng rng(mix_seed(seed, 0xA11CE));
  RegressorParams params;
  int fan_in = descriptor_dim;
  for (const int out : kRegressorLayerSizes) {
    const double limit = std::sqrt(6.0 / fan_in);
    Eigen::MatrixXd w(out, fan_in);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        w(r, c) = rng.uniform(-limit, limit);
      }
    }
    params.weights.push_back(std::move(w));
    params.biases.push_back(Eigen::VectorXd::Zero(out));
    fan_in = out;
  }
  return params;
}

Prediction forward(const RegressorParams& params,
                   const Eigen::VectorXd& descriptor) {
  if (descriptor.size() != params.input_dim()) {
    throw std::invalid_argument("forward: descriptor dimension mismatch");
  }
  const ForwardPass fp = run_forward(params, descriptor);
  const Eigen::VectorXd& out = fp.x.back();
  Prediction pred;
  pred.coordinate = out.head<3>();
  pred.uncertainty = clamp_prob(sigmoid(out[3]));
  return pred;
}

double sample_loss(const Prediction& pred, const Eigen::Vector3d& target) {
  const double r = (pred.coordinate - target).norm();
  return pred.uncertainty * r - std::log(pred.uncertainty);
}

Gradients Gradients::zeros_like(const RegressorParams& params) {
  Gradients g;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    g.d_weights.push_back(Eigen::MatrixXd::Zero(params.weights[l].rows(),
                                                params.weights[l].cols()));
    g.d_biases.push_back(Eigen::VectorXd::Zero(params.biases[l].size()));
  }
  return g;
}

double accumulate_frame_gradients(const RegressorParams& params,
                                  const FrameSamples& frame, double scale,
                                  Gradients& grads) {
  const Eigen::Index n = frame.size();
  if (n == 0) {
    throw std::invalid_argument("frame gradients: frame has no samples");
  }
  if (frame.descriptors.rows() != params.input_dim()) {
    throw std::invalid_argument("frame gradients: descriptor dim mismatch");
  }

  const ForwardPass fp = run_forward(params, frame.descriptors.cast<double>());
  const Eigen::MatrixXd& out = fp.x.back();  // 4 x n

  double loss_sum = 0;
  Eigen::MatrixXd g_out(4, n);  // dL/d(output pre-activation), mean-weighted
  const double w_sample = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d residual =
        out.col(i).head<3>() - frame.targets.col(i);
    const double r = residual.norm();
    const double z = out(3, i);
    const double p = clamp_prob(sigmoid(z));
    loss_sum += p * r + neg_log_sigmoid(z);
    if (r > kResidualEps) {
      g_out.col(i).head<3>() = (w_sample * p / r) * residual;
    } else {
      g_out.col(i).head<3>().setZero();
    }
    g_out(3, i) = w_sample * (1.0 - p) * (p * r - 1.0);
  }

  // Backpropagate through the dense stack.
  const std::size_t n_layers = params.weights.size();
  Eigen::MatrixXd delta = std::move(g_out);
  for (std::size_t l = n_layers; l-- > 0;) {
    grads.d_weights[l].noalias() += scale * (delta * fp.x[l].transpose());
    grads.d_biases[l].noalias() += scale * delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd prev = params.weights[l].transpose() * delta;
      // ReLU gate: the pre-activation decides which units pass gradient.
      delta = prev.cwiseProduct(
          (fp.z[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return loss_sum / static_cast<double>(n);
}

double frame_loss(const RegressorParams& params, const FrameSamples& frame) {
  const Eigen::Index n = frame.size();
  if (n == 0) {
    throw std::invalid_argument("frame_loss: frame has no samples");
  }
  const ForwardPass fp = run_forward(params, frame.descriptors.cast<double>());
  const Eigen::MatrixXd& out = fp.x.back();
  double loss_sum = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = (out.col(i).head<3>() - frame.targets.col(i)).norm();
    const double p = clamp_prob(sigmoid(out(3, i)));
    loss_sum += p * r + neg_log_sigmoid(out(3, i));
  }
  return loss_sum / static_cast<double>(n);
}

TrainResult train(const std::vector<FrameSamples>& frames,
                  const TrainConfig& cfg) {
  cfg.validate();
  std::vector<const FrameSamples*> usable;
  for (const auto& f : frames) {
    if (f.size() > 0) usable.push_back(&f);
  }
  if (usable.empty()) {
    throw std::invalid_argument("train: empty training set");
  }
  const int d = static_cast<int>(usable.front()->descriptors.rows());
  for (const auto* f : usable) {
    if (f->descriptors.rows() != d) {
      throw std::invalid_argument("train: mixed descriptor dimensions");
    }
  }

  TrainResult result;
  result.params = init_params(d, cfg.seed);
  Gradients m = Gradients::zeros_like(result.params);
  Gradients v = Gradients::zeros_like(result.params);
  Rng shuffle_rng(mix_seed(cfg.seed, 0x5AD));

  const int interval = cfg.effective_decay_interval();
  long step = 0;
  std::vector<std::size_t> order(usable.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr =
        cfg.learning_rate * std::pow(cfg.decay_factor, epoch / interval);
    shuffle_rng.shuffle(order);

    double epoch_loss = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(
          order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      const double frame_weight = 1.0 / static_cast<double>(end - begin);

      Gradients grads = Gradients::zeros_like(result.params);
      for (std::size_t idx = begin; idx < end; ++idx) {
        epoch_loss += accumulate_frame_gradients(
            result.params, *usable[order[idx]], frame_weight, grads);
      }

      ++step;
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, step);
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, step);
      for (std::size_t l = 0; l < result.params.weights.size(); ++l) {
        m.d_weights[l] = cfg.adam_beta1 * m.d_weights[l] +
                         (1.0 - cfg.adam_beta1) * grads.d_weights[l];
        v.d_weights[l] =
            cfg.adam_beta2 * v.d_weights[l] +
            (1.0 - cfg.adam_beta2) * grads.d_weights[l].cwiseAbs2();
        result.params.weights[l].array() -=
            lr * (m.d_weights[l].array() / bc1) /
            ((v.d_weights[l].array() / bc2).sqrt() + cfg.adam_epsilon);

        m.d_biases[l] = cfg.adam_beta1 * m.d_biases[l] +
                        (1.0 - cfg.adam_beta1) * grads.d_biases[l];
        v.d_biases[l] = cfg.adam_beta2 * v.d_biases[l] +
                        (1.0 - cfg.adam_beta2) * grads.d_biases[l].cwiseAbs2();
        result.params.biases[l].array() -=
            lr * (m.d_biases[l].array() / bc1) /
            ((v.d_biases[l].array() / bc2).sqrt() + cfg.adam_epsilon);
      }
    }
    result.epoch_losses.push_back(epoch_loss /
                                  static_cast<double>(order.size()));
  }
  return result;
}

std::vector<PredictedCorrespondence> predict_frame(
    const RegressorParams& params, const Frame& frame,
    double uncertainty_floor) {
  std::vector<PredictedCorrespondence> out;
  if (frame.empty()) return out;
  if (frame.descriptors.rows() != params.input_dim()) {
    throw std::invalid_argument("predict_frame: descriptor dim mismatch");
  }
  const ForwardPass fp = run_forward(params, frame.descriptors.cast<double>());
  const Eigen::MatrixXd& raw = fp.x.back();
  out.reserve(static_cast<std::size_t>(frame.size()));
  for (Eigen::Index i = 0; i < frame.size(); ++i) {
    const double p = clamp_prob(sigmoid(raw(3, i)));
    if (p < uncertainty_floor) continue;
    out.push_back({frame.keypoints.col(i), raw.col(i).head<3>(), p});
  }
  return out;
}

std::string serialize_params(const RegressorParams& params) {
  params.validate();
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  append_u32_le(out, static_cast<std::uint32_t>(params.weights.size()));
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    append_u32_le(out, static_cast<std::uint32_t>(params.weights[l].rows()));
    append_u32_le(out, static_cast<std::uint32_t>(params.weights[l].cols()));
  }
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const Eigen::MatrixXd& w = params.weights[l];
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        append_f64_le(out, w(r, c));
      }
    }
    const Eigen::VectorXd& b = params.biases[l];
    for (Eigen::Index r = 0; r < b.size(); ++r) append_f64_le(out, b[r]);
  }
  return out;
}

RegressorParams deserialize_params(std::string_view bytes) {
  ByteReader reader(bytes);
  const std::string_view magic = reader.read_bytes(sizeof(kCheckpointMagic));
  if (magic != std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw std::runtime_error("checkpoint: bad magic bytes");
  }
  const std::uint32_t n_layers = reader.read_u32_le();
  if (n_layers != kRegressorLayerSizes.size()) {
    throw std::runtime_error("checkpoint: unexpected layer count");
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> dims;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    const std::uint32_t rows = reader.read_u32_le();
    const std::uint32_t cols = reader.read_u32_le();
    dims.emplace_back(rows, cols);
  }
  RegressorParams params;
  for (const auto& [rows, cols] : dims) {
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        w(r, c) = reader.read_f64_le();
      }
    }
    Eigen::VectorXd b(rows);
    for (Eigen::Index r = 0; r < b.size(); ++r) b[r] = reader.read_f64_le();
    params.weights.push_back(std::move(w));
    params.biases.push_back(std::move(b));
  }
  if (reader.remaining() != 0) {
    throw std::runtime_error("checkpoint: trailing bytes");
  }
  params.validate();
  return params;
}

void save_checkpoint(const RegressorParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  const std::string bytes = serialize_params(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

RegressorParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return deserialize_params(bytes);
}

std::uint64_t params_checksum(const RegressorParams& params) {
  const std::string bytes = serialize_params(params);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace descsyn
