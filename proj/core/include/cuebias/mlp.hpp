#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cuebias/bitmap.hpp"
#include "cuebias/dataset.hpp"
#include "cuebias/rng.hpp"

namespace cuebias {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

inline constexpr double kProbabilityFloor = 1e-12;

struct NetworkConfig {
  int input_dim = kImageCells;
  std::vector<int> hidden_layers{100};
  int output_dim = kNumClasses;

  // input, hidden..., output
  std::vector<int> widths() const;
  void validate() const;
  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

template <typename T>
struct DenseLayer {
  RowMatrix<T> weights;  // fan_in x fan_out
  RowVector<T> bias;     // fan_out
};

template <typename T>
struct NetworkParameters {
  std::vector<DenseLayer<T>> layers;

  NetworkConfig config() const;
  bool all_finite() const;
  std::size_t parameter_count() const;

  template <typename U>
  NetworkParameters<U> cast() const {
    NetworkParameters<U> out;
    out.layers.reserve(layers.size());
    for (const auto& l : layers) {
      out.layers.push_back({l.weights.template cast<U>(), l.bias.template cast<U>()});
    }
    return out;
  }

  friend bool operator==(const NetworkParameters& a, const NetworkParameters& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      const auto& x = a.layers[i];
      const auto& y = b.layers[i];
      if (x.weights.rows() != y.weights.rows() || x.weights.cols() != y.weights.cols() ||
          x.weights != y.weights || x.bias != y.bias) {
        return false;
      }
    }
    return true;
  }
};

// Rows of a binary input matrix stored as sorted active column indices.
class BinaryBatch {
 public:
  BinaryBatch() = default;
  explicit BinaryBatch(int input_dim) : input_dim_(input_dim) {}

  static BinaryBatch from_bitmaps(std::span<const Bitmap> bitmaps);
  static BinaryBatch from_dense(const RowMatrix<double>& zero_one);

  void add_row(std::span<const std::uint16_t> active);
  void clear() noexcept {
    indices_.clear();
    offsets_.assign(1, 0);
  }

  std::size_t rows() const noexcept { return offsets_.size() - 1; }
  int input_dim() const noexcept { return input_dim_; }
  std::span<const std::uint16_t> row(std::size_t r) const noexcept {
    return {indices_.data() + offsets_[r], offsets_[r + 1] - offsets_[r]};
  }
  RowMatrix<double> to_dense() const;

 private:
  int input_dim_ = kImageCells;
  std::vector<std::uint16_t> indices_;
  std::vector<std::uint32_t> offsets_{0};
};

// Inputs plus class indices (0..output_dim-1), one per row.
struct LabeledSet {
  BinaryBatch inputs;
  std::vector<std::uint8_t> labels;

  static LabeledSet from_records(std::span<const SampleRecord> records);
  std::size_t size() const noexcept { return labels.size(); }
};

template <typename T>
struct ForwardCache {
  BinaryBatch input;
  // activations[l] is the post-activation output of layer l; the last entry
  // holds the softmax probabilities.
  std::vector<RowMatrix<T>> activations;

  const RowMatrix<T>& probabilities() const { return activations.back(); }
};

// Gradient storage with the same shapes as the parameters. Only the rows of
// the first weight matrix listed in `first_layer_rows` can be non-zero.
template <typename T>
struct Gradients {
  NetworkParameters<T> values;
  std::vector<std::uint16_t> first_layer_rows;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, int epoch) : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

// Glorot-uniform weights, zero biases.
template <typename T>
NetworkParameters<T> init_params(const NetworkConfig& config, RngStream& rng);

template <typename T>
NetworkParameters<T> zero_params(const NetworkConfig& config);

// Row-wise softmax with max subtraction, in place.
template <typename T>
void softmax_rows(RowMatrix<T>& logits);

// Hidden layers: affine + ReLU. Output: affine + softmax.
template <typename T>
ForwardCache<T> forward(const NetworkParameters<T>& params, const BinaryBatch& batch);

template <typename T>
void forward_into(const NetworkParameters<T>& params, const BinaryBatch& batch,
                  ForwardCache<T>& cache);

// Mean over rows of -log(max(p_true, 1e-12)).
template <typename T>
double cross_entropy_loss(const RowMatrix<T>& probs, std::span<const std::uint8_t> labels);

// Exact gradient of the mean cross-entropy. ReLU'(0) = 0.
template <typename T>
Gradients<T> backward(const NetworkParameters<T>& params, const ForwardCache<T>& cache,
                      std::span<const std::uint8_t> labels);

// Same as backward() but reuses `grads` storage from a previous call.
template <typename T>
void backward_into(const NetworkParameters<T>& params, const ForwardCache<T>& cache,
                   std::span<const std::uint8_t> labels, Gradients<T>& grads);

// p <- p - lr * g. Throws NonFiniteError when a gradient is not finite.
template <typename T>
void sgd_step(NetworkParameters<T>& params, const Gradients<T>& grads, double learning_rate);

template <typename T>
RowVector<T> predict_proba(const NetworkParameters<T>& params, const Bitmap& bitmap);

struct TrainConfig {
  int batch_size = 32;
  double learning_rate = 1e-3;
  int max_epochs = 1000;
  int patience = 20;
  // The loss has to drop by min_delta within `patience` epochs: a slope of
  // 5e-4 per epoch with these defaults.
  double min_delta = 1e-2;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class StopReason : std::uint8_t { EarlyStopped, MaxEpochs };
std::string_view to_string(StopReason r) noexcept;

struct TrainReport {
  int epochs_run = 0;
  std::vector<double> epoch_loss;  // mean training loss per epoch
  StopReason stop_reason = StopReason::MaxEpochs;
  int best_epoch = 0;  // 1-based epoch whose parameters were kept
  double best_loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  NetworkParameters<float> params;
  TrainReport report;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

// Minibatch SGD over a fresh shuffle each epoch; the last partial batch is
// kept. Early stopping watches the mean epoch loss: the first epoch sets the
// baseline, and training stops once `patience` consecutive epochs fail to
// beat the best loss by more than `min_delta`. The best parameters are
// restored. Throws TrainingDiverged on a non-finite loss.
TrainResult train(const LabeledSet& data, const NetworkConfig& net, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// Same, starting from the given parameters instead of init_params.
TrainResult train_from(NetworkParameters<float> params, const LabeledSet& data,
                       const TrainConfig& config, const EpochCallback& on_epoch = {});

struct Evaluation {
  std::size_t correct = 0;
  std::size_t total = 0;
  // confusion[true][predicted]
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};

  double accuracy() const noexcept {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
};

// argmax prediction, ties go to the lowest class index.
template <typename T>
Evaluation evaluate(const NetworkParameters<T>& params, const LabeledSet& data);

// Model file: "CUENN1", u32 version, u32 layer count, u32 widths, then per
// layer f32 weights (row-major fan_in x fan_out) and f32 biases, all
// little-endian, then the FNV-1a 64 of everything before it.
inline constexpr int kModelFormatVersion = 1;
void save_model(const NetworkParameters<float>& params, const std::filesystem::path& path);
NetworkParameters<float> load_model(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_model(const NetworkParameters<float>& params);
NetworkParameters<float> decode_model(std::span<const std::uint8_t> bytes);

// "epoch,mean_loss" lines.
void write_train_log(const TrainReport& report, const std::filesystem::path& path);

}  // namespace cuebias
