#include "cuebias/mlp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace cuebias {

std::vector<int> NetworkConfig::widths() const {
  std::vector<int> w;
  w.reserve(hidden_layers.size() + 2);
  w.push_back(input_dim);
  w.insert(w.end(), hidden_layers.begin(), hidden_layers.end());
  w.push_back(output_dim);
  return w;
}

void NetworkConfig::validate() const {
  if (input_dim < 1 || input_dim > 65536) throw std::invalid_argument("input_dim out of range");
  if (output_dim < 2 || output_dim > 255) throw std::invalid_argument("output_dim out of range");
  for (const int w : hidden_layers) {
    if (w < 1) throw std::invalid_argument("hidden layer width must be >= 1");
  }
}

template <typename T>
NetworkConfig NetworkParameters<T>::config() const {
  NetworkConfig c;
  c.hidden_layers.clear();
  if (layers.empty()) return c;
  c.input_dim = static_cast<int>(layers.front().weights.rows());
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    c.hidden_layers.push_back(static_cast<int>(layers[i].weights.cols()));
  }
  c.output_dim = static_cast<int>(layers.back().weights.cols());
  return c;
}

template <typename T>
bool NetworkParameters<T>::all_finite() const {
  return std::all_of(layers.begin(), layers.end(), [](const DenseLayer<T>& l) {
    return l.weights.allFinite() && l.bias.allFinite();
  });
}

template <typename T>
std::size_t NetworkParameters<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

BinaryBatch BinaryBatch::from_bitmaps(std::span<const Bitmap> bitmaps) {
  BinaryBatch b(kImageCells);
  for (const Bitmap& bm : bitmaps) b.add_row(bm.active_indices());
  return b;
}

BinaryBatch BinaryBatch::from_dense(const RowMatrix<double>& zero_one) {
  BinaryBatch b(static_cast<int>(zero_one.cols()));
  std::vector<std::uint16_t> active;
  for (Eigen::Index r = 0; r < zero_one.rows(); ++r) {
    active.clear();
    for (Eigen::Index c = 0; c < zero_one.cols(); ++c) {
      const double v = zero_one(r, c);
      if (v != 0.0 && v != 1.0) throw std::invalid_argument("BinaryBatch: input is not 0/1");
      if (v == 1.0) active.push_back(static_cast<std::uint16_t>(c));
    }
    b.add_row(active);
  }
  return b;
}

void BinaryBatch::add_row(std::span<const std::uint16_t> active) {
  for (const auto i : active) {
    if (i >= input_dim_) throw std::invalid_argument("BinaryBatch: index out of range");
  }
  indices_.insert(indices_.end(), active.begin(), active.end());
  offsets_.push_back(static_cast<std::uint32_t>(indices_.size()));
}

RowMatrix<double> BinaryBatch::to_dense() const {
  RowMatrix<double> m = RowMatrix<double>::Zero(static_cast<Eigen::Index>(rows()), input_dim_);
  for (std::size_t r = 0; r < rows(); ++r) {
    for (const auto c : row(r)) m(static_cast<Eigen::Index>(r), c) = 1.0;
  }
  return m;
}

LabeledSet LabeledSet::from_records(std::span<const SampleRecord> records) {
  LabeledSet s;
  s.labels.reserve(records.size());
  for (const auto& r : records) {
    s.inputs.add_row(r.bitmap.active_indices());
    s.labels.push_back(static_cast<std::uint8_t>(index_of(r.label)));
  }
  return s;
}

template <typename T>
NetworkParameters<T> zero_params(const NetworkConfig& config) {
  config.validate();
  const auto w = config.widths();
  NetworkParameters<T> p;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    p.layers.push_back({RowMatrix<T>::Zero(w[i], w[i + 1]), RowVector<T>::Zero(w[i + 1])});
  }
  return p;
}

template <typename T>
NetworkParameters<T> init_params(const NetworkConfig& config, RngStream& rng) {
  NetworkParameters<T> p = zero_params<T>(config);
  for (auto& layer : p.layers) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer.weights.rows() + layer.weights.cols()));
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
      T v;
      do {
        v = static_cast<T>((2.0 * rng.uniform() - 1.0) * limit);
      } while (!(std::abs(static_cast<double>(v)) < limit));
      layer.weights.data()[i] = v;
    }
  }
  return p;
}

template <typename T>
void softmax_rows(RowMatrix<T>& logits) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    const T mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    row /= row.sum();
  }
}

namespace {

template <typename T>
void check_input(const NetworkParameters<T>& params, const BinaryBatch& batch) {
  if (params.layers.empty()) throw std::invalid_argument("forward: network has no layers");
  if (params.layers.front().weights.rows() != batch.input_dim()) {
    throw std::invalid_argument("forward: input dimension does not match the network");
  }
}

}  // namespace

template <typename T>
void forward_into(const NetworkParameters<T>& params, const BinaryBatch& batch,
                  ForwardCache<T>& cache) {
  check_input(params, batch);
  if (!params.all_finite()) throw NonFiniteError("forward: non-finite parameter values");
  const auto n = static_cast<Eigen::Index>(batch.rows());
  const std::size_t depth = params.layers.size();
  cache.input = batch;
  cache.activations.resize(depth);

  for (std::size_t l = 0; l < depth; ++l) {
    const auto& layer = params.layers[l];
    auto& out = cache.activations[l];
    out.resize(n, layer.weights.cols());
    if (l == 0) {
      // Binary input: x W is the sum of the weight rows of the active pixels.
      for (Eigen::Index s = 0; s < n; ++s) {
        auto row = out.row(s);
        row = layer.bias;
        for (const auto i : batch.row(static_cast<std::size_t>(s))) row += layer.weights.row(i);
      }
    } else {
      out.noalias() = cache.activations[l - 1] * layer.weights;
      out.rowwise() += layer.bias;
    }
    if (l + 1 < depth) {
      out = out.cwiseMax(T(0));
    } else {
      softmax_rows(out);
    }
  }
}

template <typename T>
ForwardCache<T> forward(const NetworkParameters<T>& params, const BinaryBatch& batch) {
  ForwardCache<T> cache;
  forward_into(params, batch, cache);
  return cache;
}

template <typename T>
double cross_entropy_loss(const RowMatrix<T>& probs, std::span<const std::uint8_t> labels) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size() || labels.empty()) {
    throw std::invalid_argument("cross_entropy_loss: row/label count mismatch");
  }
  double total = 0.0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const auto label = labels[static_cast<std::size_t>(r)];
    if (label >= probs.cols()) throw std::invalid_argument("cross_entropy_loss: bad label");
    const double p = std::clamp(static_cast<double>(probs(r, label)), kProbabilityFloor, 1.0);
    total -= std::log(p);
  }
  return total / static_cast<double>(labels.size());
}

template <typename T>
void backward_into(const NetworkParameters<T>& params, const ForwardCache<T>& cache,
                   std::span<const std::uint8_t> labels, Gradients<T>& grads) {
  const std::size_t depth = params.layers.size();
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (cache.activations.size() != depth || cache.probabilities().rows() != n ||
      static_cast<Eigen::Index>(cache.input.rows()) != n || n == 0) {
    throw std::invalid_argument("backward: cache does not match labels or network");
  }

  const bool fresh = grads.values.layers.size() != depth;
  if (fresh) {
    grads.values = zero_params<T>(params.config());
    grads.first_layer_rows.clear();
  }
  auto& first = grads.values.layers.front().weights;
  for (const auto r : grads.first_layer_rows) first.row(r).setZero();
  grads.first_layer_rows.clear();

  // Output delta of mean cross-entropy through softmax.
  RowMatrix<T> delta = cache.probabilities();
  for (Eigen::Index s = 0; s < n; ++s) {
    const auto label = labels[static_cast<std::size_t>(s)];
    if (label >= delta.cols()) throw std::invalid_argument("backward: bad label");
    delta(s, label) -= T(1);
  }
  delta /= static_cast<T>(n);

  for (std::size_t l = depth; l-- > 0;) {
    auto& g = grads.values.layers[l];
    g.bias = delta.colwise().sum();
    if (l > 0) {
      const auto& prev = cache.activations[l - 1];
      g.weights.noalias() = prev.transpose() * delta;
      RowMatrix<T> next = delta * params.layers[l].weights.transpose();
      // ReLU'(z) = [z > 0]; the activation is positive exactly when z is.
      next = (prev.array() > T(0)).select(next, T(0));
      delta = std::move(next);
    } else {
      for (Eigen::Index s = 0; s < n; ++s) {
        for (const auto i : cache.input.row(static_cast<std::size_t>(s))) {
          first.row(i) += delta.row(s);
          grads.first_layer_rows.push_back(i);
        }
      }
      std::sort(grads.first_layer_rows.begin(), grads.first_layer_rows.end());
      grads.first_layer_rows.erase(
          std::unique(grads.first_layer_rows.begin(), grads.first_layer_rows.end()),
          grads.first_layer_rows.end());
    }
  }
}

template <typename T>
Gradients<T> backward(const NetworkParameters<T>& params, const ForwardCache<T>& cache,
                      std::span<const std::uint8_t> labels) {
  Gradients<T> g;
  backward_into(params, cache, labels, g);
  return g;
}

template <typename T>
void sgd_step(NetworkParameters<T>& params, const Gradients<T>& grads, double learning_rate) {
  if (grads.values.layers.size() != params.layers.size()) {
    throw std::invalid_argument("sgd_step: gradient shape mismatch");
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& g = grads.values.layers[l];
    const auto& p = params.layers[l];
    if (g.weights.rows() != p.weights.rows() || g.weights.cols() != p.weights.cols() ||
        g.bias.size() != p.bias.size()) {
      throw std::invalid_argument("sgd_step: gradient shape mismatch");
    }
  }
  // Validate everything before touching the parameters.
  const auto& g0 = grads.values.layers.front();
  for (const auto r : grads.first_layer_rows) {
    if (!g0.weights.row(r).allFinite()) throw NonFiniteError("sgd_step: non-finite gradient");
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& g = grads.values.layers[l];
    if (!g.bias.allFinite() || (l > 0 && !g.weights.allFinite())) {
      throw NonFiniteError("sgd_step: non-finite gradient");
    }
  }

  const T lr = static_cast<T>(learning_rate);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    const auto& g = grads.values.layers[l];
    if (l == 0) {
      // Rows outside first_layer_rows have zero gradient and stay unchanged.
      for (const auto r : grads.first_layer_rows) p.weights.row(r) -= lr * g.weights.row(r);
    } else {
      p.weights -= lr * g.weights;
    }
    p.bias -= lr * g.bias;
  }
}

template <typename T>
RowVector<T> predict_proba(const NetworkParameters<T>& params, const Bitmap& bitmap) {
  BinaryBatch b(kImageCells);
  b.add_row(bitmap.active_indices());
  return forward(params, b).probabilities().row(0);
}

template <typename T>
Evaluation evaluate(const NetworkParameters<T>& params, const LabeledSet& data) {
  if (data.size() == 0) throw std::invalid_argument("evaluate: empty data set");
  constexpr std::size_t kChunk = 512;
  Evaluation ev;
  ForwardCache<T> cache;
  BinaryBatch chunk(data.inputs.input_dim());
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const std::size_t stop = std::min(data.size(), start + kChunk);
    chunk.clear();
    for (std::size_t i = start; i < stop; ++i) chunk.add_row(data.inputs.row(i));
    forward_into(params, chunk, cache);
    const auto& probs = cache.probabilities();
    for (std::size_t i = start; i < stop; ++i) {
      const auto r = static_cast<Eigen::Index>(i - start);
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < probs.cols(); ++c) {
        if (probs(r, c) > probs(r, best)) best = c;
      }
      const auto truth = data.labels[i];
      if (truth >= kNumClasses || best >= kNumClasses) {
        throw std::invalid_argument("evaluate: only three-class networks are supported");
      }
      ++ev.confusion[truth][static_cast<std::size_t>(best)];
      if (best == truth) ++ev.correct;
      ++ev.total;
    }
  }
  return ev;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be > 0");
  }
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (!(min_delta >= 0.0)) throw std::invalid_argument("min_delta must be >= 0");
}

std::string_view to_string(StopReason r) noexcept {
  return r == StopReason::EarlyStopped ? "early-stopped" : "max-epochs";
}

TrainResult train_from(NetworkParameters<float> params, const LabeledSet& data,
                       const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (data.size() == 0) throw std::invalid_argument("train: empty training set");
  if (params.layers.empty() || params.layers.front().weights.rows() != data.inputs.input_dim()) {
    throw std::invalid_argument("train: input dimension does not match the network");
  }
  const auto classes = static_cast<std::uint8_t>(params.layers.back().weights.cols());
  for (const auto label : data.labels) {
    if (label >= classes) throw std::invalid_argument("train: label out of range");
  }

  const auto started = std::chrono::steady_clock::now();
  const std::uint64_t shuffle_key = derive_seed(config.seed, "shuffle");
  const std::size_t n = data.size();
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  TrainResult result;
  TrainReport& report = result.report;
  NetworkParameters<float> best = params;
  double best_loss = std::numeric_limits<double>::infinity();
  int stale = 0;

  std::vector<std::uint32_t> order(n);
  std::vector<std::uint8_t> batch_labels;
  BinaryBatch batch(data.inputs.input_dim());
  ForwardCache<float> cache;
  Gradients<float> grads;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0u);
    RngStream rng(shuffle_key, static_cast<std::uint64_t>(epoch));
    shuffle(std::span<std::uint32_t>(order), rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t stop = std::min(n, start + batch_size);
      batch.clear();
      batch_labels.clear();
      for (std::size_t k = start; k < stop; ++k) {
        batch.add_row(data.inputs.row(order[k]));
        batch_labels.push_back(data.labels[order[k]]);
      }
      try {
        forward_into(params, batch, cache);
        loss_sum += cross_entropy_loss(cache.probabilities(), batch_labels) *
                    static_cast<double>(stop - start);
        backward_into(params, cache, batch_labels, grads);
        sgd_step(params, grads, config.learning_rate);
      } catch (const NonFiniteError& e) {
        throw TrainingDiverged(std::string("training diverged: ") + e.what(), epoch);
      }
    }
    const double epoch_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) {
      throw TrainingDiverged("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch),
                             epoch);
    }
    report.epoch_loss.push_back(epoch_loss);
    report.epochs_run = epoch;
    if (on_epoch) on_epoch(epoch, epoch_loss);

    if (epoch == 1 || epoch_loss < best_loss - config.min_delta) {
      best_loss = epoch_loss;
      best = params;
      report.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.patience) {
      report.stop_reason = StopReason::EarlyStopped;
      break;
    }
  }
  if (report.stop_reason != StopReason::EarlyStopped) report.stop_reason = StopReason::MaxEpochs;
  report.best_loss = best_loss;
  result.params = std::move(best);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

TrainResult train(const LabeledSet& data, const NetworkConfig& net, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  net.validate();
  config.validate();
  RngStream init_rng(derive_seed(config.seed, "init"), 0);
  return train_from(init_params<float>(net, init_rng), data, config, on_epoch);
}

#define CUEBIAS_INSTANTIATE(T)                                                                 \
  template struct NetworkParameters<T>;                                                        \
  template NetworkParameters<T> init_params<T>(const NetworkConfig&, RngStream&);              \
  template NetworkParameters<T> zero_params<T>(const NetworkConfig&);                          \
  template void softmax_rows<T>(RowMatrix<T>&);                                                \
  template ForwardCache<T> forward<T>(const NetworkParameters<T>&, const BinaryBatch&);        \
  template void forward_into<T>(const NetworkParameters<T>&, const BinaryBatch&,               \
                                ForwardCache<T>&);                                             \
  template double cross_entropy_loss<T>(const RowMatrix<T>&, std::span<const std::uint8_t>);   \
  template Gradients<T> backward<T>(const NetworkParameters<T>&, const ForwardCache<T>&,       \
                                    std::span<const std::uint8_t>);                            \
  template void backward_into<T>(const NetworkParameters<T>&, const ForwardCache<T>&,          \
                                 std::span<const std::uint8_t>, Gradients<T>&);                \
  template void sgd_step<T>(NetworkParameters<T>&, const Gradients<T>&, double);               \
  template RowVector<T> predict_proba<T>(const NetworkParameters<T>&, const Bitmap&);          \
  template Evaluation evaluate<T>(const NetworkParameters<T>&, const LabeledSet&);

CUEBIAS_INSTANTIATE(float)
CUEBIAS_INSTANTIATE(double)

#undef CUEBIAS_INSTANTIATE

}  // namespace cuebias
