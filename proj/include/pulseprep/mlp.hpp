#pragma once

// Fully connected policy network: rectifier hidden layers, softmax output over actions.
// Trained by mini-batch Adam on cross-entropy against one-hot oracle labels.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pulseprep/dataset.hpp"
#include "pulseprep/error.hpp"
#include "pulseprep/random.hpp"

namespace pulseprep {

struct ModelMetadata {
  int qubits = 1;
  std::string action_set;
  Encoding encoding = Encoding::Pure;
  std::uint64_t train_seed = 0;
  std::string config_digest;

  bool operator==(const ModelMetadata&) const = default;
};

inline std::vector<int> default_hidden_layers(int qubits) {
  if (qubits == 1) return {256, 64, 32, 32, 8};
  return {256, 128, 64, 16};
}

inline std::vector<int> default_layer_sizes(int qubits, Encoding encoding, int action_count) {
  std::vector<int> sizes{feature_size(encoding, qubits == 1 ? 2 : 4)};
  for (int h : default_hidden_layers(qubits)) sizes.push_back(h);
  sizes.push_back(action_count);
  return sizes;
}

class MlpModel {
 public:
  MlpModel() = default;

  MlpModel(std::vector<int> layer_sizes, ModelMetadata meta) : sizes_(std::move(layer_sizes)), meta_(std::move(meta)) {
    if (sizes_.size() < 2) throw TaskError("a model needs at least an input and an output layer");
    for (int s : sizes_) {
      if (s < 1) throw TaskError("layer sizes must be positive");
    }
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      weights_.push_back(Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]));
      biases_.push_back(Eigen::VectorXd::Zero(sizes_[l + 1]));
    }
  }

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t layer_count() const { return weights_.size(); }
  const ModelMetadata& metadata() const { return meta_; }
  ModelMetadata& metadata() { return meta_; }

  // Layer l maps size l to size l + 1; weights are (out x in).
  Eigen::MatrixXd& weight(std::size_t l) { return weights_.at(l); }
  const Eigen::MatrixXd& weight(std::size_t l) const { return weights_.at(l); }
  Eigen::VectorXd& bias(std::size_t l) { return biases_.at(l); }
  const Eigen::VectorXd& bias(std::size_t l) const { return biases_.at(l); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
    return n;
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
    }
    return true;
  }

  // Column-per-sample batch forward; returns softmax probabilities (outputs x batch).
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const {
    if (inputs.rows() != input_size()) throw TaskError("feature length does not match the model input size");
    Eigen::MatrixXd a = inputs;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Eigen::MatrixXd z = weights_[l] * a;
      z.colwise() += biases_[l];
      if (l + 1 < weights_.size()) {
        a = z.cwiseMax(0.0);
      } else {
        a = std::move(z);
      }
    }
    softmax_columns(a);
    return a;
  }

  std::vector<double> forward(std::span<const double> features) const {
    if (static_cast<int>(features.size()) != input_size()) {
      throw TaskError("feature length " + std::to_string(features.size()) + " does not match model input size " +
                      std::to_string(input_size()));
    }
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(features.data(), input_size());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Eigen::VectorXd z = weights_[l] * a + biases_[l];
      a = (l + 1 < weights_.size()) ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
    }
    softmax_columns(a);
    return {a.data(), a.data() + a.size()};
  }

  static void softmax_columns(Eigen::Ref<Eigen::MatrixXd> logits) {
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      auto col = logits.col(c);
      col.array() -= col.maxCoeff();
      col = col.array().exp().matrix();
      col /= col.sum();
    }
  }

  bool operator==(const MlpModel&) const = default;

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
  ModelMetadata meta_;
};

// He initialization: weights ~ N(0, 2 / fan_in), biases zero.
inline MlpModel init_model(const std::vector<int>& layer_sizes, std::uint64_t seed, ModelMetadata meta = {}) {
  meta.train_seed = seed;
  MlpModel m(layer_sizes, std::move(meta));
  Rng rng(seed);
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / layer_sizes[l]));
    auto& w = m.weight(l);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = normal(rng);
    }
  }
  return m;
}

// Index of the largest probability; ties go to the lowest index.
inline int argmax_action(std::span<const double> probs) {
  if (probs.empty()) throw TaskError("argmax of an empty probability vector");
  int best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

inline int predict_action(const MlpModel& model, std::span<const double> features) {
  const std::vector<double> p = model.forward(features);
  return argmax_action(p);
}

// Packs the given samples column-wise.
inline Eigen::MatrixXd feature_matrix(const std::vector<Sample>& samples, std::span<const std::size_t> idx, int width) {
  Eigen::MatrixXd x(width, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) {
    const auto& f = samples[idx[c]].features;
    if (static_cast<int>(f.size()) != width) throw MismatchError("sample feature length does not match model input");
    x.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(f.data(), width);
  }
  return x;
}

inline double accuracy(const MlpModel& model, const std::vector<Sample>& samples) {
  if (samples.empty()) throw TaskError("accuracy of an empty dataset is undefined");
  constexpr std::size_t kChunk = 4096;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const std::size_t end = std::min(samples.size(), start + kChunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Eigen::MatrixXd probs = model.forward_batch(feature_matrix(samples, idx, model.input_size()));
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      const auto col = probs.col(c);
      const int pred = argmax_action(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
      if (pred == samples[idx[static_cast<std::size_t>(c)]].label) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

inline double accuracy(const MlpModel& model, const Dataset& ds) { return accuracy(model, ds.samples); }

struct TrainConfig {
  int batch_size = 64;
  double learning_rate = 5e-4;
  int epochs = 200;
  double validation_fraction = 0.1;
  std::uint64_t rng_seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  static TrainConfig single_qubit() { return TrainConfig{}; }

  static TrainConfig two_qubit() {
    TrainConfig c;
    c.batch_size = 128;
    c.learning_rate = 1e-3;
    c.epochs = 100;
    return c;
  }

  static TrainConfig defaults(int qubits) { return qubits == 1 ? single_qubit() : two_qubit(); }

  void validate() const {
    if (batch_size < 1) throw TaskError("batch size must be at least 1");
    if (!(learning_rate > 0.0)) throw TaskError("learning rate must be positive");
    if (epochs < 1) throw TaskError("epoch count must be at least 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
      throw TaskError("validation fraction must lie in [0, 1)");
    }
  }
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double heldout_accuracy = 0.0;
  // Filled by the per-epoch hook when one is supplied (e.g. SP mean fidelity on a suite).
  std::optional<double> policy_fidelity;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double wall_seconds = 0.0;
  std::size_t train_samples = 0;
  std::size_t heldout_samples = 0;

  std::vector<double> losses() const {
    std::vector<double> v;
    for (const auto& e : epochs) v.push_back(e.train_loss);
    return v;
  }
  std::vector<double> accuracies() const {
    std::vector<double> v;
    for (const auto& e : epochs) v.push_back(e.heldout_accuracy);
    return v;
  }
};

// Gradients of the mean cross-entropy over a batch; same shapes as the model parameters.
struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

// Mean cross-entropy of the batch and (optionally) its gradient by backpropagation.
inline double cross_entropy(const MlpModel& model, const Eigen::MatrixXd& inputs, std::span<const int> labels,
                            Gradients* grad = nullptr) {
  const std::size_t layers = model.layer_count();
  const auto batch = inputs.cols();
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(layers + 1);
  acts.push_back(inputs);
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = model.weight(l) * acts.back();
    z.colwise() += model.bias(l);
    if (l + 1 < layers) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }
  Eigen::MatrixXd& probs = acts.back();
  MlpModel::softmax_columns(probs);
  double loss = 0.0;
  for (Eigen::Index c = 0; c < batch; ++c) {
    loss -= std::log(std::max(probs(labels[static_cast<std::size_t>(c)], c), 1e-300));
  }
  loss /= static_cast<double>(batch);
  if (grad == nullptr) return loss;

  grad->weights.resize(layers);
  grad->biases.resize(layers);
  Eigen::MatrixXd delta = probs;
  for (Eigen::Index c = 0; c < batch; ++c) delta(labels[static_cast<std::size_t>(c)], c) -= 1.0;
  delta /= static_cast<double>(batch);
  for (std::size_t l = layers; l-- > 0;) {
    grad->weights[l].noalias() = delta * acts[l].transpose();
    grad->biases[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = model.weight(l).transpose() * delta;
      delta = (acts[l].array() > 0.0).select(back, 0.0);
    }
  }
  return loss;
}

class AdamOptimizer {
 public:
  AdamOptimizer(const MlpModel& model, const TrainConfig& cfg) : cfg_(cfg) {
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
      mw_.push_back(Eigen::MatrixXd::Zero(model.weight(l).rows(), model.weight(l).cols()));
      vw_.push_back(mw_.back());
      mb_.push_back(Eigen::VectorXd::Zero(model.bias(l).size()));
      vb_.push_back(mb_.back());
    }
  }

  void step(MlpModel& model, const Gradients& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    const double lr = cfg_.learning_rate * std::sqrt(c2) / c1;
    const double eps = cfg_.adam_epsilon * std::sqrt(c2);
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
      update(model.weight(l), mw_[l], vw_[l], g.weights[l], lr, eps);
      update(model.bias(l), mb_[l], vb_[l], g.biases[l], lr, eps);
    }
  }

 private:
  template <class P, class G>
  void update(P& param, P& m, P& v, const G& grad, double lr, double eps) const {
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * grad;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
    param.array() -= lr * m.array() / (v.array().sqrt() + eps);
  }

  TrainConfig cfg_;
  int t_ = 0;
  std::vector<Eigen::MatrixXd> mw_, vw_;
  std::vector<Eigen::VectorXd> mb_, vb_;
};

using EpochHook = std::function<void(const MlpModel&, EpochStats&)>;

// Splits off a seeded held-out fraction, then runs `epochs` passes of shuffled mini-batch Adam.
inline TrainReport train(MlpModel& model, const std::vector<Sample>& samples, const TrainConfig& cfg,
                         const EpochHook& hook = {}) {
  cfg.validate();
  if (samples.empty()) throw TaskError("cannot train on an empty dataset");
  for (const auto& s : samples) {
    if (static_cast<int>(s.features.size()) != model.input_size()) {
      throw MismatchError("dataset feature length " + std::to_string(s.features.size()) +
                          " does not match model input size " + std::to_string(model.input_size()));
    }
    if (s.label < 0 || s.label >= model.output_size()) throw MismatchError("dataset label outside model output range");
  }
  const auto start = std::chrono::steady_clock::now();
  Rng rng(cfg.rng_seed);

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  auto heldout_n = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(samples.size())));
  if (heldout_n >= samples.size()) heldout_n = samples.size() - 1;
  std::vector<Sample> heldout;
  for (std::size_t i = 0; i < heldout_n; ++i) heldout.push_back(samples[order[i]]);
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(heldout_n), order.end());

  TrainReport report;
  report.train_samples = train_idx.size();
  report.heldout_samples = heldout.size();
  AdamOptimizer adam(model, cfg);
  Gradients grad;
  std::vector<int> labels;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < train_idx.size(); b += batch) {
      const std::span<const std::size_t> idx(train_idx.data() + b, std::min(batch, train_idx.size() - b));
      labels.resize(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = samples[idx[i]].label;
      const double loss = cross_entropy(model, feature_matrix(samples, idx, model.input_size()), labels, &grad);
      if (!std::isfinite(loss)) {
        throw Error("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(batches) + "; lower the learning rate or check the dataset");
      }
      adam.step(model, grad);
      loss_sum += loss;
      ++batches;
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(batches);
    stats.heldout_accuracy = heldout.empty() ? accuracy(model, samples) : accuracy(model, heldout);
    if (hook) hook(model, stats);
    report.epochs.push_back(stats);
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

inline TrainReport train(MlpModel& model, const Dataset& ds, const TrainConfig& cfg, const EpochHook& hook = {}) {
  if (ds.header.encoding != model.metadata().encoding) throw MismatchError("dataset encoding differs from the model's");
  if (ds.header.qubits != model.metadata().qubits) throw MismatchError("dataset qubit count differs from the model's");
  if (!model.metadata().action_set.empty() && ds.header.action_set != model.metadata().action_set) {
    throw MismatchError("dataset action set differs from the model's");
  }
  return train(model, ds.samples, cfg, hook);
}

inline void write_train_report(std::ostream& os, const TrainReport& r) {
  os << "epoch,train_loss,heldout_accuracy,policy_mean_fidelity\n";
  os.precision(10);
  for (const auto& e : r.epochs) {
    os << e.epoch << ',' << e.train_loss << ',' << e.heldout_accuracy << ',';
    if (e.policy_fidelity) os << *e.policy_fidelity;
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Model file: one plain-text header line, then the raw parameters as host-order doubles,
// layer by layer (weights row-major, then biases).

inline constexpr std::string_view kModelMagic = "pulseprep-model";
inline constexpr int kModelVersion = 1;

inline void save_model(const std::string& path, const MlpModel& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  const auto& meta = m.metadata();
  out << kModelMagic << ' ' << kModelVersion << " qubits=" << meta.qubits
      << " actions=" << (meta.action_set.empty() ? "-" : meta.action_set) << " encoding=" << to_string(meta.encoding)
      << " activation=relu train_seed=" << meta.train_seed << " layers=";
  for (std::size_t i = 0; i < m.layer_sizes().size(); ++i) out << (i ? "," : "") << m.layer_sizes()[i];
  out << " params=" << m.parameter_count();
  if (!meta.config_digest.empty()) out << " config_digest=" << meta.config_digest;
  out << '\n';
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = m.weight(l);
    out.write(reinterpret_cast<const char*>(w.data()), static_cast<std::streamsize>(w.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(m.bias(l).data()),
              static_cast<std::streamsize>(m.bias(l).size() * sizeof(double)));
  }
  if (!out) throw FormatError("write to '" + path + "' failed");
}

inline MlpModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw FormatError("model '" + path + "' is empty");
  std::istringstream hs(line);
  std::string tag;
  int version = 0;
  if (!(hs >> tag >> version) || tag != kModelMagic) throw FormatError("'" + path + "' is not a model file");
  if (version != kModelVersion) throw FormatError("unsupported model version " + std::to_string(version));
  std::map<std::string, std::string> f;
  for (std::string tok; hs >> tok;) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw FormatError("malformed model header token '" + tok + "'");
    f[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  ModelMetadata meta;
  std::vector<int> sizes;
  std::size_t params = 0;
  try {
    meta.qubits = std::stoi(detail::require_field(f, "qubits"));
    meta.action_set = detail::require_field(f, "actions");
    if (meta.action_set == "-") meta.action_set.clear();
    meta.encoding = parse_encoding(detail::require_field(f, "encoding"));
    meta.train_seed = std::stoull(detail::require_field(f, "train_seed"));
    if (detail::require_field(f, "activation") != "relu") throw FormatError("unsupported hidden activation");
    std::istringstream ls(detail::require_field(f, "layers"));
    for (std::string s; std::getline(ls, s, ',');) sizes.push_back(std::stoi(s));
    params = std::stoull(detail::require_field(f, "params"));
    if (f.count("config_digest")) meta.config_digest = f.at("config_digest");
  } catch (const std::logic_error& e) {
    throw FormatError(std::string("malformed model header: ") + e.what());
  }
  MlpModel m(sizes, meta);
  if (m.parameter_count() != params) throw FormatError("model parameter count disagrees with its layer sizes");
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(m.weight(l).rows(), m.weight(l).cols());
    if (!in.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(w.size() * sizeof(double))) ||
        !in.read(reinterpret_cast<char*>(m.bias(l).data()),
                 static_cast<std::streamsize>(m.bias(l).size() * sizeof(double)))) {
      throw FormatError("model '" + path + "' is truncated (layer " + std::to_string(l) + ")");
    }
    m.weight(l) = w;
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("model '" + path + "' has trailing bytes");
  if (!m.all_finite()) throw FormatError("model '" + path + "' contains non-finite parameters");
  return m;
}

// Rejects a model built for a different system or encoding.
inline void check_model_matches(const MlpModel& m, int qubits, const ActionSet& aset,
                                std::optional<Encoding> encoding = std::nullopt) {
  const auto& meta = m.metadata();
  if (meta.qubits != qubits) {
    throw MismatchError("model is for " + std::to_string(meta.qubits) + " qubit(s), expected " + std::to_string(qubits));
  }
  if (meta.action_set != aset.id()) {
    throw MismatchError("model action set '" + meta.action_set + "' differs from '" + aset.id() + "'");
  }
  if (m.output_size() != aset.size()) throw MismatchError("model output size differs from the action count");
  if (encoding && meta.encoding != *encoding) {
    throw MismatchError("model encoding '" + std::string(to_string(meta.encoding)) + "' differs from expected '" +
                        std::string(to_string(*encoding)) + "'");
  }
  if (m.input_size() != feature_size(meta.encoding, qubits == 1 ? 2 : 4)) {
    throw MismatchError("model input size disagrees with its encoding");
  }
}

}  // namespace pulseprep
