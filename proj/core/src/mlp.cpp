#include "fedprint/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "fedprint/errors.hpp"

namespace fedprint {

void MlpArchitecture::validate() const {
  if (layer_sizes.size() < 3)
    throw ConfigError("architecture needs an input, at least one hidden and an output layer");
  for (int s : layer_sizes)
    if (s < 1) throw ConfigError("layer sizes must be positive");
}

std::size_t MlpArchitecture::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    n += static_cast<std::size_t>(layer_sizes[l] + 1) * static_cast<std::size_t>(layer_sizes[l + 1]);
  return n;
}

MlpArchitecture ModelWeights::architecture() const {
  MlpArchitecture arch;
  arch.layer_sizes.clear();
  if (layers.empty()) return arch;
  arch.layer_sizes.push_back(static_cast<int>(layers.front().weights.rows()));
  for (const auto& layer : layers) arch.layer_sizes.push_back(static_cast<int>(layer.weights.cols()));
  return arch;
}

bool ModelWeights::operator==(const ModelWeights& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& a = layers[l];
    const auto& b = other.layers[l];
    if (a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols() ||
        a.bias.size() != b.bias.size())
      return false;
    if (a.weights != b.weights || a.bias != b.bias) return false;
  }
  return true;
}

AdamState AdamState::fresh(const MlpArchitecture& arch, const AdamConfig& config) {
  AdamState s;
  s.config = config;
  s.first_moment = Vector::Zero(static_cast<Eigen::Index>(arch.parameter_count()));
  s.second_moment = Vector::Zero(static_cast<Eigen::Index>(arch.parameter_count()));
  return s;
}

ModelWeights zero_weights(const MlpArchitecture& arch) {
  arch.validate();
  ModelWeights w;
  for (std::size_t l = 0; l + 1 < arch.layer_sizes.size(); ++l) {
    DenseLayer layer;
    layer.weights = RowMatrix::Zero(arch.layer_sizes[l], arch.layer_sizes[l + 1]);
    layer.bias = Eigen::RowVectorXd::Zero(arch.layer_sizes[l + 1]);
    w.layers.push_back(std::move(layer));
  }
  return w;
}

ModelWeights init_weights(const MlpArchitecture& arch, std::uint64_t seed) {
  ModelWeights w = zero_weights(arch);
  std::mt19937_64 rng(seed);
  for (auto& layer : w.layers) {
    const double fan_in = static_cast<double>(layer.weights.rows());
    const double fan_out = static_cast<double>(layer.weights.cols());
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = dist(rng);
  }
  return w;
}

Vector flatten(const ModelWeights& weights) {
  std::size_t n = 0;
  for (const auto& l : weights.layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  Vector flat(static_cast<Eigen::Index>(n));
  Eigen::Index at = 0;
  for (const auto& l : weights.layers) {
    std::copy_n(l.weights.data(), l.weights.size(), flat.data() + at);
    at += l.weights.size();
    std::copy_n(l.bias.data(), l.bias.size(), flat.data() + at);
    at += l.bias.size();
  }
  return flat;
}

ModelWeights unflatten(const MlpArchitecture& arch, const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != arch.parameter_count())
    throw InputError("flat vector has " + std::to_string(flat.size()) + " entries, architecture needs " +
                     std::to_string(arch.parameter_count()));
  ModelWeights w = zero_weights(arch);
  Eigen::Index at = 0;
  for (auto& l : w.layers) {
    std::copy_n(flat.data() + at, l.weights.size(), l.weights.data());
    at += l.weights.size();
    std::copy_n(flat.data() + at, l.bias.size(), l.bias.data());
    at += l.bias.size();
  }
  return w;
}

namespace {

void check_input(const ModelWeights& weights, const RowMatrix& batch) {
  if (weights.layers.empty()) throw InputError("model has no layers");
  if (batch.cols() != weights.layers.front().weights.rows())
    throw InputError("batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                     std::to_string(weights.layers.front().weights.rows()));
}

// Row-wise log-softmax of the logits, in place.
void log_softmax_rows(RowMatrix& z) {
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    row.array() -= lse;
  }
}

// Returns logits; fills `activations` with the input and every hidden
// post-ReLU activation when non-null.
RowMatrix logits(const ModelWeights& weights, const RowMatrix& batch,
                 std::vector<RowMatrix>* activations) {
  RowMatrix a = batch;
  const std::size_t last = weights.layers.size() - 1;
  for (std::size_t l = 0; l < weights.layers.size(); ++l) {
    const auto& layer = weights.layers[l];
    RowMatrix z = a * layer.weights;
    z.rowwise() += layer.bias;
    if (activations) activations->push_back(std::move(a));
    if (l == last) return z;
    a = z.cwiseMax(0.0);
  }
  return a;
}

}  // namespace

RowMatrix forward(const ModelWeights& weights, const RowMatrix& batch) {
  check_input(weights, batch);
  RowMatrix z = logits(weights, batch, nullptr);
  log_softmax_rows(z);
  return z.array().exp().matrix();
}

LossAndGradient loss_and_gradient(const ModelWeights& weights, const RowMatrix& x,
                                  std::span<const int> y) {
  check_input(weights, x);
  if (x.rows() == 0 || static_cast<std::size_t>(x.rows()) != y.size())
    throw InputError("loss needs a non-empty batch with one label per row");

  std::vector<RowMatrix> acts;
  acts.reserve(weights.layers.size());
  RowMatrix logp = logits(weights, x, &acts);
  log_softmax_rows(logp);

  const auto n = static_cast<double>(x.rows());
  const auto classes = logp.cols();
  LossAndGradient out;
  double loss = 0;
  // dL/dz = (softmax - onehot) / n
  RowMatrix delta = logp.array().exp().matrix();
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const int label = y[static_cast<std::size_t>(r)];
    if (label < 0 || label >= classes) throw InputError("label out of range");
    loss -= logp(r, label);
    delta(r, label) -= 1.0;
  }
  delta /= n;
  out.loss = loss / n;

  std::vector<RowMatrix> grad_w(weights.layers.size());
  std::vector<Eigen::RowVectorXd> grad_b(weights.layers.size());
  for (std::size_t l = weights.layers.size(); l-- > 0;) {
    grad_w[l] = acts[l].transpose() * delta;
    grad_b[l] = delta.colwise().sum();
    if (l == 0) break;
    RowMatrix back = delta * weights.layers[l].weights.transpose();
    // acts[l] is the ReLU output of layer l-1; its derivative is the mask a > 0.
    delta = (acts[l].array() > 0.0).select(back, 0.0);
  }

  out.gradient.resize(static_cast<Eigen::Index>(weights.architecture().parameter_count()));
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < weights.layers.size(); ++l) {
    std::copy_n(grad_w[l].data(), grad_w[l].size(), out.gradient.data() + at);
    at += grad_w[l].size();
    std::copy_n(grad_b[l].data(), grad_b[l].size(), out.gradient.data() + at);
    at += grad_b[l].size();
  }
  return out;
}

double cross_entropy(const ModelWeights& weights, const Dataset& data) {
  check_input(weights, data.x);
  if (data.empty()) throw InputError("cross-entropy of an empty dataset");
  RowMatrix logp = logits(weights, data.x, nullptr);
  log_softmax_rows(logp);
  double loss = 0;
  for (std::size_t r = 0; r < data.size(); ++r) loss -= logp(static_cast<Eigen::Index>(r), data.y[r]);
  return loss / static_cast<double>(data.size());
}

EpochResult train_epoch(ModelWeights& weights, AdamState& adam, const Dataset& data,
                        std::size_t batch_size, std::uint64_t rng_seed) {
  if (data.empty()) throw InputError("cannot train on an empty dataset");
  if (static_cast<std::size_t>(data.x.rows()) != data.size())
    throw InputError("feature rows and labels are misaligned");
  if (batch_size < 1) throw InputError("batch size must be at least 1");
  const auto params = static_cast<Eigen::Index>(weights.architecture().parameter_count());
  if (adam.first_moment.size() != params || adam.second_moment.size() != params)
    throw InputError("optimizer state does not match the model");

  std::vector<Eigen::Index> order(data.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(rng_seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto& cfg = adam.config;
  Vector flat = flatten(weights);
  EpochResult result;
  double loss_sum = 0;
  RowMatrix xb;
  std::vector<int> yb;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    xb.resize(static_cast<Eigen::Index>(end - start), data.x.cols());
    yb.resize(end - start);
    for (std::size_t i = start; i < end; ++i) {
      xb.row(static_cast<Eigen::Index>(i - start)) = data.x.row(order[i]);
      yb[i - start] = data.y[static_cast<std::size_t>(order[i])];
    }
    const auto lg = loss_and_gradient(weights, xb, yb);
    loss_sum += lg.loss;
    ++result.batches;

    ++adam.step;
    const auto& g = lg.gradient;
    adam.first_moment = cfg.beta1 * adam.first_moment + (1.0 - cfg.beta1) * g;
    adam.second_moment = cfg.beta2 * adam.second_moment + (1.0 - cfg.beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam.step));
    flat.array() -= cfg.learning_rate * (adam.first_moment.array() / c1) /
                    ((adam.second_moment.array() / c2).sqrt() + cfg.epsilon);
    weights = unflatten(weights.architecture(), flat);
  }
  result.mean_loss = loss_sum / static_cast<double>(result.batches);
  return result;
}

std::vector<int> predict(const ModelWeights& weights, const RowMatrix& batch) {
  check_input(weights, batch);
  const RowMatrix z = logits(weights, batch, nullptr);
  std::vector<int> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    int best = 0;
    for (Eigen::Index c = 1; c < z.cols(); ++c)
      if (z(r, c) > z(r, best)) best = static_cast<int>(c);
    out[static_cast<std::size_t>(r)] = best;
  }
  return out;
}

Evaluation evaluate(const ModelWeights& weights, const Dataset& data) {
  if (data.empty()) throw InputError("cannot evaluate on an empty dataset");
  if (weights.architecture().output_size() > kClassCount)
    throw InputError("model has more outputs than device classes");
  const auto pred = predict(weights, data.x);
  Evaluation ev;
  ev.total = data.size();
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int t = data.y[i];
    if (t < 0 || t >= static_cast<int>(kClassCount)) throw InputError("label out of range");
    ++ev.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(pred[i])];
    if (t == pred[i]) ++correct;
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(ev.total);
  return ev;
}

}  // namespace fedprint
