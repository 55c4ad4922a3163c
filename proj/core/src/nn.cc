#include "whalefl/nn.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "whalefl/error.h"

namespace whalefl::nn {
namespace {

constexpr Eigen::Index kEvalChunk = 2048;

void apply_activation(Activation act, Matrix& z) {
  switch (act) {
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kTanh:
      z = z.array().tanh().matrix();
      break;
  }
}

// Multiplies `grad` in place by the activation derivative evaluated at `pre`.
void apply_activation_grad(Activation act, const Matrix& pre, Matrix& grad) {
  switch (act) {
    case Activation::kRelu:
      grad = (pre.array() > 0.0).select(grad, 0.0);
      break;
    case Activation::kTanh:
      grad.array() *= 1.0 - pre.array().tanh().square();
      break;
  }
}

void check_input(const Model& model, const Matrix& inputs) {
  if (inputs.cols() != model.arch.input_dim()) {
    throw ShapeError("input has " + std::to_string(inputs.cols()) +
                     " features, model expects " +
                     std::to_string(model.arch.input_dim()));
  }
}

void check_labels(const Model& model, std::span<const int> labels,
                  Eigen::Index rows) {
  if (static_cast<Eigen::Index>(labels.size()) != rows) {
    throw ShapeError("label count " + std::to_string(labels.size()) +
                     " does not match " + std::to_string(rows) + " inputs");
  }
  const int k = model.arch.class_count();
  for (int y : labels) {
    if (y < 0 || y >= k) {
      throw ShapeError("label " + std::to_string(y) + " outside [0, " +
                       std::to_string(k) + ")");
    }
  }
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
  }
  return "relu";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

void Arch::validate() const {
  if (widths.size() < 3) {
    throw std::invalid_argument("arch needs input, at least one hidden and an output width");
  }
  for (int w : widths) {
    if (w < 1) throw std::invalid_argument("arch widths must be >= 1");
  }
}

bool Model::operator==(const Model& other) const {
  if (!(arch == other.arch) || layers.size() != other.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& a = layers[l];
    const auto& b = other.layers[l];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() ||
        a.bias.size() != b.bias.size()) {
      return false;
    }
    if (a.weight != b.weight || a.bias != b.bias) return false;
  }
  return true;
}

Model zero_model(const Arch& arch) {
  arch.validate();
  Model m{arch, {}};
  m.layers.reserve(arch.layer_count());
  for (int l = 0; l < arch.layer_count(); ++l) {
    m.layers.push_back(Layer{Matrix::Zero(arch.widths[l + 1], arch.widths[l]),
                             Vector::Zero(arch.widths[l + 1])});
  }
  return m;
}

Model init_model(const Arch& arch, std::uint64_t seed) {
  Model m = zero_model(arch);
  std::mt19937_64 rng(seed);
  for (int l = 0; l < arch.layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(arch.widths[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix& w = m.layers[l].weight;
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
  }
  return m;
}

ForwardCache forward_cached(const Model& model, const Matrix& inputs) {
  check_input(model, inputs);
  ForwardCache cache;
  const int n_layers = model.arch.layer_count();
  cache.activations.reserve(n_layers);
  cache.pre.reserve(n_layers);
  cache.activations.push_back(inputs);
  for (int l = 0; l < n_layers; ++l) {
    const Layer& layer = model.layers[l];
    Matrix z = cache.activations.back() * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    cache.pre.push_back(z);
    if (l + 1 < n_layers) {
      apply_activation(model.arch.activation, z);
      cache.activations.push_back(std::move(z));
    }
  }
  return cache;
}

Matrix forward(const Model& model, const Matrix& inputs) {
  check_input(model, inputs);
  Matrix a = inputs;
  const int n_layers = model.arch.layer_count();
  for (int l = 0; l < n_layers; ++l) {
    Matrix z = a * model.layers[l].weight.transpose();
    z.rowwise() += model.layers[l].bias.transpose();
    if (l + 1 < n_layers) apply_activation(model.arch.activation, z);
    a = std::move(z);
  }
  return a;
}

Matrix softmax(const Matrix& logits) {
  Matrix p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double mx = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - mx).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

Gradients backward(const Model& model, const ForwardCache& cache,
                   const Matrix& dlogits) {
  const int n_layers = model.arch.layer_count();
  Gradients g;
  g.layers.resize(n_layers);
  Matrix dz = dlogits;
  for (int l = n_layers - 1; l >= 0; --l) {
    g.layers[l].weight = dz.transpose() * cache.activations[l];
    g.layers[l].bias = dz.colwise().sum().transpose();
    if (l > 0) {
      Matrix da = dz * model.layers[l].weight;
      apply_activation_grad(model.arch.activation, cache.pre[l - 1], da);
      dz = std::move(da);
    }
  }
  return g;
}

Gradients loss_and_grad(const Model& model, const ForwardCache& cache,
                        std::span<const int> labels) {
  const Matrix& logits = cache.logits();
  if (logits.rows() < 1) throw ShapeError("empty batch");
  check_labels(model, labels, logits.rows());
  if (!logits.allFinite()) throw NumericError("non-finite logits in forward pass");

  const Eigen::Index n = logits.rows();
  Matrix dlogits = softmax(logits);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mx = logits.row(r).maxCoeff();
    const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    loss += lse - logits(r, labels[r]);
    dlogits(r, labels[r]) -= 1.0;
  }
  dlogits /= static_cast<double>(n);

  Gradients g = backward(model, cache, dlogits);
  g.loss = loss / static_cast<double>(n);
  if (!std::isfinite(g.loss)) throw NumericError("non-finite loss");
  for (const Layer& layer : g.layers) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw NumericError("non-finite gradient");
    }
  }
  return g;
}

Gradients loss_and_grad(const Model& model, const Batch& batch) {
  if (batch.size() < 1) throw ShapeError("empty batch");
  check_labels(model, batch.labels, batch.inputs.rows());
  return loss_and_grad(model, forward_cached(model, batch.inputs), batch.labels);
}

Vector per_example_grad_sq_norms(const Model& model, const ForwardCache& cache,
                                 std::span<const int> labels) {
  const Matrix& logits = cache.logits();
  check_labels(model, labels, logits.rows());
  Matrix delta = softmax(logits);
  for (Eigen::Index r = 0; r < delta.rows(); ++r) delta(r, labels[r]) -= 1.0;

  Vector norms = Vector::Zero(delta.rows());
  for (int l = model.arch.layer_count() - 1; l >= 0; --l) {
    const Vector in_sq = cache.activations[l].rowwise().squaredNorm();
    const Vector delta_sq = delta.rowwise().squaredNorm();
    norms.array() += delta_sq.array() * (in_sq.array() + 1.0);
    if (l > 0) {
      Matrix next = delta * model.layers[l].weight;
      apply_activation_grad(model.arch.activation, cache.pre[l - 1], next);
      delta = std::move(next);
    }
  }
  return norms;
}

void sgd_step(Model& model, const Gradients& grads, double lr) {
  if (grads.layers.size() != model.layers.size()) {
    throw ShapeError("gradient layer count does not match model");
  }
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    Layer& p = model.layers[l];
    const Layer& g = grads.layers[l];
    if (g.weight.rows() != p.weight.rows() || g.weight.cols() != p.weight.cols() ||
        g.bias.size() != p.bias.size()) {
      throw ShapeError("gradient shape does not match model at layer " +
                       std::to_string(l));
    }
    p.weight -= lr * g.weight;
    p.bias -= lr * g.bias;
  }
}

EvalResult evaluate(const Model& model, const Matrix& inputs,
                    std::span<const int> labels) {
  if (inputs.rows() == 0) throw std::invalid_argument("cannot evaluate on an empty dataset");
  check_labels(model, labels, inputs.rows());
  std::int64_t correct = 0;
  double loss_sum = 0.0;
  for (Eigen::Index start = 0; start < inputs.rows(); start += kEvalChunk) {
    const Eigen::Index len = std::min(kEvalChunk, inputs.rows() - start);
    const Matrix logits = forward(model, inputs.middleRows(start, len));
    for (Eigen::Index r = 0; r < len; ++r) {
      const auto row = logits.row(r);
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < row.size(); ++c) {
        if (row(c) > row(best)) best = c;
      }
      const int y = labels[start + r];
      if (best == y) ++correct;
      const double mx = row.maxCoeff();
      loss_sum += mx + std::log((row.array() - mx).exp().sum()) - row(y);
    }
  }
  const double n = static_cast<double>(inputs.rows());
  EvalResult out{static_cast<double>(correct) / n, loss_sum / n};
  if (!std::isfinite(out.loss)) throw NumericError("non-finite evaluation loss");
  return out;
}

std::int64_t count_params(std::span<const int> widths) {
  std::int64_t total = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    total += static_cast<std::int64_t>(widths[l]) * widths[l + 1] + widths[l + 1];
  }
  return total;
}

std::int64_t flops_per_example(std::span<const int> widths) {
  std::int64_t weights = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    weights += static_cast<std::int64_t>(widths[l]) * widths[l + 1];
  }
  return 6 * weights;
}

Batch gather(const Matrix& inputs, std::span<const int> labels,
             std::span<const std::size_t> rows) {
  Batch b;
  b.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  b.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    b.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(static_cast<Eigen::Index>(rows[i]));
    b.labels.push_back(labels[rows[i]]);
  }
  return b;
}

bool all_finite(const Model& model) {
  for (const Layer& l : model.layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

}  // namespace whalefl::nn
