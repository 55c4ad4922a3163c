#pragma once

// Dense feed-forward networks in double precision: parameter storage,
// forward/backward passes, plain SGD, evaluation and cost accounting.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace whalefl::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Activation { kRelu, kTanh };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

// Layer widths run input dim, hidden widths..., class count.
struct Arch {
  std::vector<int> widths;
  Activation activation = Activation::kRelu;

  int input_dim() const { return widths.front(); }
  int class_count() const { return widths.back(); }
  int hidden_layers() const { return static_cast<int>(widths.size()) - 2; }
  int layer_count() const { return static_cast<int>(widths.size()) - 1; }

  // Throws std::invalid_argument unless there is at least one hidden layer
  // and every width is positive.
  void validate() const;

  bool operator==(const Arch&) const = default;
};

struct Layer {
  Matrix weight;  // (out x in)
  Vector bias;    // (out)
};

struct Model {
  Arch arch;
  std::vector<Layer> layers;

  bool operator==(const Model& other) const;
};

struct Gradients {
  std::vector<Layer> layers;
  double loss = 0.0;
};

// A view of B examples; inputs are (B x input_dim), labels in [0, K).
struct Batch {
  Matrix inputs;
  std::vector<int> labels;

  int size() const { return static_cast<int>(labels.size()); }
};

// Intermediate values kept for a backward pass. activations[0] is the input,
// activations[l] the post-nonlinearity output of layer l (l < layer_count),
// pre[l] the pre-activation of layer l. The last pre entry holds the logits.
struct ForwardCache {
  std::vector<Matrix> activations;
  std::vector<Matrix> pre;

  const Matrix& logits() const { return pre.back(); }
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
Model init_model(const Arch& arch, std::uint64_t seed);

// Zero-valued model with the given architecture.
Model zero_model(const Arch& arch);

Matrix forward(const Model& model, const Matrix& inputs);
ForwardCache forward_cached(const Model& model, const Matrix& inputs);

// Row-wise softmax of a logits matrix.
Matrix softmax(const Matrix& logits);

// Mean softmax cross-entropy and its exact gradient. Throws NumericError
// if any intermediate is non-finite.
Gradients loss_and_grad(const Model& model, const Batch& batch);
// Same, reusing a forward pass over the batch inputs.
Gradients loss_and_grad(const Model& model, const ForwardCache& cache,
                        std::span<const int> labels);

// Backpropagates dL/dlogits (already scaled as the caller wants) through a
// cached forward pass.
Gradients backward(const Model& model, const ForwardCache& cache,
                   const Matrix& dlogits);

// Per-example squared L2 norm of the gradient of the (unreduced) per-example
// cross-entropy loss, using `labels` as targets. A dense layer's per-example
// weight gradient is an outer product, so its squared norm factors as
// |delta|^2 * |a_in|^2 and no per-example gradient is materialized.
Vector per_example_grad_sq_norms(const Model& model, const ForwardCache& cache,
                                 std::span<const int> labels);

// W <- W - lr * grad, in place.
void sgd_step(Model& model, const Gradients& grads, double lr);

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
};

// Argmax ties go to the lowest class index. Inputs are processed in chunks
// so large test sets do not allocate one giant activation matrix.
EvalResult evaluate(const Model& model, const Matrix& inputs,
                    std::span<const int> labels);

// Cost model: parameters are weights plus biases; one training example costs
// 2 FLOPs per weight forward and 4 backward.
std::int64_t count_params(std::span<const int> widths);
std::int64_t flops_per_example(std::span<const int> widths);
inline std::int64_t count_params(const Arch& arch) { return count_params(arch.widths); }
inline std::int64_t flops_per_example(const Arch& arch) {
  return flops_per_example(arch.widths);
}

// Gathers rows of `inputs` into a Batch.
Batch gather(const Matrix& inputs, std::span<const int> labels,
             std::span<const std::size_t> rows);

bool all_finite(const Model& model);

}  // namespace whalefl::nn
