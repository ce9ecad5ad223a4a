#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unicat/embedding.hpp"
#include "unicat/fusion.hpp"
#include "unicat/numerics.hpp"
#include "unicat/rng.hpp"
#include "unicat/synthdata.hpp"

namespace unicat {

enum class Mode { Train, Eval };

struct ArchConfig {
  std::vector<std::size_t> hidden{64};
  std::size_t embed_dim = 32;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
};

// y = x Wᵀ + b, weight stored (out × in).
struct Linear {
  Matrix weight;
  std::vector<double> bias;
};

// Batch-norm bottleneck with a learned scale and no additive shift.
struct BnNeck {
  std::vector<double> gamma;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  std::size_t dim() const noexcept { return gamma.size(); }
};

// BNNeck followed by a bias-free linear classifier (classes × dim). A
// classifier with zero rows means the head only tracks normalisation
// statistics and produces no logits.
struct Head {
  BnNeck neck;
  Matrix classifier;

  std::size_t num_classes() const noexcept { return classifier.rows(); }
};

// One modality backbone f_i: MLP (ReLU between layers, linear output) and
// its head.
struct StreamParams {
  std::string name;
  std::vector<Linear> layers;
  Head head;

  std::size_t input_dim() const noexcept { return layers.front().weight.cols(); }
  std::size_t embed_dim() const noexcept { return layers.back().weight.rows(); }
};

struct ModelParams {
  Strategy strategy = Strategy::UniCat;
  std::vector<StreamParams> streams;
  // Present iff has_fused_head(strategy): BNNeck + classifier over z_fuse.
  std::optional<Head> fused;

  std::size_t fused_dim() const;
};

struct HeadOutput {
  Matrix z_bn;
  Matrix logits;
  Mode mode = Mode::Eval;
  // Train-mode caches.
  std::vector<double> batch_mean;
  std::vector<double> batch_var;  // biased (divides by batch size)
  Matrix x_hat;
};

struct StreamOutput {
  Matrix z;  // pre-BN embedding
  HeadOutput head;
  Mode mode = Mode::Eval;
  // layer_inputs[l] is the input of layer l; pre_activations[l] the output of
  // hidden layer l before its ReLU.
  std::vector<Matrix> layer_inputs;
  std::vector<Matrix> pre_activations;
};

struct HeadGrads {
  std::vector<double> gamma;
  Matrix classifier;
  Matrix input;  // gradient at the head input z
};

struct StreamGrads {
  std::vector<Linear> layers;
  std::vector<double> gamma;
  Matrix classifier;
  Matrix input;  // gradient at x
};

struct ModelGrads {
  std::vector<StreamGrads> streams;
  std::optional<HeadGrads> fused;
};

// Kaiming-normal weights N(0, 2/fan_in), zero biases, γ = 1, running stats
// (0, 1). `num_classes` = 0 builds a statistics-only head.
StreamParams init_stream(std::string name, std::size_t input_dim, const ArchConfig& arch,
                         std::size_t num_classes, Rng& rng);
Head init_head(std::size_t dim, std::size_t num_classes, const ArchConfig& arch, Rng& rng);

// Streams are initialised from split(seed, "init/stream/<name>") so a
// stream's initial weights depend only on its name and the seed; the fused
// head from split(seed, "init/fused-head").
ModelParams init_model(Strategy strategy, std::span<const std::string> stream_names,
                       std::span<const std::size_t> input_dims, const ArchConfig& arch,
                       std::size_t num_classes, std::uint64_t seed);

// Pure: never mutates params. Train mode normalises with batch statistics
// (requires batch >= 2) and caches them; see commit_batch_stats.
HeadOutput head_forward(const Head& head, const Matrix& z, Mode mode);
StreamOutput forward(const StreamParams& params, const Matrix& x, Mode mode);

// Momentum update of the running statistics from a train-mode output:
// mean ← (1-m)·mean + m·μ_B, var ← (1-m)·var + m·σ²_B·B/(B-1).
void commit_batch_stats(BnNeck& neck, const HeadOutput& out);
// forward(Train) followed by commit_batch_stats on the stream's neck.
StreamOutput forward_train(StreamParams& params, const Matrix& x);

// grad_logits enters at the classifier and flows back through the BNNeck;
// returns gradients for γ, the classifier and the head input.
HeadGrads head_backward(const Head& head, const HeadOutput& out, const Matrix& grad_logits);

// grad_z enters at the pre-BN embedding (triplet path), grad_logits at the
// classifier (cross-entropy path). Both may be empty matrices to mean zero.
StreamGrads backward(const StreamParams& params, const StreamOutput& out, const Matrix& grad_z,
                     const Matrix& grad_logits);

// Backpropagates a gradient at z (pre-BN) through the MLP only.
StreamGrads mlp_backward(const StreamParams& params, const StreamOutput& out,
                         const Matrix& grad_z);

// Parameter and gradient views in one fixed order: per stream (layer weight,
// layer bias)..., γ, classifier; then fused γ, fused classifier.
std::vector<std::span<double>> parameter_views(ModelParams& params);
std::vector<std::span<double>> gradient_views(ModelGrads& grads);
ModelGrads zero_grads(const ModelParams& params);

// Which embedding embed_dataset() produces.
struct EmbedTarget {
  static EmbedTarget stream(std::size_t index) { return {false, index}; }
  static EmbedTarget multimodal() { return {true, 0}; }
  bool fused = false;
  std::size_t stream_index = 0;
};

struct InferenceOptions {
  // Per-stream l2 normalisation before fusion; unset means the strategy
  // default (on for UniCat, off for the fusion strategies).
  std::optional<bool> normalize_before_fusion;
};

// Retrieval features in eval mode for every sample tagged `split`. Stream
// targets use that stream's post-BN feature. Multimodal targets: UniCat
// concatenates the per-stream post-BN features; fusion strategies fuse the
// pre-BN embeddings and use the fused head's post-BN feature.
EmbeddingSet embed_dataset(const ModelParams& params, const MultimodalDataset& ds, Split split,
                           EmbedTarget target, const InferenceOptions& options = {});

}  // namespace unicat
