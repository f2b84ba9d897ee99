#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "yoeo/instance.hpp"
#include "yoeo/npcs.hpp"
#include "yoeo/synthetic.hpp"

namespace yoeo {

inline constexpr int kInputFeatures = 6;
inline constexpr std::uint32_t kWeightsFormatVersion = 1;

/// Affine map y = W x + b with W stored out x in.
struct DenseLayer {
  RowMatrix weight;
  Eigen::VectorXd bias;

  DenseLayer() = default;
  DenseLayer(int in, int out)
      : weight(RowMatrix::Zero(out, in)), bias(Eigen::VectorXd::Zero(out)) {}
  int inputs() const { return static_cast<int>(weight.cols()); }
  int outputs() const { return static_cast<int>(weight.rows()); }
  std::size_t parameter_count() const { return weight.size() + bias.size(); }
};

/// Shared point-wise encoder (two tanh layers) feeding three linear heads.
struct ModelParams {
  DenseLayer encoder1;
  DenseLayer encoder2;
  DenseLayer semantic_head;
  DenseLayer offset_head;
  DenseLayer npcs_head;
  int neighbors = 16;  // k of the k-NN mean feature

  /// All-zero parameters with the given shapes.
  static ModelParams zeros(int hidden1 = 64, int hidden2 = 128, int num_classes = kNumClasses,
                           int neighbors = 16);
  /// Scaled-normal initialization, deterministic per seed.
  static ModelParams random(std::uint64_t seed, int hidden1 = 64, int hidden2 = 128,
                            int num_classes = kNumClasses, int neighbors = 16);

  int num_classes() const { return semantic_head.outputs(); }
  std::size_t parameter_count() const;

  /// Visits the five layers in serialization order.
  void for_each_layer(const std::function<void(DenseLayer&)>& fn);
  void for_each_layer(const std::function<void(const DenseLayer&)>& fn) const;

  /// Throws Error(InvalidArgument) on inconsistent shapes or non-finite weights.
  void validate() const;
};

/// Per-point input features: position relative to the cloud centroid and
/// the mean offset to the k nearest neighbours (scaled by 10). Both terms
/// are symmetric functions of the cloud, so the map is permutation
/// equivariant. Throws Error(TooFewPoints) when the cloud has <= k points.
RowMatrix point_features(std::span<const Vec3> points, int k);

/// Throws Error(TooFewPoints) when the cloud has <= params.neighbors points.
PerPointPrediction forward(const ModelParams& params, std::span<const Vec3> points);
/// Same, starting from precomputed point_features().
PerPointPrediction forward_features(const ModelParams& params, const RowMatrix& features);

struct FocalLossParams {
  double alpha = 0.25;
  double gamma = 2.0;
  void validate() const;
};

/// Mean over points of -alpha (1 - q)^gamma log q, q the probability of the
/// true class (floored at 1e-12). When `grad_logits` is given it receives
/// dL/dlogits, assuming `probs` is a softmax of those logits.
double loss_semantic(const RowMatrix& probs, std::span<const int> labels, const FocalLossParams& p,
                     RowMatrix* grad_logits = nullptr);

/// Mean over masked points of the Euclidean norm of the offset error.
/// Throws Error(ZeroMask) when nothing is masked.
double loss_center(const RowMatrix& pred_offsets, const RowMatrix& gt_offsets,
                   const std::vector<bool>& mask, RowMatrix* grad = nullptr);

/// Mean over masked points and the three axes of the softmax cross-entropy
/// of the 100-bin logits against the ground-truth bin.
/// Throws Error(ZeroMask) when nothing is masked.
double loss_npcs(const RowMatrix& logits, std::span<const BinnedCoord> gt_bins,
                 const std::vector<bool>& mask, RowMatrix* grad = nullptr);

struct ActiveHeads {
  bool semantic = true;
  bool center = true;
  bool npcs = true;
  bool any() const { return semantic || center || npcs; }
};

struct LossWeights {
  double semantic = 1.0;
  double center = 1.0;
  double npcs = 1.0;
};

struct LossBreakdown {
  double total = 0.0;
  double semantic = 0.0;
  double center = 0.0;
  double npcs = 0.0;
};

/// A scene reduced to what training needs.
struct TrainingExample {
  RowMatrix features;
  std::vector<int> labels;
  RowMatrix gt_offsets;
  std::vector<BinnedCoord> gt_bins;
  std::vector<bool> part_mask;
};

/// Features of the whole scene, optionally restricted to `max_points`
/// points (0 keeps all; the subset is deterministic per seed).
TrainingExample make_training_example(const Scene& scene, int neighbors, int max_points,
                                      std::uint64_t seed);

/// Losses of every head plus gradients of the weighted sum of the active
/// heads. Inactive heads contribute no gradient; their losses are still
/// reported (centre/NPCS are 0 for examples without part points).
LossBreakdown loss_and_gradients(const ModelParams& params, const TrainingExample& example,
                                 const FocalLossParams& focal, const LossWeights& weights,
                                 const ActiveHeads& heads, ModelParams* grad);

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int epochs = 60;
  int batch_scenes = 1;
  LossWeights weights;
  FocalLossParams focal;
  ActiveHeads heads;  // frozen heads are neither trained nor back-propagated
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct TrainResult {
  ModelParams params;
  std::vector<LossBreakdown> curve;  // per epoch, mean over scenes
};

/// Momentum SGD over shuffled scene batches. `on_epoch` (optional) is called
/// after each epoch with the epoch index, its losses and the parameters.
/// Throws Error(NonFiniteLoss) with epoch/batch diagnostics.
TrainResult train(const ModelParams& init, std::span<const TrainingExample> dataset,
                  const TrainConfig& cfg,
                  const std::function<void(int, const LossBreakdown&, const ModelParams&)>&
                      on_epoch = {});

/// Mean losses of every head over a dataset (no training).
LossBreakdown evaluate_losses(const ModelParams& params, std::span<const TrainingExample> dataset,
                              const FocalLossParams& focal, const LossWeights& weights);

struct OracleNoise {
  double offset_sigma = 0.0;  // meters
  double npcs_sigma = 0.0;    // canonical units
  double semantic_flip_prob = 0.0;
  std::uint64_t rng_seed = 0;
  void validate() const;
};

/// Ground truth dressed up as a prediction: one-hot semantics (flipped to a
/// uniformly chosen other class with the given probability), ground-truth
/// offsets plus Gaussian noise, one-hot NPCS logits at the bins of the
/// noisy ground-truth coordinates (body points get all-zero logits).
PerPointPrediction oracle_predict(const Scene& scene, const OracleNoise& noise,
                                  int num_classes = kNumClasses);

/// Little-endian "YOEO" weights file. Throws Error(Io) or
/// Error(FormatMismatch) on bad magic, version or shapes.
void save_weights(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_weights(const std::filesystem::path& path, int neighbors = 16);

}  // namespace yoeo
