#include "yoeo/network.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "yoeo/error.hpp"
#include "yoeo/random.hpp"

namespace yoeo {

namespace {

constexpr double kPositionFeatureScale = 4.0;
constexpr double kLocalFeatureScale = 10.0;
constexpr double kProbFloor = 1e-12;

void softmax_rows(RowMatrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    const double mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    row /= row.sum();
  }
}

void affine(const RowMatrix& in, const DenseLayer& layer, RowMatrix& out) {
  out.noalias() = in * layer.weight.transpose();
  out.rowwise() += layer.bias.transpose();
}

}  // namespace

// ---------------------------------------------------------------- params

ModelParams ModelParams::zeros(int hidden1, int hidden2, int num_classes, int neighbors) {
  if (hidden1 < 1 || hidden2 < 1 || num_classes < 2 || neighbors < 1) {
    throw Error(ErrorCode::InvalidArgument, "model widths, classes and neighbors must be positive");
  }
  ModelParams p;
  p.encoder1 = DenseLayer(kInputFeatures, hidden1);
  p.encoder2 = DenseLayer(hidden1, hidden2);
  p.semantic_head = DenseLayer(hidden2, num_classes);
  p.offset_head = DenseLayer(hidden2, 3);
  p.npcs_head = DenseLayer(hidden2, kNpcsLogits);
  p.neighbors = neighbors;
  return p;
}

ModelParams ModelParams::random(std::uint64_t seed, int hidden1, int hidden2, int num_classes,
                                int neighbors) {
  ModelParams p = zeros(hidden1, hidden2, num_classes, neighbors);
  Rng rng(derive_seed(seed, 0x1a7e5));
  p.for_each_layer([&rng](DenseLayer& layer) {
    const double sigma = 1.0 / std::sqrt(static_cast<double>(layer.inputs()));
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = rng.normal(sigma);
  });
  return p;
}

void ModelParams::for_each_layer(const std::function<void(DenseLayer&)>& fn) {
  fn(encoder1);
  fn(encoder2);
  fn(semantic_head);
  fn(offset_head);
  fn(npcs_head);
}

void ModelParams::for_each_layer(const std::function<void(const DenseLayer&)>& fn) const {
  fn(encoder1);
  fn(encoder2);
  fn(semantic_head);
  fn(offset_head);
  fn(npcs_head);
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_layer([&n](const DenseLayer& l) { n += l.parameter_count(); });
  return n;
}

void ModelParams::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); };
  if (encoder1.inputs() != kInputFeatures) fail("encoder1 must take 6 input features");
  if (encoder2.inputs() != encoder1.outputs()) fail("encoder2 input width mismatch");
  for (const DenseLayer* head : {&semantic_head, &offset_head, &npcs_head}) {
    if (head->inputs() != encoder2.outputs()) fail("head input width mismatch");
  }
  if (semantic_head.outputs() < 2) fail("semantic head needs at least 2 classes");
  if (offset_head.outputs() != 3) fail("offset head must have 3 outputs");
  if (npcs_head.outputs() != kNpcsLogits) fail("npcs head must have 300 outputs");
  if (neighbors < 1) fail("neighbors must be >= 1");
  for_each_layer([&fail](const DenseLayer& l) {
    if (l.bias.size() != l.weight.rows()) fail("bias length mismatch");
    if (!l.weight.allFinite() || !l.bias.allFinite()) fail("non-finite weights");
  });
}

// ---------------------------------------------------------------- forward

RowMatrix point_features(std::span<const Vec3> points, int k) {
  const std::size_t n = points.size();
  if (k < 1 || n <= static_cast<std::size_t>(k)) {
    std::ostringstream os;
    os << "need more than " << k << " points for the k-NN feature, got " << n;
    throw Error(ErrorCode::TooFewPoints, os.str());
  }
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(n);

  // Neighbour order is (distance, then coordinates), which does not depend
  // on input order; coincident points are interchangeable.
  auto lex_less = [](const Vec3& a, const Vec3& b) {
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
  };

  RowMatrix f(static_cast<Eigen::Index>(n), kInputFeatures);
  std::vector<std::pair<double, std::size_t>> cand(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& p = points[i];
    std::size_t c = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) cand[c++] = {(points[j] - p).squaredNorm(), j};
    }
    auto less = [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return lex_less(points[a.second], points[b.second]);
    };
    std::nth_element(cand.begin(), cand.begin() + (k - 1), cand.end(), less);
    // Entries before the k-th are all <= it; sum in a canonical order.
    std::sort(cand.begin(), cand.begin() + k, less);
    Vec3 mean = Vec3::Zero();
    for (int m = 0; m < k; ++m) mean += points[cand[m].second];
    mean /= static_cast<double>(k);
    const auto row = static_cast<Eigen::Index>(i);
    f.block<1, 3>(row, 0) = (kPositionFeatureScale * (p - centroid)).transpose();
    f.block<1, 3>(row, 3) = (kLocalFeatureScale * (mean - p)).transpose();
  }
  return f;
}

namespace {

struct Activations {
  RowMatrix h1, h2;
  RowMatrix semantic_logits;
  PerPointPrediction pred;
};

Activations run_forward(const ModelParams& params, const RowMatrix& x) {
  Activations a;
  affine(x, params.encoder1, a.h1);
  a.h1 = a.h1.array().tanh();
  affine(a.h1, params.encoder2, a.h2);
  a.h2 = a.h2.array().tanh();
  affine(a.h2, params.semantic_head, a.semantic_logits);
  a.pred.semantic_probs = a.semantic_logits;
  softmax_rows(a.pred.semantic_probs);
  affine(a.h2, params.offset_head, a.pred.offsets);
  affine(a.h2, params.npcs_head, a.pred.npcs_logits);
  return a;
}

}  // namespace

PerPointPrediction forward_features(const ModelParams& params, const RowMatrix& features) {
  if (features.cols() != kInputFeatures) {
    throw Error(ErrorCode::InvalidArgument, "feature matrix must have 6 columns");
  }
  return run_forward(params, features).pred;
}

PerPointPrediction forward(const ModelParams& params, std::span<const Vec3> points) {
  return forward_features(params, point_features(points, params.neighbors));
}

// ---------------------------------------------------------------- losses

void FocalLossParams::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "focal alpha must be in (0, 1]");
  if (!(gamma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "focal gamma must be >= 0");
}

double loss_semantic(const RowMatrix& probs, std::span<const int> labels, const FocalLossParams& p,
                     RowMatrix* grad_logits) {
  p.validate();
  const Eigen::Index n = probs.rows();
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw Error(ErrorCode::InvalidArgument, "loss_semantic: label count mismatch");
  }
  if (n == 0) throw Error(ErrorCode::ZeroMask, "loss_semantic: no points");
  if (grad_logits) grad_logits->setZero(n, probs.cols());

  double sum = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= probs.cols()) throw Error(ErrorCode::InvalidArgument, "loss_semantic: label out of range");
    const double q = probs(i, y);
    const bool floored = q < kProbFloor;
    const double log_q = std::log(floored ? kProbFloor : q);
    const double one_minus = 1.0 - q;
    const double focal = p.gamma == 0.0 ? 1.0 : std::pow(one_minus, p.gamma);
    sum += -p.alpha * focal * log_q;

    if (grad_logits) {
      // dL/dz_j = g * (delta_jy - p_j), g = q * dL/dq.
      double g = 0.0;
      if (!floored) g += -p.alpha * focal;
      if (p.gamma != 0.0 && one_minus > 0.0) {
        g += p.alpha * p.gamma * std::pow(one_minus, p.gamma - 1.0) * q * log_q;
      }
      g *= inv_n;
      auto row = grad_logits->row(i);
      row = -g * probs.row(i);
      row(y) += g;
    }
  }
  return sum * inv_n;
}

double loss_center(const RowMatrix& pred_offsets, const RowMatrix& gt_offsets,
                   const std::vector<bool>& mask, RowMatrix* grad) {
  const Eigen::Index n = pred_offsets.rows();
  if (gt_offsets.rows() != n || static_cast<std::size_t>(n) != mask.size() ||
      pred_offsets.cols() != 3 || gt_offsets.cols() != 3) {
    throw Error(ErrorCode::InvalidArgument, "loss_center: shape mismatch");
  }
  const auto count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (count == 0) throw Error(ErrorCode::ZeroMask, "loss_center: no masked points");
  if (grad) grad->setZero(n, 3);
  const double inv = 1.0 / static_cast<double>(count);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    const Eigen::RowVector3d d = pred_offsets.row(i) - gt_offsets.row(i);
    const double norm = d.norm();
    sum += norm;
    if (grad && norm > 0.0) grad->row(i) = d * (inv / norm);
  }
  return sum * inv;
}

double loss_npcs(const RowMatrix& logits, std::span<const BinnedCoord> gt_bins,
                 const std::vector<bool>& mask, RowMatrix* grad) {
  const Eigen::Index n = logits.rows();
  if (logits.cols() != kNpcsLogits || static_cast<std::size_t>(n) != gt_bins.size() ||
      static_cast<std::size_t>(n) != mask.size()) {
    throw Error(ErrorCode::InvalidArgument, "loss_npcs: shape mismatch");
  }
  const auto count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (count == 0) throw Error(ErrorCode::ZeroMask, "loss_npcs: no masked points");
  if (grad) grad->setZero(n, kNpcsLogits);
  const double inv = 1.0 / (3.0 * static_cast<double>(count));
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    for (int a = 0; a < 3; ++a) {
      const int y = gt_bins[static_cast<std::size_t>(i)].index[a];
      if (y < 0 || y >= kNumBins) throw Error(ErrorCode::InvalidArgument, "loss_npcs: bin out of range");
      const auto seg = logits.row(i).segment(a * kNumBins, kNumBins);
      const double mx = seg.maxCoeff();
      const double lse = mx + std::log((seg.array() - mx).exp().sum());
      sum += lse - seg(y);
      if (grad) {
        auto g = grad->row(i).segment(a * kNumBins, kNumBins);
        g = (seg.array() - lse).exp() * inv;
        g(y) -= inv;
      }
    }
  }
  return sum * inv;
}

// ---------------------------------------------------------------- training

TrainingExample make_training_example(const Scene& scene, int neighbors, int max_points,
                                      std::uint64_t seed) {
  std::vector<std::size_t> idx(scene.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (max_points > 0 && idx.size() > static_cast<std::size_t>(max_points)) {
    Rng rng(derive_seed(seed, 0x5ab5));
    for (std::size_t k = 0; k < static_cast<std::size_t>(max_points); ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng.next() % (idx.size() - k));
      std::swap(idx[k], idx[j]);
    }
    idx.resize(static_cast<std::size_t>(max_points));
    std::sort(idx.begin(), idx.end());
  }

  // Features and offsets come from the full scene so that a subsample sees
  // the same inputs as inference on the whole cloud.
  const RowMatrix features = point_features(scene.points, neighbors);
  const PointCloud offsets = gt_offsets(scene);
  TrainingExample ex;
  ex.features.resize(static_cast<Eigen::Index>(idx.size()), kInputFeatures);
  ex.gt_offsets.resize(static_cast<Eigen::Index>(idx.size()), 3);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::size_t i = idx[k];
    const auto row = static_cast<Eigen::Index>(k);
    ex.features.row(row) = features.row(static_cast<Eigen::Index>(i));
    ex.labels.push_back(scene.gt_semantic[i]);
    ex.gt_offsets.row(row) = offsets[i].transpose();
    const bool part = scene.gt_instance[i] >= 0;
    ex.part_mask.push_back(part);
    ex.gt_bins.push_back(part ? encode_bins(*scene.gt_npcs[i]) : BinnedCoord{});
  }
  return ex;
}

LossBreakdown loss_and_gradients(const ModelParams& params, const TrainingExample& ex,
                                 const FocalLossParams& focal, const LossWeights& weights,
                                 const ActiveHeads& heads, ModelParams* grad) {
  const Activations act = run_forward(params, ex.features);
  const bool has_parts = std::find(ex.part_mask.begin(), ex.part_mask.end(), true) != ex.part_mask.end();

  LossBreakdown loss;
  RowMatrix d_sem, d_off, d_npcs;
  loss.semantic = loss_semantic(act.pred.semantic_probs, ex.labels, focal, grad ? &d_sem : nullptr);
  if (has_parts) {
    loss.center = loss_center(act.pred.offsets, ex.gt_offsets, ex.part_mask, grad ? &d_off : nullptr);
    loss.npcs = loss_npcs(act.pred.npcs_logits, ex.gt_bins, ex.part_mask, grad ? &d_npcs : nullptr);
  }
  if (heads.semantic) loss.total += weights.semantic * loss.semantic;
  if (heads.center) loss.total += weights.center * loss.center;
  if (heads.npcs) loss.total += weights.npcs * loss.npcs;
  if (!grad) return loss;

  const Eigen::Index n = ex.features.rows();
  *grad = ModelParams::zeros(params.encoder1.outputs(), params.encoder2.outputs(),
                             params.num_classes(), params.neighbors);
  RowMatrix d_h2 = RowMatrix::Zero(n, params.encoder2.outputs());
  auto head_backward = [&](const DenseLayer& layer, DenseLayer& g, RowMatrix& d_out, double w) {
    d_out *= w;
    g.weight.noalias() = d_out.transpose() * act.h2;
    g.bias = d_out.colwise().sum().transpose();
    d_h2.noalias() += d_out * layer.weight;
  };
  if (heads.semantic) head_backward(params.semantic_head, grad->semantic_head, d_sem, weights.semantic);
  if (heads.center && has_parts) head_backward(params.offset_head, grad->offset_head, d_off, weights.center);
  if (heads.npcs && has_parts) head_backward(params.npcs_head, grad->npcs_head, d_npcs, weights.npcs);
  if (!heads.any()) return loss;

  const RowMatrix d_z2 = d_h2.array() * (1.0 - act.h2.array().square());
  grad->encoder2.weight.noalias() = d_z2.transpose() * act.h1;
  grad->encoder2.bias = d_z2.colwise().sum().transpose();
  const RowMatrix d_h1 = d_z2 * params.encoder2.weight;
  const RowMatrix d_z1 = d_h1.array() * (1.0 - act.h1.array().square());
  grad->encoder1.weight.noalias() = d_z1.transpose() * ex.features;
  grad->encoder1.bias = d_z1.colwise().sum().transpose();
  return loss;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); };
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must be in [0, 1)");
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_scenes < 1) fail("batch_scenes must be >= 1");
  if (weights.semantic < 0.0 || weights.center < 0.0 || weights.npcs < 0.0) {
    fail("loss weights must be >= 0");
  }
  focal.validate();
}

namespace {

void add_scaled(ModelParams& acc, const ModelParams& g, double s) {
  acc.encoder1.weight += s * g.encoder1.weight;
  acc.encoder1.bias += s * g.encoder1.bias;
  acc.encoder2.weight += s * g.encoder2.weight;
  acc.encoder2.bias += s * g.encoder2.bias;
  acc.semantic_head.weight += s * g.semantic_head.weight;
  acc.semantic_head.bias += s * g.semantic_head.bias;
  acc.offset_head.weight += s * g.offset_head.weight;
  acc.offset_head.bias += s * g.offset_head.bias;
  acc.npcs_head.weight += s * g.npcs_head.weight;
  acc.npcs_head.bias += s * g.npcs_head.bias;
}

// velocity = momentum * velocity - lr * grad; param += velocity. Layers of
// frozen heads are left untouched so they stay bit-identical.
void sgd_step(DenseLayer& p, DenseLayer& v, const DenseLayer& g, double lr, double mu) {
  v.weight = mu * v.weight - lr * g.weight;
  v.bias = mu * v.bias - lr * g.bias;
  p.weight += v.weight;
  p.bias += v.bias;
}

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.total) && std::isfinite(l.semantic) && std::isfinite(l.center) &&
         std::isfinite(l.npcs);
}

}  // namespace

TrainResult train(const ModelParams& init, std::span<const TrainingExample> dataset,
                  const TrainConfig& cfg,
                  const std::function<void(int, const LossBreakdown&, const ModelParams&)>& on_epoch) {
  cfg.validate();
  init.validate();
  if (dataset.empty()) throw Error(ErrorCode::InvalidArgument, "train: empty dataset");

  TrainResult result;
  result.params = init;
  ModelParams& p = result.params;
  ModelParams velocity = ModelParams::zeros(p.encoder1.outputs(), p.encoder2.outputs(),
                                            p.num_classes(), p.neighbors);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(cfg.rng_seed, 0x7a1a));
  const bool encoder_trains = cfg.heads.any();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t k = order.size(); k > 1; --k) {
      std::swap(order[k - 1], order[static_cast<std::size_t>(rng.next() % k)]);
    }
    LossBreakdown epoch_loss;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_scenes)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_scenes));
      ModelParams batch_grad = ModelParams::zeros(p.encoder1.outputs(), p.encoder2.outputs(),
                                                  p.num_classes(), p.neighbors);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        ModelParams g;
        const LossBreakdown l =
            loss_and_gradients(p, dataset[order[b]], cfg.focal, cfg.weights, cfg.heads, &g);
        if (!finite(l)) {
          std::ostringstream os;
          os << "non-finite loss at epoch " << epoch << ", scene " << order[b] << " (total "
             << l.total << ", sem " << l.semantic << ", center " << l.center << ", npcs " << l.npcs
             << ")";
          throw Error(ErrorCode::NonFiniteLoss, os.str());
        }
        add_scaled(batch_grad, g, inv_batch);
        epoch_loss.total += l.total;
        epoch_loss.semantic += l.semantic;
        epoch_loss.center += l.center;
        epoch_loss.npcs += l.npcs;
      }
      const double lr = cfg.learning_rate;
      const double mu = cfg.momentum;
      if (encoder_trains) {
        sgd_step(p.encoder1, velocity.encoder1, batch_grad.encoder1, lr, mu);
        sgd_step(p.encoder2, velocity.encoder2, batch_grad.encoder2, lr, mu);
      }
      if (cfg.heads.semantic) sgd_step(p.semantic_head, velocity.semantic_head, batch_grad.semantic_head, lr, mu);
      if (cfg.heads.center) sgd_step(p.offset_head, velocity.offset_head, batch_grad.offset_head, lr, mu);
      if (cfg.heads.npcs) sgd_step(p.npcs_head, velocity.npcs_head, batch_grad.npcs_head, lr, mu);
    }
    const double inv = 1.0 / static_cast<double>(dataset.size());
    epoch_loss.total *= inv;
    epoch_loss.semantic *= inv;
    epoch_loss.center *= inv;
    epoch_loss.npcs *= inv;
    result.curve.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss, p);
  }
  return result;
}

LossBreakdown evaluate_losses(const ModelParams& params, std::span<const TrainingExample> dataset,
                              const FocalLossParams& focal, const LossWeights& weights) {
  LossBreakdown sum;
  for (const auto& ex : dataset) {
    const LossBreakdown l = loss_and_gradients(params, ex, focal, weights, ActiveHeads{}, nullptr);
    sum.total += l.total;
    sum.semantic += l.semantic;
    sum.center += l.center;
    sum.npcs += l.npcs;
  }
  if (!dataset.empty()) {
    const double inv = 1.0 / static_cast<double>(dataset.size());
    sum.total *= inv;
    sum.semantic *= inv;
    sum.center *= inv;
    sum.npcs *= inv;
  }
  return sum;
}

// ---------------------------------------------------------------- oracle

void OracleNoise::validate() const {
  if (!(offset_sigma >= 0.0) || !(npcs_sigma >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "oracle noise sigmas must be >= 0");
  }
  if (!(semantic_flip_prob >= 0.0 && semantic_flip_prob <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "semantic_flip_prob must be in [0, 1]");
  }
}

PerPointPrediction oracle_predict(const Scene& scene, const OracleNoise& noise, int num_classes) {
  noise.validate();
  const PointCloud offsets = gt_offsets(scene);
  PerPointPrediction pred(scene.size(), num_classes);
  pred.semantic_probs.setZero();
  Rng rng(derive_seed(noise.rng_seed, 0x0ac1e));
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    int label = scene.gt_semantic[i];
    if (label < 0 || label >= num_classes) {
      throw Error(ErrorCode::InvalidArgument, "oracle_predict: scene label exceeds class count");
    }
    if (noise.semantic_flip_prob > 0.0 && rng.uniform() < noise.semantic_flip_prob) {
      const int shift = 1 + rng.uniform_int(0, num_classes - 2);
      label = (label + shift) % num_classes;
    }
    pred.semantic_probs(row, label) = 1.0;

    Vec3 off = offsets[i];
    if (noise.offset_sigma > 0.0) {
      for (int a = 0; a < 3; ++a) off(a) += rng.normal(noise.offset_sigma);
    }
    pred.offsets.row(row) = off.transpose();

    if (scene.gt_npcs[i]) {
      Vec3 c = *scene.gt_npcs[i];
      if (noise.npcs_sigma > 0.0) {
        for (int a = 0; a < 3; ++a) c(a) += rng.normal(noise.npcs_sigma);
      }
      const BinnedCoord b = encode_bins(c);
      for (int a = 0; a < 3; ++a) pred.npcs_logits(row, a * kNumBins + b.index[a]) = 1.0;
    }
  }
  return pred;
}

// ---------------------------------------------------------------- weights IO

namespace {

constexpr std::array<char, 4> kMagic = {'Y', 'O', 'E', 'O'};

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.put(static_cast<char>((v >> (8 * b)) & 0xffu));
}

void put_f64(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof bits);
  for (int b = 0; b < 8; ++b) out.put(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

std::uint64_t get_bytes(std::istream& in, int count, const std::string& what) {
  std::uint64_t v = 0;
  for (int b = 0; b < count; ++b) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) {
      throw Error(ErrorCode::FormatMismatch, "weights file truncated while reading " + what);
    }
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * b);
  }
  return v;
}

}  // namespace

void save_weights(const std::filesystem::path& path, const ModelParams& params) {
  params.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kWeightsFormatVersion);
  put_u32(out, 5);
  params.for_each_layer([&out](const DenseLayer& l) {
    // Each layer is stored as [W | b].
    put_u32(out, static_cast<std::uint32_t>(l.outputs()));
    put_u32(out, static_cast<std::uint32_t>(l.inputs() + 1));
    for (int r = 0; r < l.outputs(); ++r) {
      for (int c = 0; c < l.inputs(); ++c) put_f64(out, l.weight(r, c));
      put_f64(out, l.bias(r));
    }
  });
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

ModelParams load_weights(const std::filesystem::path& path, int neighbors) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error(ErrorCode::FormatMismatch, path.string() + ": bad magic, not a YOEO weights file");
  const auto version = static_cast<std::uint32_t>(get_bytes(in, 4, "version"));
  if (version != kWeightsFormatVersion) {
    throw Error(ErrorCode::FormatMismatch, path.string() + ": unsupported weights version " + std::to_string(version));
  }
  const auto layers = static_cast<std::uint32_t>(get_bytes(in, 4, "layer count"));
  if (layers != 5) throw Error(ErrorCode::FormatMismatch, path.string() + ": expected 5 layers");

  ModelParams p;
  p.neighbors = neighbors;
  p.for_each_layer([&in](DenseLayer& l) {
    const auto rows = static_cast<std::uint32_t>(get_bytes(in, 4, "rows"));
    const auto cols = static_cast<std::uint32_t>(get_bytes(in, 4, "cols"));
    if (rows == 0 || cols < 2 || rows > (1u << 20) || cols > (1u << 20)) {
      throw Error(ErrorCode::FormatMismatch, "weights layer has implausible shape");
    }
    l = DenseLayer(static_cast<int>(cols - 1), static_cast<int>(rows));
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c + 1 < cols; ++c) {
        const std::uint64_t bits = get_bytes(in, 8, "weights");
        std::memcpy(&l.weight(r, c), &bits, sizeof bits);
      }
      const std::uint64_t bits = get_bytes(in, 8, "bias");
      std::memcpy(&l.bias(r), &bits, sizeof bits);
    }
  });
  try {
    p.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::FormatMismatch, path.string() + ": " + e.what());
  }
  return p;
}

}  // namespace yoeo
