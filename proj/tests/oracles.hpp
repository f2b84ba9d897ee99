#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "yoeo/network.hpp"
#include "yoeo/random.hpp"

// Direct re-implementations of the three losses and a finite-difference
// gradient probe.
namespace yoeo::test {

inline RowMatrix random_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
  RowMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

inline RowMatrix softmax_rows(const RowMatrix& z) {
  RowMatrix p(z.rows(), z.cols());
  for (int i = 0; i < z.rows(); ++i) {
    double sum = 0.0;
    for (int j = 0; j < z.cols(); ++j) sum += std::exp(z(i, j));
    for (int j = 0; j < z.cols(); ++j) p(i, j) = std::exp(z(i, j)) / sum;
  }
  return p;
}

inline double focal_oracle(const RowMatrix& probs, const std::vector<int>& labels, double alpha, double gamma) {
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double q = std::max(probs(static_cast<int>(i), labels[i]), 1e-12);
    s += -alpha * std::pow(1.0 - q, gamma) * std::log(q);
  }
  return s / static_cast<double>(labels.size());
}

inline double npcs_oracle(const RowMatrix& logits, const std::vector<BinnedCoord>& bins, const std::vector<bool>& mask) {
  double s = 0.0;
  int count = 0;
  for (int i = 0; i < logits.rows(); ++i) {
    if (!mask[i]) continue;
    ++count;
    for (int a = 0; a < 3; ++a) {
      double z = 0.0;
      for (int b = 0; b < kNumBins; ++b) z += std::exp(logits(i, a * kNumBins + b));
      s += std::log(z) - logits(i, a * kNumBins + bins[i].index[a]);
    }
  }
  return s / (3.0 * count);
}

inline TrainingExample micro_example(Rng& rng, int n) {
  TrainingExample ex;
  ex.features = random_matrix(rng, n, kInputFeatures);
  ex.gt_offsets = random_matrix(rng, n, 3, 0.1);
  for (int i = 0; i < n; ++i) {
    ex.labels.push_back(rng.uniform_int(0, kNumClasses - 1));
    ex.gt_bins.push_back(BinnedCoord{{rng.uniform_int(0, 99), rng.uniform_int(0, 99), rng.uniform_int(0, 99)}});
    ex.part_mask.push_back(i % 2 == 0 || ex.labels.back() != 0);
  }
  return ex;
}

inline std::vector<double*> all_parameters(ModelParams& p) {
  std::vector<double*> out;
  p.for_each_layer([&](DenseLayer& l) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) out.push_back(l.weight.data() + i);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) out.push_back(l.bias.data() + i);
  });
  return out;
}

// Worst relative error between analytic and central-difference gradients
// of the selected heads, checking `stride`-spaced parameters.
inline double gradient_check(std::uint64_t seed, const ActiveHeads& heads, int stride) {
  Rng rng(seed);
  ModelParams p = ModelParams::random(seed, 8, 12);
  const TrainingExample ex = micro_example(rng, 5);
  const FocalLossParams focal{0.25, 2.0};
  const LossWeights w{1.0, 1.0, 1.0};
  ModelParams g = ModelParams::zeros(8, 12);
  loss_and_gradients(p, ex, focal, w, heads, &g);
  std::vector<double*> params = all_parameters(p);
  std::vector<double*> grads = all_parameters(g);
  double worst = 0.0;
  const double h = 1e-4;
  for (std::size_t k = static_cast<std::size_t>(seed % stride); k < params.size(); k += stride) {
    const double saved = *params[k];
    *params[k] = saved + h;
    const double up = loss_and_gradients(p, ex, focal, w, heads, nullptr).total;
    *params[k] = saved - h;
    const double down = loss_and_gradients(p, ex, focal, w, heads, nullptr).total;
    *params[k] = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = *grads[k];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
    worst = std::max(worst, std::abs(numeric - analytic) / denom);
  }
  return worst;
}

inline double center_oracle(const RowMatrix& pred, const RowMatrix& gt, const std::vector<bool>& mask) {
  double sum = 0.0;
  int count = 0;
  for (int i = 0; i < pred.rows(); ++i) {
    if (!mask[i]) continue;
    double sq = 0.0;
    for (int a = 0; a < 3; ++a) sq += (pred(i, a) - gt(i, a)) * (pred(i, a) - gt(i, a));
    sum += std::sqrt(sq);
    ++count;
  }
  return sum / count;
}

}  // namespace yoeo::test
