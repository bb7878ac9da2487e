// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

// Desk-scale networks with hand-written backpropagation. Every network keeps
// its trainable parameters in one flat vector so training, serialization and
// finite-difference checking all work on the same layout.

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "flyeval/rng.hpp"
#include "flyeval/sense.hpp"
#include "flyeval/trajcore.hpp"

namespace flyeval::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Layout {
 public:
  std::size_t add(std::size_t n) {
    const std::size_t off = size_;
    size_ += n;
    return off;
  }
  std::size_t size() const noexcept { return size_; }

 private:
  std::size_t size_ = 0;
};

/// y = W x + b
struct Dense {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t w = 0;
  std::size_t b = 0;
  bool bias = true;

  Dense() = default;
  Dense(Layout& layout, std::size_t in_dim, std::size_t out_dim, bool with_bias = true);

  Vec forward(const Vec& params, const Vec& x) const;
  /// Accumulates parameter gradients into grad and returns dL/dx.
  Vec backward(const Vec& params, const Vec& x, const Vec& dy, Vec& grad) const;
  void init(Vec& params, Rng& rng, double gain) const;
  void zero(Vec& params) const;
};

/// Temporal convolution over a (time x channels) matrix, stride 1, zero padding.
struct Conv1d {
  std::size_t cin = 0;
  std::size_t cout = 0;
  std::size_t kernel = 0;
  std::size_t pad = 0;
  std::size_t w = 0;
  std::size_t b = 0;

  Conv1d() = default;
  Conv1d(Layout& layout, std::size_t in_ch, std::size_t out_ch, std::size_t k);

  Mat forward(const Vec& params, const Mat& x) const;
  Mat backward(const Vec& params, const Mat& x, const Mat& dy, Vec& grad) const;
  void init(Vec& params, Rng& rng) const;
};

/// Per-feature affine normalization applied to motion inputs.
struct MotionNorm {
  std::array<double, kMotionDim> mean{};
  std::array<double, kMotionDim> scale{};

  static MotionNorm fit(std::span<const MotionDelta> samples);
  static MotionNorm identity();
  Vec apply(const MotionDelta& m) const;
};

using BinTargets = std::array<std::uint8_t, kMotionDim>;

/// A training interval: step k carries motion input m_k, sensory input s_k and
/// the binned target m_{k+1}.
struct PolicyWindow {
  Mat motion;  // steps x 8, normalized
  Mat sense;   // steps x 144
  std::vector<BinTargets> targets;

  std::size_t steps() const noexcept { return targets.size(); }
};

/// Rows of 51 probabilities, one row per motion feature.
using CategoricalProbs = std::array<std::array<double, kBins>, kMotionDim>;

/// Sum over features of the categorical cross-entropy; writes dL/dlogits.
double categorical_loss(const Vec& logits, const BinTargets& target, Vec* dlogits);
CategoricalProbs softmax_rows(const Vec& logits);

/// Shared surface for anything trained by SGD on a flat parameter vector.
template <class Example>
class Trainable {
 public:
  virtual ~Trainable() = default;
  virtual std::size_t num_params() const = 0;
  virtual Vec init_params(Rng& rng) const = 0;
  /// Loss for one example; adds dL/dparams into *grad when non-null.
  virtual double loss(const Vec& params, const Example& ex, Vec* grad) const = 0;
};

/// Temporal conv over the motion window, dense branch over the current
/// sensory frame, one hidden layer, 8 x 51 logits. Loss uses the last step.
class ConvPolicyNet final : public Trainable<PolicyWindow> {
 public:
  explicit ConvPolicyNet(std::size_t width);

  std::size_t width() const noexcept { return width_; }
  std::size_t num_params() const override { return layout_.size(); }
  Vec init_params(Rng& rng) const override;
  double loss(const Vec& params, const PolicyWindow& ex, Vec* grad) const override;

  Vec logits(const Vec& params, const Mat& motion, const Vec& sense) const;

 private:
  std::size_t width_;
  Layout layout_;
  Conv1d conv_;
  Dense sense_;
  Dense hidden_;
  Dense out_;
};

/// Single GRU cell over [motion, sense] inputs with a linear 8 x 51 head.
/// Loss is the mean over steps of the per-step categorical loss.
class GruPolicyNet final : public Trainable<PolicyWindow> {
 public:
  explicit GruPolicyNet(std::size_t width);

  std::size_t width() const noexcept { return width_; }
  std::size_t num_params() const override { return layout_.size(); }
  Vec init_params(Rng& rng) const override;
  double loss(const Vec& params, const PolicyWindow& ex, Vec* grad) const override;

  Vec step(const Vec& params, const Vec& h, const Vec& input) const;
  Vec logits(const Vec& params, const Vec& h) const;

 private:
  struct Cache {
    Vec x, h, z, r, n, rh;
  };
  Vec step_cached(const Vec& params, const Vec& h, const Vec& x, Cache& c) const;

  std::size_t width_;
  Layout layout_;
  Dense wz_, wr_, wn_;  // input projections, carry the gate biases
  Dense uz_, ur_, un_;  // recurrent projections, no bias
  Dense out_;
};

enum class DiscLoss { least_squares, cross_entropy };

struct DiscExample {
  Mat input;  // time x channels; engineered inputs use a single row
  int label = 0;  // 1 real, 0 fake
};

/// Scorer for real-vs-fake windows. score() is the raw network output; for
/// cross-entropy training the probability is sigmoid(score).
class DiscNet : public Trainable<DiscExample> {
 public:
  virtual double score(const Vec& params, const Mat& input) const = 0;
  /// Input-gradient-free backward pass: dL/dscore -> parameter gradients.
  virtual void backward(const Vec& params, const Mat& input, double dscore, Vec& grad) const = 0;

  DiscLoss loss_kind() const noexcept { return loss_; }
  void set_loss_kind(DiscLoss l) noexcept { loss_ = l; }
  /// Value compared against the 0.5 threshold.
  double decision_value(const Vec& params, const Mat& input) const;
  /// Per-example loss; the trainer weights terms to match the batch objective.
  double loss(const Vec& params, const DiscExample& ex, Vec* grad) const override;

 private:
  DiscLoss loss_ = DiscLoss::least_squares;
};

class ConvDiscNet final : public DiscNet {
 public:
  ConvDiscNet(std::size_t channels, std::size_t f1, std::size_t f2, std::size_t hidden);
  std::size_t num_params() const override { return layout_.size(); }
  Vec init_params(Rng& rng) const override;
  double score(const Vec& params, const Mat& input) const override;
  void backward(const Vec& params, const Mat& input, double dscore, Vec& grad) const override;

 private:
  Layout layout_;
  Conv1d c1_, c2_;
  Dense d1_, d2_;
};

class MlpDiscNet final : public DiscNet {
 public:
  MlpDiscNet(std::size_t features, std::size_t hidden);
  std::size_t num_params() const override { return layout_.size(); }
  Vec init_params(Rng& rng) const override;
  double score(const Vec& params, const Mat& input) const override;
  void backward(const Vec& params, const Mat& input, double dscore, Vec& grad) const override;

 private:
  Layout layout_;
  Dense d1_, d2_, d3_;
};

/// Relative error ||a - b|| / max(||a|| + ||b||, tiny) for gradient checks.
double relative_error(const Vec& a, const Vec& b);

/// Central finite differences of f at x with step h.
template <class F>
Vec numeric_gradient(F&& f, Vec x, double h = 1e-5) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace flyeval::nn
