// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "flyeval/errors.hpp"
#include "flyeval/nets.hpp"
#include "flyeval/rng.hpp"
#include "flyeval/sense.hpp"
#include "flyeval/trajcore.hpp"

namespace flyeval {

inline constexpr std::size_t kDefaultWindow = 50;

struct TrainingConfig {
  double learning_rate = 0.01;
  double l2 = 0.0001;
  std::size_t batch_size = 32;
  std::size_t window = kDefaultWindow;
  std::size_t iterations = 1000;
  std::uint64_t seed = 0;
  std::size_t width = 32;  // hidden units of the categorical networks

  void validate() const;
};

struct CategoricalOutput {
  nn::CategoricalProbs probs{};
};

/// stddev == 0 means the policy is deterministic and emits its mean.
struct GaussianOutput {
  std::array<double, kMotionDim> mean{};
  std::array<double, kMotionDim> stddev{};
};

struct PolicyOutput {
  std::variant<CategoricalOutput, GaussianOutput> dist;
  bool held = false;  // replay emitted hold-in-place over a masked frame

  bool is_categorical() const noexcept { return std::holds_alternative<CategoricalOutput>(dist); }
  const CategoricalOutput& categorical() const { return std::get<CategoricalOutput>(dist); }
  const GaussianOutput& gaussian() const { return std::get<GaussianOutput>(dist); }
};

/// Throws DataError unless rows sum to 1 +- 1e-6 with non-negative entries
/// (categorical) or every stddev is finite and >= 0 (gaussian).
void validate_output(const PolicyOutput& out);

/// Real past used to initialize a policy for one agent. motions holds
/// m_{t-L+1..t} oldest first; senses holds s_{t-L+1..t-1}, aligned with all
/// but the last motion. pose is the agent's pose at frame t.
struct PolicyHistory {
  std::vector<MotionDelta> motions;
  std::vector<SensoryFrame> senses;
  Pose pose;
  std::size_t frame = 0;
};

/// Builds a history from recorded frames [frame - window, frame] of one agent.
/// Masked frames contribute hold-in-place motions.
PolicyHistory history_from(const Dataset& d, std::size_t agent, std::size_t frame,
                           std::size_t window);

/// Per-agent rollout state. Windows never exceed the policy window.
struct PolicyState {
  std::deque<MotionDelta> motions;
  std::deque<SensoryFrame> senses;
  nn::Vec hidden;
  Pose pose;
  std::size_t frame = 0;
  bool initialized = false;
};

struct StepResult {
  PolicyOutput output;
  PolicyState state;
};

class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string kind() const = 0;
  /// Sex this model was trained for; empty for sex-agnostic policies.
  virtual std::optional<Sex> sex() const { return std::nullopt; }
  virtual const BinCodec* codec() const { return nullptr; }
  virtual std::size_t window() const { return 1; }

  PolicyState begin(const PolicyHistory& history) const;
  /// Output for the movement out of the current frame. Throws DataError on an
  /// uninitialized state.
  StepResult step(const PolicyState& state, const SensoryFrame& s) const;
  /// Commits the realized movement and the resulting pose.
  void record(PolicyState& state, const MotionDelta& m, const Pose& pose) const;

 protected:
  virtual void warm_up(PolicyState& /*state*/) const {}
  /// `next` already carries s as its newest sensory frame.
  virtual PolicyOutput predict(PolicyState& next, const SensoryFrame& s) const = 0;
};

StepResult policy_step(const Policy& p, const PolicyState& state, const SensoryFrame& s);

/// Draws a movement. Categorical outputs need the policy's codec. Gaussian
/// draws are sanitized: dtheta wrapped, major kept positive, wing lengths >= 0.
MotionDelta sample_motion(const PolicyOutput& out, const BinCodec* codec, Rng& rng);

enum class BaselineKind { halt, constant };
std::shared_ptr<const Policy> make_baseline(BaselineKind kind);

/// Re-emits the recorded movement of one trajectory.
class ReplayPolicy final : public Policy {
 public:
  explicit ReplayPolicy(std::shared_ptr<const Trajectory> traj);
  std::string kind() const override { return "replay"; }
  const Trajectory& trajectory() const noexcept { return *traj_; }

 protected:
  PolicyOutput predict(PolicyState& next, const SensoryFrame& s) const override;

 private:
  std::shared_ptr<const Trajectory> traj_;
};

std::shared_ptr<const Policy> make_replay(const Trajectory& traj);

/// Gaussian policy: per-feature least squares over [tau x 8 motions, 144 sensory, 1].
class LinearPolicy final : public Policy {
 public:
  LinearPolicy(std::size_t window, nn::Mat weights, std::array<double, kMotionDim> sigma,
               std::optional<Sex> sex);

  std::string kind() const override { return "linear"; }
  std::optional<Sex> sex() const override { return sex_; }
  std::size_t window() const override { return window_; }

  /// 8 x (window*8 + 144 + 1), raw input units, bias last.
  const nn::Mat& weights() const noexcept { return weights_; }
  const std::array<double, kMotionDim>& sigma() const noexcept { return sigma_; }
  /// Whether the fit fell back to ridge regression.
  bool used_ridge() const noexcept { return used_ridge_; }
  void set_used_ridge(bool v) noexcept { used_ridge_ = v; }

  static std::size_t input_dim(std::size_t window) { return window * kMotionDim + kSensoryDim + 1; }

 protected:
  PolicyOutput predict(PolicyState& next, const SensoryFrame& s) const override;

 private:
  std::size_t window_;
  nn::Mat weights_;
  std::array<double, kMotionDim> sigma_;
  std::optional<Sex> sex_;
  bool used_ridge_ = false;
};

/// Least-squares fit of Y (n x k) on X (n x d) with an implicit intercept.
/// Zero-variance columns get weight 0. Falls back to ridge with coefficient
/// l2 (in standardized units) when the system is rank deficient.
struct LinearFit {
  nn::Mat weights;  // k x (d + 1), intercept last
  std::vector<double> residual_std;
  bool used_ridge = false;
};
LinearFit fit_least_squares(const nn::Mat& X, const nn::Mat& Y, double l2);

std::shared_ptr<const LinearPolicy> train_linear(std::span<const Dataset> train,
                                                 const TrainingConfig& cfg,
                                                 std::optional<Sex> sex = std::nullopt);

enum class Arch { conv, gru };
std::string to_string(Arch a);
Arch parse_arch(const std::string& s);

/// Discretized-output network policy.
class CategoricalPolicy final : public Policy {
 public:
  CategoricalPolicy(Arch arch, std::size_t width, std::size_t window, BinCodec codec,
                    nn::MotionNorm norm, nn::Vec params, std::optional<Sex> sex);

  std::string kind() const override { return to_string(arch_); }
  std::optional<Sex> sex() const override { return sex_; }
  const BinCodec* codec() const override { return &codec_; }
  std::size_t window() const override { return window_; }

  Arch arch() const noexcept { return arch_; }
  std::size_t width() const noexcept { return width_; }
  const nn::MotionNorm& norm() const noexcept { return norm_; }
  const nn::Vec& params() const noexcept { return params_; }
  const nn::Trainable<nn::PolicyWindow>& net() const;

 protected:
  void warm_up(PolicyState& state) const override;
  PolicyOutput predict(PolicyState& next, const SensoryFrame& s) const override;

 private:
  Arch arch_;
  std::size_t width_;
  std::size_t window_;
  BinCodec codec_;
  nn::MotionNorm norm_;
  nn::Vec params_;
  std::optional<Sex> sex_;
  std::unique_ptr<nn::ConvPolicyNet> conv_;
  std::unique_ptr<nn::GruPolicyNet> gru_;
};

/// Generic minibatch SGD with L2 weight decay. The callback fills the batch.
/// Throws NumericalError on a non-finite loss.
template <class Example, class BatchFn>
std::vector<double> sgd_train(const nn::Trainable<Example>& net, nn::Vec& params,
                              BatchFn&& next_batch, std::size_t iterations, double learning_rate,
                              double l2) {
  std::vector<double> trace;
  trace.reserve(iterations);
  std::vector<const Example*> batch;
  nn::Vec grad(params.size());
  for (std::size_t it = 0; it < iterations; ++it) {
    batch.clear();
    next_batch(batch);
    if (batch.empty()) break;
    grad.setZero();
    double loss = 0.0;
    for (const Example* ex : batch) loss += net.loss(params, *ex, &grad);
    const double inv = 1.0 / static_cast<double>(batch.size());
    loss *= inv;
    if (!std::isfinite(loss) || !grad.allFinite()) {
      throw NumericalError("non-finite training loss at iteration " + std::to_string(it) +
                           " (loss " + std::to_string(loss) + ")");
    }
    trace.push_back(loss);
    params -= learning_rate * (grad * inv + l2 * params);
  }
  return trace;
}

/// Training interval ending at `last` (inclusive): steps at frames
/// last-steps+1..last, inputs m_f and s_f, target m_{f+1}. Frames
/// last-steps..last+1 must be valid. Without every_sense only the final
/// step's sensory row is filled.
nn::PolicyWindow make_window(const Dataset& d, std::size_t agent, std::size_t last,
                             std::size_t steps, const BinCodec& codec, const nn::MotionNorm& norm,
                             bool every_sense = true);

/// Final frames of every usable window of `steps` steps.
std::vector<std::size_t> window_ends(const Trajectory& t, std::size_t steps);

struct CategoricalTraining {
  std::shared_ptr<const CategoricalPolicy> policy;
  std::vector<double> loss_trace;  // mean batch loss (summed over features) per iteration
};

/// Samples each batch element by drawing a video uniformly, then a
/// (fly, frame) pair uniformly among that video's usable windows.
CategoricalTraining train_categorical(std::span<const Dataset> train, Arch arch,
                                      const BinCodec& codec, const TrainingConfig& cfg,
                                      std::optional<Sex> sex = std::nullopt);

/// Artifact I/O. Categorical artifacts carry the codec hash; loading checks it.
std::string serialize_policy(const Policy& p);
std::shared_ptr<const Policy> parse_policy(const std::string& text, const BinCodec* codec);
void save_policy(const Policy& p, const std::string& path);
std::shared_ptr<const Policy> load_policy(const std::string& path, const BinCodec* codec);
std::string policy_hash(const Policy& p);

}  // namespace flyeval
