// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flyeval/nets.hpp"
#include "flyeval/trajcore.hpp"

namespace flyeval {

inline constexpr std::size_t kRvfWindow = 60;
/// 8 motion channels followed by 144 sensory channels.
inline constexpr std::size_t kRawChannels = kMotionDim + kSensoryDim;
/// Mean and std of speed, angular motion, inter-distance, wall distance, wing angle.
inline constexpr std::size_t kEngineeredFeatures = 10;

enum class DiscVariant { engineered, raw };
std::string to_string(DiscVariant v);
DiscVariant parse_disc_variant(const std::string& s);
std::string to_string(nn::DiscLoss l);
nn::DiscLoss parse_disc_loss(const std::string& s);

struct WindowExample {
  nn::Mat input;  // raw: 60 x 152; engineered: 1 x 10
  int label = 0;  // 1 real, 0 fake
  std::size_t agent = 0;
  std::size_t start = 0;  // absolute first frame
};

/// Window frames w..w+59 plus the preceding frame w-1 (for the first motion).
nn::Mat raw_window(const Dataset& d, std::size_t agent, std::size_t w);
nn::Mat engineered_window(const Dataset& d, std::size_t agent, std::size_t w);

/// Absolute-time partition [0, train_end), [train_end, val_end), [val_end, end).
struct SplitBounds {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  std::size_t end = 0;
};

/// Split index 0/1/2 of the frames [first, last], or empty when they straddle
/// a boundary or leave the timeline.
std::optional<int> assign_split(const SplitBounds& b, std::size_t first, std::size_t last);

struct WindowSetConfig {
  DiscVariant variant = DiscVariant::raw;
  std::size_t stride = kRvfWindow;
  double train_fraction = 0.6;
  double validation_fraction = 0.2;
  std::size_t max_per_class = 0;  // per split, 0 = no cap
  std::uint64_t seed = 0;
};

struct WindowSet {
  std::vector<WindowExample> train, validation, test;
  SplitBounds bounds;
};

/// Real windows come from every agent of `real`; fake windows only from the
/// simulated agents named in each fake's provenance (all agents when it has
/// none), so leave-one-out rollouts keep their real surroundings. Fake frame
/// 0 sits at absolute frame provenance["start_frame"]. Each split is balanced
/// by seeded subsampling of the larger class. Throws DataError if any split
/// lacks windows of either class.
WindowSet build_window_set(const Dataset& real, std::span<const Dataset> fakes, const WindowSetConfig& cfg);
WindowSet build_window_set(const Dataset& real, const Dataset& fake, const WindowSetConfig& cfg);

/// E[(D(real) - 1)^2] + E[D(fake)^2]
double ls_loss(std::span<const double> scores_real, std::span<const double> scores_fake);

struct DiscConfig {
  DiscVariant variant = DiscVariant::raw;
  nn::DiscLoss loss = nn::DiscLoss::least_squares;
  std::size_t epochs = 100;
  double learning_rate = 0.01;
  double l2 = 0.0001;
  std::size_t batch_size = 100;
  std::uint64_t seed = 0;
  std::size_t filters1 = 16;
  std::size_t filters2 = 32;
  std::size_t hidden = 16;

  void validate() const;
  std::string hash() const;
};

struct Accuracy {
  double overall = 0.0;
  double real = 0.0;  // NaN when the set has no real windows
  double fake = 0.0;  // NaN when the set has no fake windows
  std::size_t n = 0, n_real = 0, n_fake = 0;
};

class Discriminator {
 public:
  Discriminator(DiscConfig cfg, nn::Vec mean, nn::Vec scale, nn::Vec params);

  const DiscConfig& config() const noexcept { return cfg_; }
  const nn::DiscNet& net() const noexcept { return *net_; }
  const nn::Vec& params() const noexcept { return params_; }
  const nn::Vec& mean() const noexcept { return mean_; }
  const nn::Vec& scale() const noexcept { return scale_; }
  std::size_t channels() const noexcept { return static_cast<std::size_t>(mean_.size()); }

  nn::Mat standardize(const nn::Mat& input) const;
  /// Compared against 0.5; above is "real", ties and below are "fake".
  double decision_value(const nn::Mat& input) const;

 private:
  DiscConfig cfg_;
  std::unique_ptr<nn::DiscNet> net_;
  nn::Vec mean_, scale_, params_;
};

std::unique_ptr<nn::DiscNet> make_disc_net(const DiscConfig& cfg, std::size_t channels);

struct DiscTraining {
  std::shared_ptr<const Discriminator> disc;
  std::vector<double> validation_accuracy;  // per epoch
  std::vector<double> train_objective;      // mean batch objective per epoch
};

DiscTraining train_discriminator(const WindowSet& set, const DiscConfig& cfg);

Accuracy accuracy_from_decisions(std::span<const double> values, std::span<const int> labels);
Accuracy eval_discriminator(const Discriminator& disc, std::span<const WindowExample> test);

/// Orders models by ascending overall accuracy on their fakes, lowest (best) first.
std::vector<std::pair<std::string, Accuracy>> rank_models(std::vector<std::pair<std::string, Accuracy>> results);

std::string serialize_discriminator(const Discriminator& d);
std::shared_ptr<const Discriminator> parse_discriminator(const std::string& text);

}  // namespace flyeval
