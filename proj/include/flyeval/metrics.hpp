// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flyeval/policy.hpp"
#include "flyeval/sense.hpp"
#include "flyeval/trajcore.hpp"

namespace flyeval {

// ---- pointwise ----

/// Per-field weights for n-step error. The default measures centroid
/// distance only: sqrt(w_x dx^2 + w_y dy^2 + ...). Heading uses the wrapped
/// difference.
struct PoseWeights {
  double x = 1.0, y = 1.0, theta = 0.0, major = 0.0;
  double wing_angle_l = 0.0, wing_angle_r = 0.0, wing_len_l = 0.0, wing_len_r = 0.0;
};

double pose_error(const Pose& truth, const Pose& pred, const PoseWeights& w = {});

/// min over samples of pose_error(truth, sample).
double min_sample_error(const Pose& truth, std::span<const Pose> preds, const PoseWeights& w = {});

/// Error at offset n of samples that start at real frame t0 (sample frame 0 is
/// real frame t0). Throws DataError if a sample is shorter than n + 1 frames.
double nstep_sample_error(const Trajectory& real, std::span<const Trajectory> samples, std::size_t t0,
                          std::size_t n, const PoseWeights& w = {});

struct NStepConfig {
  std::size_t n = 1;
  std::size_t m = 1;
  std::size_t stride = 0;                  // 0 means stride n
  std::optional<std::size_t> first_frame;  // default: the largest bound policy window
  std::uint64_t seed = 0;
  PoseWeights weights{};
};

struct MeanResult {
  double mean = 0.0;
  std::size_t count = 0;
};

/// Leave-one-out n-step m-sample error averaged over start frames and every
/// agent whose sex has a bound policy. Starts need valid frames t and t+n.
MeanResult nstep_error(const Dataset& real, std::shared_ptr<const Policy> male,
                       std::shared_ptr<const Policy> female, const NStepConfig& cfg);

/// Teacher-forced one-frame negative log-likelihood, summed over the 8
/// features and averaged over frames t with t and t+1 valid. Categorical
/// policies only; gaussian_nll covers the Gaussian output family. Agents are
/// filtered by `sex`, else by the policy's own sex tag.
MeanResult nll(const Dataset& d, const Policy& p, std::size_t first_frame = 0,
               std::optional<Sex> sex = std::nullopt);
MeanResult gaussian_nll(const Dataset& d, const Policy& p, std::size_t first_frame = 0,
                        std::optional<Sex> sex = std::nullopt);

// ---- distribution ----

enum class BehaviorFeature { speed, inter_distance, wall_distance, angular_motion, wing_angle };
inline constexpr BehaviorFeature kBehaviorFeatures[] = {
    BehaviorFeature::speed, BehaviorFeature::inter_distance, BehaviorFeature::wall_distance,
    BehaviorFeature::angular_motion, BehaviorFeature::wing_angle};
std::string to_string(BehaviorFeature f);
BehaviorFeature parse_behavior_feature(const std::string& s);

/// Fixed binning [lo, lo + bins*width). Values outside clip to the end bins.
struct HistogramSpec {
  BehaviorFeature feature = BehaviorFeature::speed;
  double width = 1.0;
  double lo = 0.0;
  double hi = 1.0;

  std::size_t bins() const;
  void validate() const;
  bool operator==(const HistogramSpec&) const = default;
};

/// Widths 0.05 mm/s, 0.61 mm, 0.61 mm, 0.0175 rad/frame, 0.0175 rad.
HistogramSpec default_histogram_spec(BehaviorFeature f);

struct Histogram {
  HistogramSpec spec;
  std::vector<double> mass;  // sums to 1
  std::size_t count = 0;
};

/// Missing inter-distance samples are skipped. Throws DataError when no
/// sample remains.
Histogram feature_histogram(std::span<const BehaviorSample> stats, const HistogramSpec& spec,
                            std::optional<Sex> sex = std::nullopt);
double hist_l1(const Histogram& a, const Histogram& b);

struct ChaseParams {
  double min_speed = 2.0;       // mm/s
  double max_distance = 8.0;    // mm
  double max_bearing = 0.52;    // rad, either side of the heading
  std::size_t min_duration = 1; // frames
};

class ChaseClassifier {
 public:
  virtual ~ChaseClassifier() = default;
  virtual std::string name() const = 0;
  /// Per agent, per frame chase flags. Masked frames are never chase.
  virtual std::vector<std::vector<bool>> classify(const Dataset& d) const = 0;
};

/// A frame qualifies when the agent moves at >= min_speed, another valid agent
/// lies within max_distance at |bearing| <= max_bearing, and the qualifying run
/// containing it lasts >= min_duration frames. Speed uses the displacement
/// from the previous frame, or to the next one where no previous valid frame
/// exists.
std::unique_ptr<ChaseClassifier> reference_chase_classifier(const ChaseParams& params);

struct ChaseFraction {
  double fraction = 0.0;
  std::size_t chasing = 0;
  std::size_t frames = 0;  // valid male agent-frames
};

ChaseFraction chase_fraction(const Dataset& d, const ChaseClassifier& c);

struct ChaseError {
  double value = 0.0;     // divergence with the raw estimate; +inf at the boundary
  bool infinite = false;  // raw estimate at 0 or 1 with p != p_hat
  double smoothed = 0.0;  // divergence with (k+1)/(n+2) when the raw estimate is at 0 or 1
};

/// Binomial KL divergence p ln(p/q) + (1-p) ln((1-p)/(1-q)).
double chase_divergence(double p, double q);
ChaseError chase_error(double p, const ChaseFraction& estimate);
ChaseError chase_error(double p, double p_hat);

}  // namespace flyeval
