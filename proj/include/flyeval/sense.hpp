// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flyeval/rng.hpp"
#include "flyeval/trajcore.hpp"

namespace flyeval {

inline constexpr std::size_t kSectors = 72;
inline constexpr std::size_t kSensoryDim = 2 * kSectors;
inline constexpr std::size_t kBins = 51;
inline constexpr double kChamberOffset = 3.885505;  // mm

/// Egocentric input. Sector k spans body-frame bearings
/// [-pi + k*2pi/72, -pi + (k+1)*2pi/72).
struct SensoryFrame {
  std::array<double, kSectors> vision{};
  std::array<double, kSectors> wall{};

  double operator[](std::size_t i) const noexcept {
    return i < kSectors ? vision[i] : wall[i - kSectors];
  }
  bool operator==(const SensoryFrame&) const = default;
};

double f_vision(double d) noexcept;
double f_chamber(double d) noexcept;

/// Sector k spans [-pi + k w, -pi + (k+1) w); a bearing of pi lands in sector 0.
std::size_t sector_of(double bearing) noexcept;

/// Throws DataError if self lies outside the arena.
SensoryFrame sense_frame(const Pose& self, std::span<const Pose> others, const Arena& arena);

/// Senses agent `agent` at `frame`, seeing every other agent valid at that frame.
SensoryFrame sense_agent(const Dataset& d, std::size_t agent, std::size_t frame);

/// Per-feature 51-bin discretization of MotionDelta values.
class BinCodec {
 public:
  using Edges = std::array<double, kBins + 1>;

  BinCodec() = default;
  BinCodec(std::array<Edges, kMotionDim> edges, std::string fitted_on);

  const Edges& edges(std::size_t feature) const { return edges_.at(feature); }
  const std::string& fitted_on() const noexcept { return fitted_on_; }

  std::size_t encode(std::size_t feature, double value) const;
  std::array<std::size_t, kMotionDim> encode(const MotionDelta& m) const;
  double bin_center(std::size_t feature, std::size_t bin) const;
  MotionDelta decode_centers(const std::array<std::size_t, kMotionDim>& bins) const;

  std::string serialize() const;
  static BinCodec parse(const std::string& text);
  /// Stable content hash; model artifacts record it.
  std::string hash() const;

  bool operator==(const BinCodec&) const = default;

 private:
  std::array<Edges, kMotionDim> edges_{};
  std::string fitted_on_;
};

/// Minimum number of motion samples per feature accepted by fit_bins.
inline constexpr std::size_t kMinBinSamples = kBins * 10;

/// Motion samples from every consecutive valid frame pair.
std::vector<MotionDelta> motion_samples(const Dataset& d);

/// Equal-frequency edges per feature; throws DataError on insufficient data.
BinCodec fit_bins(const Dataset& train);
BinCodec fit_bins(std::span<const MotionDelta> samples, std::string fitted_on);

/// probs: 8 rows of 51 probabilities. Throws DataError if a row is not normalized.
MotionDelta sample_categorical(std::span<const std::array<double, kBins>, kMotionDim> probs,
                               const BinCodec& codec, Rng& rng);

/// One record per (agent, frame >= 1) where the frame and its predecessor are valid.
struct BehaviorSample {
  std::size_t agent = 0;
  std::size_t frame = 0;
  Sex sex = Sex::male;
  double speed = 0.0;                    // mm/s
  std::optional<double> inter_distance;  // mm; empty when no other agent is visible
  double wall_distance = 0.0;            // mm
  double angular_motion = 0.0;           // rad/frame
  double wing_angle = 0.0;               // rad
};

std::vector<BehaviorSample> behavior_stats(const Dataset& d);

}  // namespace flyeval
