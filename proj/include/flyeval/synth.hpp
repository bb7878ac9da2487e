// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

// Deterministic synthetic datasets. Agents alternate male, female, male, ...

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "flyeval/nets.hpp"
#include "flyeval/trajcore.hpp"

namespace flyeval {

/// Forward speed drift + N(0, step_sigma), sideways N(0, step_sigma), turning
/// N(0, turn_sigma), all per frame. Agents crossing the wall are reflected
/// back inside and turned around. With drift = step_sigma = 0 every agent is
/// stationary.
struct RandomWalkParams {
  std::size_t agents = 4;
  std::size_t frames = 1000;
  double fps = 30.0;
  double arena_radius = 20.0;
  double drift = 0.0;       // mm/frame
  double step_sigma = 0.1;  // mm/frame
  double turn_sigma = 0.1;  // rad/frame
  double major = 2.5;       // mm
  double wing_mean = 0.3;   // rad, mirrored left/right
  double wing_sigma = 0.05;
  double wing_len = 2.0;    // mm

  void validate() const;
};

Dataset synth_random_walk(const RandomWalkParams& p, std::uint64_t seed);

/// fwd(t+1) = bias + sum_j coeffs[j] * m_j(t - window + 1), i.e. a linear
/// function of the oldest motion in the window. Every other feature is drawn
/// i.i.d. each frame. Agents start far apart in a large arena so every
/// sensory input is constant.
struct LinearDynamicsParams {
  std::size_t agents = 4;
  std::size_t frames = 1500;
  double fps = 30.0;
  double arena_radius = 2000.0;
  std::size_t window = 3;
  double bias = 0.3;
  std::array<double, kMotionDim> coeffs{0.2, -0.3, 0.5, 0.05, 0.1, -0.1, 0.05, -0.05};
  double side_sigma = 0.1;
  double dtheta_mean = 0.05;
  double dtheta_sigma = 0.02;
  double major_mean = 2.5, major_sigma = 0.1;
  double wing_mean = 0.3, wing_sigma = 0.05;
  double wing_len_mean = 2.0, wing_len_sigma = 0.1;

  void validate() const;
  /// 8 x (window*8 + 144 + 1) generating weights: only the fwd row and its
  /// bias are nonzero. Layout matches LinearPolicy.
  nn::Mat true_weights() const;
};

Dataset synth_linear_dynamics(const LinearDynamicsParams& p, std::uint64_t seed);

/// Pairs of a male chaser following a female chasee at follow_distance.
/// pursuit = 1 places the chaser exactly on the pursuit point, heading at the
/// chasee; smaller values lag behind it.
struct ChaserParams {
  std::size_t pairs = 1;
  std::size_t frames = 600;
  double fps = 30.0;
  double arena_radius = 20.0;
  double speed = 0.15;  // chasee mm/frame
  double turn_sigma = 0.05;
  double follow_distance = 3.0;
  double pursuit = 1.0;
  double major = 2.5;

  void validate() const;
};

Dataset synth_chaser_chasee(const ChaserParams& p, std::uint64_t seed);

}  // namespace flyeval
