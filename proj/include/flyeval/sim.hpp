// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "flyeval/policy.hpp"
#include "flyeval/trajcore.hpp"

namespace flyeval {

/// smsf: every agent simulated. rmsf: real males, simulated females.
/// smrf: simulated males, real females. loo: only loo_agent is simulated.
/// replay: nothing is simulated.
enum class SimMode { smsf, rmsf, smrf, loo, replay };
std::string to_string(SimMode m);
SimMode parse_sim_mode(const std::string& s);

struct SimConfig {
  SimMode mode = SimMode::smsf;
  std::size_t loo_agent = 0;  // trajectory index, used only by loo
  std::size_t start = 0;      // initial frame, taken from the source dataset
  std::size_t horizon = 1;    // frames simulated after start
  std::uint64_t seed = 0;
  std::shared_ptr<const Policy> male_policy;
  std::shared_ptr<const Policy> female_policy;

  bool simulates(const Dataset& d, std::size_t agent) const;
  /// Throws DataError on a bad agent index, missing or mismatched policy
  /// binding, or a horizon past the recording.
  void validate(const Dataset& d) const;
};

/// Closed-loop rollout. Output covers frames start..start+horizon; frame 0 of
/// the output is the real frame `start`.
Dataset rollout(const Dataset& d, const SimConfig& cfg);

/// m independent samples of the loo agent, each with its own RNG stream.
std::vector<Trajectory> rollout_samples(const Dataset& d, const SimConfig& cfg, std::size_t m);

/// Moves a centroid that left the arena radially back onto the boundary.
Pose clamp_to_arena(const Pose& p, const Arena& arena);

}  // namespace flyeval
