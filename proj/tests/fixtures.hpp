// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "flyeval/trajcore.hpp"

namespace flyeval::test {

inline Pose pose(double x, double y, double theta = 0.0) {
  Pose p;
  p.x = x;
  p.y = y;
  p.theta = theta;
  p.major = 2.5;
  p.wing_angle_l = -0.3;
  p.wing_angle_r = 0.3;
  p.wing_len_l = 2.0;
  p.wing_len_r = 2.0;
  return p;
}

/// One trajectory per pose list, all valid, sexes alternating from male.
inline Dataset dataset(const std::vector<std::vector<Pose>>& agents, double radius = 20.0) {
  Dataset d;
  d.arena.radius = radius;
  d.genotype_label = "fixture";
  for (std::size_t a = 0; a < agents.size(); ++a) {
    Trajectory t;
    t.agent_id = static_cast<int>(a);
    t.sex = a % 2 == 0 ? Sex::male : Sex::female;
    t.poses = agents[a];
    t.valid.assign(t.poses.size(), true);
    d.trajectories.push_back(std::move(t));
  }
  return d;
}

inline std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("flyeval_test_" + name)).string();
}

}  // namespace flyeval::test
