// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace flyeval {

inline constexpr int kTrajFormatVersion = 1;
inline constexpr std::size_t kMotionDim = 8;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a) noexcept;

/// Circular chamber centered at the origin.
struct Arena {
  double radius = 0.0;  // mm
  bool operator==(const Arena&) const = default;
};

enum class Sex { male, female };
std::string to_string(Sex s);
Sex parse_sex(const std::string& s);

enum class Split { train, validation, test };
std::string to_string(Split s);
Split parse_split(const std::string& s);

/// Per-frame body state. Units: mm and radians.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double major = 1.0;
  double wing_angle_l = 0.0;
  double wing_angle_r = 0.0;
  double wing_len_l = 0.0;
  double wing_len_r = 0.0;

  bool operator==(const Pose&) const = default;
};

/// 8-d movement between consecutive frames. fwd/side/dtheta are deltas in the
/// previous body frame; the remaining fields are absolute next-frame values.
struct MotionDelta {
  double fwd = 0.0;
  double side = 0.0;
  double dtheta = 0.0;
  double major = 1.0;
  double wing_angle_l = 0.0;
  double wing_angle_r = 0.0;
  double wing_len_l = 0.0;
  double wing_len_r = 0.0;

  std::array<double, kMotionDim> to_array() const noexcept;
  static MotionDelta from_array(const std::array<double, kMotionDim>& a) noexcept;
  bool operator==(const MotionDelta&) const = default;
};

inline constexpr std::array<const char*, kMotionDim> kMotionFeatureNames = {
    "fwd", "side", "dtheta", "major", "wing_angle_l", "wing_angle_r", "wing_len_l", "wing_len_r"};

/// Motion that keeps the agent in place with its current body shape.
MotionDelta hold_motion(const Pose& p) noexcept;

struct Trajectory {
  int agent_id = 0;
  Sex sex = Sex::male;
  std::vector<Pose> poses;
  std::vector<bool> valid;  // false marks a tracking dropout
  double fps = 30.0;

  std::size_t size() const noexcept { return poses.size(); }
  bool operator==(const Trajectory&) const = default;
};

/// All trajectories share length and fps.
struct Dataset {
  Arena arena;
  std::vector<Trajectory> trajectories;
  std::string genotype_label;
  Split split = Split::train;
  // Free-form key/value metadata; simulated datasets record their origin here.
  std::map<std::string, std::string> provenance;

  std::size_t n_agents() const noexcept { return trajectories.size(); }
  std::size_t n_frames() const noexcept {
    return trajectories.empty() ? 0 : trajectories.front().size();
  }
  double fps() const noexcept { return trajectories.empty() ? 30.0 : trajectories.front().fps; }
  bool operator==(const Dataset&) const = default;
};

/// Checks Pose invariants; throws InvariantError naming the field.
void validate_pose(const Pose& p, int agent_id, std::size_t frame);
/// Checks every Dataset invariant (shape, per-pose invariants on valid frames).
void validate_dataset(const Dataset& d);

MotionDelta extract_motion(const Pose& prev, const Pose& next) noexcept;
Pose apply_motion(const Pose& prev, const MotionDelta& m) noexcept;

std::string serialize_dataset(const Dataset& d);
Dataset parse_dataset(const std::string& text);
Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& d, const std::string& path);

/// FNV-1a over the serialized form; used for provenance.
std::string dataset_hash(const Dataset& d);

}  // namespace flyeval
