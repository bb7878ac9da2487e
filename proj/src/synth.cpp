// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#include "flyeval/synth.hpp"

#include <cmath>
#include <numbers>

#include "flyeval/errors.hpp"
#include "flyeval/policy.hpp"
#include "flyeval/rng.hpp"

namespace flyeval {

namespace {

constexpr double kPi = std::numbers::pi;

Dataset empty_dataset(double radius, const std::string& label) {
  Dataset d;
  d.arena.radius = radius;
  d.genotype_label = label;
  d.split = Split::train;
  return d;
}

Trajectory new_trajectory(std::size_t index, double fps, std::size_t frames) {
  Trajectory t;
  t.agent_id = static_cast<int>(index);
  t.sex = index % 2 == 0 ? Sex::male : Sex::female;
  t.fps = fps;
  t.poses.reserve(frames);
  t.valid.assign(frames, true);
  return t;
}

void require(bool ok, const char* what) {
  if (!ok) throw DataError(std::string("invalid synthetic parameters: ") + what);
}

}  // namespace

void RandomWalkParams::validate() const {
  require(agents >= 1 && frames >= 2, "need >= 1 agent and >= 2 frames");
  require(fps > 0.0 && arena_radius > 0.0 && major > 0.0 && wing_len >= 0.0, "fps, radius and major must be > 0");
  require(step_sigma >= 0.0 && turn_sigma >= 0.0 && wing_sigma >= 0.0 && drift >= 0.0, "scales must be >= 0");
}

Dataset synth_random_walk(const RandomWalkParams& p, std::uint64_t seed) {
  p.validate();
  Dataset d = empty_dataset(p.arena_radius, "synthetic-random-walk");
  const double R = p.arena_radius;
  for (std::size_t a = 0; a < p.agents; ++a) {
    Rng rng(derive_seed(seed, a));
    Trajectory t = new_trajectory(a, p.fps, p.frames);
    Pose pose;
    const double r = 0.9 * R * std::sqrt(rng.uniform());
    const double phi = rng.uniform(-kPi, kPi);
    pose.x = r * std::cos(phi);
    pose.y = r * std::sin(phi);
    pose.theta = wrap_angle(rng.uniform(-kPi, kPi));
    pose.major = p.major;
    pose.wing_len_l = pose.wing_len_r = p.wing_len;
    auto wings = [&](Pose& q) {
      q.wing_angle_l = -std::abs(p.wing_mean + p.wing_sigma * rng.normal());
      q.wing_angle_r = std::abs(p.wing_mean + p.wing_sigma * rng.normal());
    };
    wings(pose);
    t.poses.push_back(pose);
    for (std::size_t f = 1; f < p.frames; ++f) {
      MotionDelta m = hold_motion(pose);
      if (p.drift > 0.0 || p.step_sigma > 0.0) {
        m.fwd = p.drift + p.step_sigma * rng.normal();
        m.side = p.step_sigma * rng.normal();
      }
      if (p.turn_sigma > 0.0) m.dtheta = wrap_angle(p.turn_sigma * rng.normal());
      Pose next = apply_motion(pose, m);
      const double rn = std::hypot(next.x, next.y);
      if (rn > R) {
        // reflect across the wall and turn around
        const double k = std::max(0.0, 2.0 * R - rn) / rn;
        next.x *= k;
        next.y *= k;
        next.theta = wrap_angle(next.theta + kPi);
      }
      wings(next);
      t.poses.push_back(next);
      pose = next;
    }
    d.trajectories.push_back(std::move(t));
  }
  d.provenance["generator"] = "random-walk";
  d.provenance["seed"] = std::to_string(seed);
  return d;
}

void LinearDynamicsParams::validate() const {
  require(agents >= 1 && frames > window + 2 && window >= 1, "need >= 1 agent and frames > window + 2");
  require(fps > 0.0 && arena_radius > 0.0 && major_mean > 0.0, "fps, radius and major must be > 0");
  require(major_mean > 6.0 * major_sigma, "major must stay positive");
}

nn::Mat LinearDynamicsParams::true_weights() const {
  nn::Mat w = nn::Mat::Zero(static_cast<Eigen::Index>(kMotionDim),
                            static_cast<Eigen::Index>(LinearPolicy::input_dim(window)));
  for (std::size_t j = 0; j < kMotionDim; ++j) w(0, static_cast<Eigen::Index>(j)) = coeffs[j];
  w(0, w.cols() - 1) = bias;
  return w;
}

Dataset synth_linear_dynamics(const LinearDynamicsParams& p, std::uint64_t seed) {
  p.validate();
  Dataset d = empty_dataset(p.arena_radius, "synthetic-linear-dynamics");
  for (std::size_t a = 0; a < p.agents; ++a) {
    Rng rng(derive_seed(seed, a));
    Trajectory t = new_trajectory(a, p.fps, p.frames);
    Pose pose;
    const double phi = 2.0 * kPi * static_cast<double>(a) / static_cast<double>(p.agents);
    pose.x = 0.5 * p.arena_radius * std::cos(phi);
    pose.y = 0.5 * p.arena_radius * std::sin(phi);
    pose.theta = wrap_angle(rng.uniform(-kPi, kPi));
    pose.major = p.major_mean;
    pose.wing_angle_l = -p.wing_mean;
    pose.wing_angle_r = p.wing_mean;
    pose.wing_len_l = pose.wing_len_r = p.wing_len_mean;
    t.poses.push_back(pose);
    std::vector<MotionDelta> motions(p.frames);  // motions[f] moves frame f-1 to f
    for (std::size_t f = 1; f < p.frames; ++f) {
      MotionDelta m;
      m.side = p.side_sigma * rng.normal();
      m.dtheta = p.dtheta_mean + p.dtheta_sigma * rng.normal();
      m.major = p.major_mean + p.major_sigma * rng.normal();
      m.wing_angle_l = -(p.wing_mean + p.wing_sigma * rng.normal());
      m.wing_angle_r = p.wing_mean + p.wing_sigma * rng.normal();
      m.wing_len_l = std::abs(p.wing_len_mean + p.wing_len_sigma * rng.normal());
      m.wing_len_r = std::abs(p.wing_len_mean + p.wing_len_sigma * rng.normal());
      m.fwd = p.bias;
      if (f >= p.window + 1) {
        const auto src = motions[f - p.window].to_array();
        for (std::size_t j = 0; j < kMotionDim; ++j) m.fwd += p.coeffs[j] * src[j];
      }
      motions[f] = m;
      pose = apply_motion(pose, m);
      t.poses.push_back(pose);
    }
    d.trajectories.push_back(std::move(t));
  }
  d.provenance["generator"] = "linear-dynamics";
  d.provenance["seed"] = std::to_string(seed);
  return d;
}

void ChaserParams::validate() const {
  require(pairs >= 1 && frames >= 2, "need >= 1 pair and >= 2 frames");
  require(fps > 0.0 && arena_radius > 0.0 && major > 0.0 && speed >= 0.0, "fps, radius, major must be > 0");
  require(follow_distance > 0.0 && follow_distance < 0.4 * arena_radius, "follow distance must fit the arena");
  require(pursuit > 0.0 && pursuit <= 1.0, "pursuit must be in (0, 1]");
}

Dataset synth_chaser_chasee(const ChaserParams& p, std::uint64_t seed) {
  p.validate();
  Dataset d = empty_dataset(p.arena_radius, "synthetic-chaser-chasee");
  const double r0 = 0.6 * p.arena_radius;
  for (std::size_t k = 0; k < p.pairs; ++k) {
    Rng rng(derive_seed(seed, k));
    Trajectory chaser = new_trajectory(2 * k, p.fps, p.frames);
    Trajectory chasee = new_trajectory(2 * k + 1, p.fps, p.frames);
    Pose e;
    const double phi = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(p.pairs);
    e.x = r0 * std::cos(phi);
    e.y = r0 * std::sin(phi);
    e.theta = wrap_angle(phi + kPi / 2.0);  // counter-clockwise tangent
    e.major = p.major;
    e.wing_angle_l = -0.2;
    e.wing_angle_r = 0.2;
    e.wing_len_l = e.wing_len_r = 2.0;
    Pose c = e;
    c.x = e.x - p.follow_distance * std::cos(e.theta);
    c.y = e.y - p.follow_distance * std::sin(e.theta);
    for (std::size_t f = 0; f < p.frames; ++f) {
      if (f > 0) {
        MotionDelta m = hold_motion(e);
        m.fwd = p.speed;
        const double r = std::hypot(e.x, e.y);
        // circle at radius r0; turning harder when drifting outward
        m.dtheta = wrap_angle((r0 > 0.0 ? p.speed / r0 : 0.0) + 0.05 * (r - r0) / r0 + p.turn_sigma * rng.normal());
        e = apply_motion(e, m);
        const double dx = e.x - c.x, dy = e.y - c.y;
        const double dist = std::hypot(dx, dy);
        const double step = p.pursuit * (dist - p.follow_distance);
        if (dist > 0.0) {
          c.x += step * dx / dist;
          c.y += step * dy / dist;
        }
      }
      c.theta = wrap_angle(std::atan2(e.y - c.y, e.x - c.x));
      chaser.poses.push_back(c);
      chasee.poses.push_back(e);
    }
    d.trajectories.push_back(std::move(chaser));
    d.trajectories.push_back(std::move(chasee));
  }
  d.provenance["generator"] = "chaser-chasee";
  d.provenance["seed"] = std::to_string(seed);
  return d;
}

}  // namespace flyeval
