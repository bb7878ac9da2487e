// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "flyeval/errors.hpp"
#include "flyeval/policy.hpp"
#include "flyeval/synth.hpp"

using namespace flyeval;
using test::pose;

namespace {

PolicyHistory history_with(const Pose& p, const MotionDelta& last) {
  PolicyHistory h;
  h.motions = {last};
  h.pose = p;
  return h;
}

// Applies the mean output `steps` times; returns the visited poses.
std::vector<Pose> drive(const Policy& pol, PolicyHistory h, std::size_t steps) {
  PolicyState st = pol.begin(h);
  std::vector<Pose> out{st.pose};
  for (std::size_t i = 0; i < steps; ++i) {
    StepResult r = pol.step(st, SensoryFrame{});
    const MotionDelta m = MotionDelta::from_array(r.output.gaussian().mean);
    const Pose next = apply_motion(r.state.pose, m);
    st = std::move(r.state);
    pol.record(st, m, next);
    out.push_back(next);
  }
  return out;
}

Dataset noise_walk(std::size_t agents, std::size_t frames, std::uint64_t seed) {
  RandomWalkParams p;
  p.agents = agents;
  p.frames = frames;
  p.arena_radius = 5000.0;
  p.drift = 0.3;
  p.step_sigma = 0.2;
  return synth_random_walk(p, seed);
}

}  // namespace

TEST_CASE("HALT emits zero displacement deterministically") {
  auto halt = make_baseline(BaselineKind::halt);
  const Pose p = pose(1, 2, 0.5);
  MotionDelta last = hold_motion(p);
  last.fwd = 3.0;
  const StepResult r = halt->step(halt->begin(history_with(p, last)), SensoryFrame{});
  const auto& g = r.output.gaussian();
  CHECK(g.mean[0] == 0.0);
  CHECK(g.mean[1] == 0.0);
  CHECK(g.mean[2] == 0.0);
  CHECK(g.mean[3] == p.major);
  for (double s : g.stddev) CHECK(s == 0.0);
  const auto path = drive(*halt, history_with(p, last), 25);
  for (const Pose& q : path) CHECK(q == p);
}

TEST_CASE("CONST repeats the last movement") {
  auto cnst = make_baseline(BaselineKind::constant);
  const Pose p = pose(0, 0, 0);
  MotionDelta last = hold_motion(p);
  last.fwd = 1.0;
  const StepResult r = cnst->step(cnst->begin(history_with(p, last)), SensoryFrame{});
  CHECK(r.output.gaussian().mean[0] == 1.0);
  const auto path = drive(*cnst, history_with(p, last), 30);
  CHECK(path.back().x == doctest::Approx(30.0));
  CHECK(path.back().y == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("CONST with a turn traces a circular arc") {
  auto cnst = make_baseline(BaselineKind::constant);
  const Pose p = pose(0, 0, 0);
  MotionDelta last = hold_motion(p);
  last.fwd = 1.0;
  last.dtheta = 0.1;
  const auto path = drive(*cnst, history_with(p, last), 10);
  // hand oracle: translate along the current heading, then turn
  double x = 0, y = 0, th = 0;
  for (int i = 1; i <= 10; ++i) {
    x += std::cos(th);
    y += std::sin(th);
    th += 0.1;
    CHECK(path[i].x == doctest::Approx(x).epsilon(1e-12));
    CHECK(path[i].y == doctest::Approx(y).epsilon(1e-12));
  }
  // every chord subtends the same turn, so consecutive chords have equal length
  for (int i = 1; i < 10; ++i) {
    const double a = std::hypot(path[i].x - path[i - 1].x, path[i].y - path[i - 1].y);
    const double b = std::hypot(path[i + 1].x - path[i].x, path[i + 1].y - path[i].y);
    CHECK(a == doctest::Approx(b));
  }
}

TEST_CASE("stepping an uninitialized state fails") {
  auto halt = make_baseline(BaselineKind::halt);
  CHECK_THROWS_AS(halt->step(PolicyState{}, SensoryFrame{}), DataError);
}

TEST_CASE("replay re-emits recorded movement, holds over dropouts, and stops at the end") {
  Dataset d = test::dataset({{pose(0, 0), pose(1, 0), pose(2, 0), pose(3, 0)}});
  d.trajectories[0].valid[2] = false;
  auto rep = make_replay(d.trajectories[0]);
  PolicyState st = rep->begin(history_from(d, 0, 0, 1));
  StepResult r = rep->step(st, SensoryFrame{});
  CHECK_FALSE(r.output.held);
  CHECK(r.output.gaussian().mean[0] == doctest::Approx(1.0));
  st = r.state;
  rep->record(st, MotionDelta::from_array(r.output.gaussian().mean), pose(1, 0));
  r = rep->step(st, SensoryFrame{});
  CHECK(r.output.held);
  CHECK(r.output.gaussian().mean[0] == 0.0);
  st = r.state;
  rep->record(st, hold_motion(pose(1, 0)), pose(1, 0));
  r = rep->step(st, SensoryFrame{});
  CHECK(r.output.gaussian().mean[0] == doctest::Approx(2.0));  // re-synchronized from the live pose
  st = r.state;
  rep->record(st, MotionDelta::from_array(r.output.gaussian().mean), pose(3, 0));
  CHECK_THROWS_AS(rep->step(st, SensoryFrame{}), DataError);
}

TEST_CASE("history_from fills hold motions for masked frames") {
  Dataset d = test::dataset({{pose(0, 0), pose(1, 0), pose(2, 0), pose(3, 0)}});
  d.trajectories[0].valid[1] = false;
  const PolicyHistory h = history_from(d, 0, 3, 3);
  REQUIRE(h.motions.size() == 3);
  CHECK(h.motions[0].fwd == 0.0);
  CHECK(h.motions[1].fwd == 0.0);
  CHECK(h.motions[2].fwd == doctest::Approx(1.0));
  CHECK(h.senses.size() == 2);
  CHECK(h.pose == pose(3, 0));
}

TEST_CASE("least squares recovers exact linear dynamics") {
  LinearDynamicsParams lp;
  const Dataset d = synth_linear_dynamics(lp, 42);
  TrainingConfig cfg;
  cfg.window = lp.window;
  const std::vector<Dataset> train{d};
  const auto lin = train_linear(train, cfg);
  CHECK_FALSE(lin->used_ridge());
  CHECK(lin->sigma()[0] <= 1e-6);
  const nn::Mat truth = lp.true_weights();
  CHECK((lin->weights().row(0) - truth.row(0)).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("pure-noise targets give the mean and the spread") {
  const Dataset d = noise_walk(4, 1500, 9);
  TrainingConfig cfg;
  cfg.window = 2;
  const std::vector<Dataset> train{d};
  const auto lin = train_linear(train, cfg);
  const double n = 4.0 * 1500.0;
  const double tol = 3.0 * 0.2 / std::sqrt(n);
  // average prediction over a held-out recording of the same process
  const Dataset held = noise_walk(4, 1500, 10);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t a = 0; a < held.n_agents(); ++a) {
    for (std::size_t f = cfg.window; f + 1 < held.n_frames(); f += 7) {
      const StepResult r = lin->step(lin->begin(history_from(held, a, f, cfg.window)), sense_agent(held, a, f));
      sum += r.output.gaussian().mean[0];
      ++count;
    }
  }
  CHECK(std::abs(sum / static_cast<double>(count) - 0.3) <= tol);
  CHECK(std::abs(lin->sigma()[0] - 0.2) <= 3 * tol);
  CHECK(std::abs(lin->sigma()[1] - 0.2) <= 3 * tol);
}

TEST_CASE("fewer samples than inputs falls back to ridge") {
  const Dataset d = noise_walk(1, 60, 2);
  TrainingConfig cfg;
  cfg.window = 50;
  const std::vector<Dataset> train{d};
  std::shared_ptr<const LinearPolicy> lin;
  CHECK_NOTHROW(lin = train_linear(train, cfg));
  CHECK(lin->used_ridge());
  CHECK(lin->weights().allFinite());
}

TEST_CASE("fit_least_squares drops constant columns") {
  nn::Mat X(50, 2), Y(50, 1);
  for (int i = 0; i < 50; ++i) {
    X(i, 0) = i;
    X(i, 1) = 7.0;
    Y(i, 0) = 2.0 * i + 1.0;
  }
  const LinearFit f = fit_least_squares(X, Y, 1e-4);
  CHECK(f.weights(0, 0) == doctest::Approx(2.0));
  CHECK(f.weights(0, 1) == 0.0);
  CHECK(f.weights(0, 2) == doctest::Approx(1.0));
  CHECK(f.residual_std[0] <= 1e-9);
}

TEST_CASE("categorical outputs are normalized distributions") {
  const Dataset d = noise_walk(2, 400, 5);
  const BinCodec codec = fit_bins(d);
  TrainingConfig cfg;
  cfg.window = 5;
  cfg.iterations = 20;
  cfg.width = 8;
  const std::vector<Dataset> train{d};
  for (Arch a : {Arch::conv, Arch::gru}) {
    const auto res = train_categorical(train, a, codec, cfg);
    CHECK(res.loss_trace.size() == cfg.iterations);
    const auto& p = *res.policy;
    PolicyState st = p.begin(history_from(d, 0, 100, p.window()));
    const StepResult r = p.step(st, sense_agent(d, 0, 100));
    REQUIRE(r.output.is_categorical());
    CHECK_NOTHROW(validate_output(r.output));
    for (const auto& row : r.output.categorical().probs) {
      CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const Dataset d = noise_walk(2, 300, 5);
  const BinCodec codec = fit_bins(d);
  TrainingConfig cfg;
  cfg.window = 4;
  cfg.iterations = 10;
  cfg.width = 6;
  const std::vector<Dataset> train{d};
  const auto a = train_categorical(train, Arch::gru, codec, cfg);
  const auto b = train_categorical(train, Arch::gru, codec, cfg);
  CHECK(a.loss_trace == b.loss_trace);
  CHECK(serialize_policy(*a.policy) == serialize_policy(*b.policy));
}

TEST_CASE("model artifacts round-trip and check the codec") {
  const Dataset d = noise_walk(2, 400, 5);
  const BinCodec codec = fit_bins(d);
  TrainingConfig cfg;
  cfg.window = 4;
  cfg.iterations = 5;
  cfg.width = 6;
  const std::vector<Dataset> train{d};
  const auto cat = train_categorical(train, Arch::conv, codec, cfg, Sex::female).policy;
  const std::string text = serialize_policy(*cat);
  const auto back = parse_policy(text, &codec);
  CHECK(serialize_policy(*back) == text);
  CHECK(back->sex() == Sex::female);
  CHECK(policy_hash(*back) == policy_hash(*cat));

  const BinCodec other = fit_bins(noise_walk(2, 400, 6));
  CHECK_THROWS_AS(parse_policy(text, &other), DataError);
  CHECK_THROWS_AS(parse_policy(text, nullptr), DataError);

  const auto lin = train_linear(train, cfg, Sex::male);
  const std::string path = test::temp_path("linear.model");
  save_policy(*lin, path);
  const auto lback = load_policy(path, nullptr);
  CHECK(serialize_policy(*lback) == serialize_policy(*lin));
  CHECK(lback->sex() == Sex::male);
  CHECK_THROWS_AS(parse_policy("FLYMODEL 7\n", nullptr), DataError);
}

TEST_CASE("gaussian sampling sanitizes shape features") {
  PolicyOutput out{GaussianOutput{}};
  auto& g = std::get<GaussianOutput>(out.dist);
  g.mean = {0, 0, 3.1, 0.01, 0, 0, 0.0, 0.0};
  g.stddev = {1, 1, 1, 1, 1, 1, 1, 1};
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    const MotionDelta m = sample_motion(out, nullptr, rng);
    CHECK(m.major > 0.0);
    CHECK(m.wing_len_l >= 0.0);
    CHECK(m.wing_len_r >= 0.0);
    CHECK(std::abs(m.dtheta) <= 3.14159266);
  }
}
