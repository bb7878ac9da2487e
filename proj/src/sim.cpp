// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#include "flyeval/sim.hpp"

#include <cmath>
#include <sstream>

#include "flyeval/errors.hpp"
#include "flyeval/rng.hpp"
#include "flyeval/sense.hpp"

namespace flyeval {

std::string to_string(SimMode m) {
  switch (m) {
    case SimMode::smsf: return "smsf";
    case SimMode::rmsf: return "rmsf";
    case SimMode::smrf: return "smrf";
    case SimMode::loo: return "loo";
    case SimMode::replay: return "replay";
  }
  return "?";
}

SimMode parse_sim_mode(const std::string& s) {
  if (s == "smsf") return SimMode::smsf;
  if (s == "rmsf") return SimMode::rmsf;
  if (s == "smrf") return SimMode::smrf;
  if (s == "loo") return SimMode::loo;
  if (s == "replay") return SimMode::replay;
  throw DataError("unknown simulation mode '" + s + "'");
}

bool SimConfig::simulates(const Dataset& d, std::size_t agent) const {
  const Sex sex = d.trajectories.at(agent).sex;
  switch (mode) {
    case SimMode::smsf: return true;
    case SimMode::rmsf: return sex == Sex::female;
    case SimMode::smrf: return sex == Sex::male;
    case SimMode::loo: return agent == loo_agent;
    case SimMode::replay: return false;
  }
  return false;
}

void SimConfig::validate(const Dataset& d) const {
  if (horizon < 1) throw DataError("simulation horizon must be >= 1");
  if (mode == SimMode::loo && loo_agent >= d.n_agents()) {
    throw DataError("leave-one-out agent index " + std::to_string(loo_agent) + " out of range");
  }
  if (start + horizon >= d.n_frames()) {
    throw DataError("horizon exceeds the recording: frames " + std::to_string(start) + ".." +
                    std::to_string(start + horizon) + " requested, " + std::to_string(d.n_frames()) + " available");
  }
  for (std::size_t a = 0; a < d.n_agents(); ++a) {
    if (!simulates(d, a)) continue;
    const Sex sex = d.trajectories[a].sex;
    const auto& p = sex == Sex::male ? male_policy : female_policy;
    if (!p) throw DataError("no policy bound for simulated " + to_string(sex) + " agents");
    if (p->sex() && *p->sex() != sex) {
      throw DataError("policy trained for " + to_string(*p->sex()) + " bound to " + to_string(sex) + " agents");
    }
  }
}

Pose clamp_to_arena(const Pose& p, const Arena& arena) {
  const double r = std::hypot(p.x, p.y);
  if (r <= arena.radius) return p;
  Pose q = p;
  const double k = arena.radius * (1.0 - 1e-12) / r;
  q.x *= k;
  q.y *= k;
  return q;
}

namespace {

struct Agent {
  std::shared_ptr<const Policy> policy;
  PolicyState state;
  bool simulated = false;
  bool present = false;  // false while a replayed agent is masked
  Rng rng{0};
};

// One rollout on RNG stream `stream`; agent a draws from derive_seed(stream seed, a).
std::vector<Trajectory> simulate(const Dataset& d, const SimConfig& cfg, std::uint64_t stream) {
  cfg.validate(d);
  const std::size_t n = d.n_agents();
  const std::size_t frames = cfg.horizon + 1;
  const std::uint64_t sample_seed = derive_seed(cfg.seed, stream);

  std::vector<Agent> agents(n);
  std::vector<Trajectory> out(n);
  for (std::size_t a = 0; a < n; ++a) {
    const Trajectory& src = d.trajectories[a];
    Agent& ag = agents[a];
    ag.simulated = cfg.simulates(d, a);
    ag.rng = Rng(derive_seed(sample_seed, a));
    out[a].agent_id = src.agent_id;
    out[a].sex = src.sex;
    out[a].fps = src.fps;
    out[a].poses.reserve(frames);
    out[a].valid.reserve(frames);
    if (ag.simulated) {
      ag.policy = src.sex == Sex::male ? cfg.male_policy : cfg.female_policy;
      ag.state = ag.policy->begin(history_from(d, a, cfg.start, ag.policy->window()));
      ag.present = true;
    } else {
      // non-owning view; the dataset outlives the rollout
      ag.policy = std::make_shared<ReplayPolicy>(std::shared_ptr<const Trajectory>(std::shared_ptr<void>{}, &src));
      PolicyHistory h;
      h.frame = cfg.start;
      ag.present = src.valid[cfg.start];
      h.pose = src.poses[cfg.start];
      ag.state = ag.policy->begin(h);
    }
    out[a].poses.push_back(ag.state.pose);
    out[a].valid.push_back(ag.present);
  }

  std::vector<Pose> snapshot(n);
  std::vector<Pose> others;
  others.reserve(n);
  for (std::size_t step = 0; step < cfg.horizon; ++step) {
    for (std::size_t a = 0; a < n; ++a) snapshot[a] = agents[a].state.pose;
    for (std::size_t a = 0; a < n; ++a) {
      Agent& ag = agents[a];
      const std::size_t f = cfg.start + step;
      SensoryFrame s{};
      if (ag.simulated) {
        others.clear();
        for (std::size_t b = 0; b < n; ++b) {
          if (b != a && agents[b].present) others.push_back(snapshot[b]);
        }
        s = sense_frame(snapshot[a], others, d.arena);
      }
      StepResult r = ag.policy->step(ag.state, s);
      MotionDelta m;
      Pose next;
      if (ag.simulated) {
        m = sample_motion(r.output, ag.policy->codec(), ag.rng);
        next = clamp_to_arena(apply_motion(snapshot[a], m), d.arena);
        if (!std::isfinite(next.x) || !std::isfinite(next.y) || !std::isfinite(next.theta)) {
          throw NumericalError("non-finite pose for agent " + std::to_string(d.trajectories[a].agent_id) +
                               " at frame " + std::to_string(f + 1));
        }
        m = extract_motion(snapshot[a], next);
      } else {
        m = MotionDelta::from_array(r.output.gaussian().mean);
        next = apply_motion(snapshot[a], m);
        if (!ag.present && !r.output.held) {
          // reappearing after a dropout at start: jump to the recorded pose
          next = d.trajectories[a].poses[f + 1];
          m = extract_motion(snapshot[a], next);
        }
      }
      // senses come from the snapshot, so committing now cannot leak step t+1 poses
      ag.state = std::move(r.state);
      ag.policy->record(ag.state, m, next);
      if (!ag.simulated) ag.present = !r.output.held;
      out[a].poses.push_back(next);
      out[a].valid.push_back(ag.present);
    }
  }
  return out;
}

}  // namespace

Dataset rollout(const Dataset& d, const SimConfig& cfg) {
  Dataset sim;
  sim.arena = d.arena;
  sim.genotype_label = d.genotype_label;
  sim.split = d.split;
  sim.trajectories = simulate(d, cfg, 0);
  std::ostringstream agents;
  for (std::size_t a = 0; a < d.n_agents(); ++a) {
    if (!cfg.simulates(d, a)) continue;
    if (agents.tellp() > 0) agents << ',';
    agents << d.trajectories[a].agent_id;
  }
  sim.provenance["mode"] = cfg.mode == SimMode::loo ? "loo:" + std::to_string(cfg.loo_agent) : to_string(cfg.mode);
  sim.provenance["seed"] = std::to_string(cfg.seed);
  sim.provenance["horizon"] = std::to_string(cfg.horizon);
  sim.provenance["start_frame"] = std::to_string(cfg.start);
  sim.provenance["source_hash"] = dataset_hash(d);
  sim.provenance["simulated_agents"] = agents.str().empty() ? "none" : agents.str();
  if (cfg.male_policy) sim.provenance["policy_male"] = policy_hash(*cfg.male_policy);
  if (cfg.female_policy) sim.provenance["policy_female"] = policy_hash(*cfg.female_policy);
  return sim;
}

std::vector<Trajectory> rollout_samples(const Dataset& d, const SimConfig& cfg, std::size_t m) {
  if (cfg.mode != SimMode::loo) throw DataError("rollout_samples requires leave-one-out mode");
  if (m == 0) throw DataError("rollout_samples needs m >= 1");
  std::vector<Trajectory> out;
  out.reserve(m);
  for (std::size_t j = 0; j < m; ++j) out.push_back(std::move(simulate(d, cfg, j)[cfg.loo_agent]));
  return out;
}

}  // namespace flyeval
