// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#include "flyeval/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "flyeval/errors.hpp"
#include "flyeval/rng.hpp"
#include "flyeval/sense.hpp"
#include "flyeval/sim.hpp"

namespace flyeval {

bool EvaluateConfig::wants(const std::string& metric) const {
  return metrics.empty() || std::find(metrics.begin(), metrics.end(), metric) != metrics.end();
}

Dataset slice_frames(const Dataset& d, std::size_t start, std::size_t length) {
  if (start + length > d.n_frames() || length == 0) throw DataError("frame slice outside the recording");
  Dataset out;
  out.arena = d.arena;
  out.genotype_label = d.genotype_label;
  out.split = d.split;
  out.provenance["slice_start"] = std::to_string(start);
  out.provenance["source_hash"] = dataset_hash(d);
  for (const Trajectory& t : d.trajectories) {
    Trajectory s;
    s.agent_id = t.agent_id;
    s.sex = t.sex;
    s.fps = t.fps;
    s.poses.assign(t.poses.begin() + static_cast<std::ptrdiff_t>(start),
                   t.poses.begin() + static_cast<std::ptrdiff_t>(start + length));
    s.valid.assign(t.valid.begin() + static_cast<std::ptrdiff_t>(start),
                   t.valid.begin() + static_cast<std::ptrdiff_t>(start + length));
    out.trajectories.push_back(std::move(s));
  }
  return out;
}

namespace {

bool has_sex(const Dataset& d, Sex s) {
  return std::any_of(d.trajectories.begin(), d.trajectories.end(),
                     [&](const Trajectory& t) { return t.sex == s; });
}

std::size_t max_window(const ModelEntry& m) {
  std::size_t w = 1;
  if (m.male) w = std::max(w, m.male->window());
  if (m.female) w = std::max(w, m.female->window());
  return w;
}

// Both sexes bound simulates everyone; a single binding keeps the other sex real.
std::optional<SimMode> free_mode(const Dataset& d, const ModelEntry& m) {
  const bool need_m = has_sex(d, Sex::male), need_f = has_sex(d, Sex::female);
  const bool ok_m = !need_m || m.male, ok_f = !need_f || m.female;
  if (ok_m && ok_f) return SimMode::smsf;
  if (ok_m && m.male) return SimMode::smrf;
  if (ok_f && m.female) return SimMode::rmsf;
  if (m.male) return SimMode::smrf;
  if (m.female) return SimMode::rmsf;
  return std::nullopt;
}

std::optional<Sex> simulated_sex(SimMode mode) {
  if (mode == SimMode::smrf) return Sex::male;
  if (mode == SimMode::rmsf) return Sex::female;
  return std::nullopt;
}

// A zero residual stddev makes the Gaussian a point mass with no finite density.
bool degenerate_gaussian(const Policy& p) {
  const auto* lin = dynamic_cast<const LinearPolicy*>(&p);
  return lin && std::any_of(lin->sigma().begin(), lin->sigma().end(), [](double s) { return !(s > 0.0); });
}

std::optional<MeanResult> likelihood(const Dataset& d, const Policy& p, std::optional<Sex> sex) {
  if (p.codec()) return nll(d, p, p.window(), sex);
  if (p.kind() == "linear" && !degenerate_gaussian(p)) return gaussian_nll(d, p, p.window(), sex);
  return std::nullopt;
}

std::optional<MeanResult> model_likelihood(const Dataset& d, const ModelEntry& m) {
  if (m.male && m.male == m.female) return likelihood(d, *m.male, std::nullopt);
  double sum = 0.0;
  std::size_t count = 0;
  for (Sex s : {Sex::male, Sex::female}) {
    const auto& p = s == Sex::male ? m.male : m.female;
    if (!p || !has_sex(d, s)) continue;
    const auto r = likelihood(d, *p, s);
    if (!r) return std::nullopt;
    sum += r->mean * static_cast<double>(r->count);
    count += r->count;
  }
  if (count == 0) return std::nullopt;
  return MeanResult{sum / static_cast<double>(count), count};
}

std::string metric_for(BehaviorFeature f) { return "hd-" + to_string(f); }

void add_distribution_rows(MetricReport& rep, const std::string& name, const Dataset& real, const Dataset& other,
                           std::optional<Sex> sex, const EvaluateConfig& cfg) {
  const bool chase_ok = has_sex(real, Sex::male) && has_sex(other, Sex::male) && real.n_agents() > 1 &&
                        other.n_agents() > 1 && (!sex || *sex == Sex::male);
  if (cfg.wants("chase") && chase_ok) {
    const auto clf = reference_chase_classifier(cfg.chase);
    const ChaseFraction pr = chase_fraction(real, *clf);
    const ChaseFraction po = chase_fraction(other, *clf);
    const ChaseError e = chase_error(pr.fraction, po);
    if (e.infinite) {
      rep.add(name, "chase", e.smoothed, po.frames, "smoothed");
    } else {
      rep.add(name, "chase", e.value, po.frames);
    }
  }
  const auto rs = behavior_stats(real);
  const auto os = behavior_stats(other);
  for (BehaviorFeature f : kBehaviorFeatures) {
    if (!cfg.wants(metric_for(f))) continue;
    const HistogramSpec spec = default_histogram_spec(f);
    const Histogram hr = feature_histogram(rs, spec, sex);
    const Histogram ho = feature_histogram(os, spec, sex);
    rep.add(name, metric_for(f), hist_l1(hr, ho), ho.count);
  }
}

bool wants_distribution(const EvaluateConfig& cfg) {
  if (cfg.wants("chase")) return true;
  for (BehaviorFeature f : kBehaviorFeatures) {
    if (cfg.wants(metric_for(f))) return true;
  }
  return false;
}

}  // namespace

MetricReport evaluate(const Dataset& test, const Dataset* reference, std::span<const ModelEntry> models,
                      const EvaluateConfig& cfg) {
  validate_dataset(test);
  for (const std::string& m : cfg.metrics) {
    if (std::find(kReportMetrics.begin(), kReportMetrics.end(), m) == kReportMetrics.end()) {
      throw DataError("unknown metric '" + m + "'");
    }
  }
  if (cfg.sim_start >= test.n_frames()) throw DataError("simulation start beyond the recording");
  const std::size_t horizon = cfg.sim_horizon ? *cfg.sim_horizon : test.n_frames() - 1 - cfg.sim_start;
  if (horizon == 0 || cfg.sim_start + horizon >= test.n_frames()) {
    throw DataError("simulation horizon must fit inside the recording");
  }

  std::vector<ModelEntry> all(models.begin(), models.end());
  if (cfg.baselines) {
    auto halt = make_baseline(BaselineKind::halt);
    auto cnst = make_baseline(BaselineKind::constant);
    all.push_back({"HALT", halt, halt});
    all.push_back({"CONST", cnst, cnst});
  }

  MetricReport rep;
  rep.provenance["seed"] = std::to_string(cfg.seed);
  rep.provenance["test_hash"] = dataset_hash(test);
  if (reference) rep.provenance["reference_hash"] = dataset_hash(*reference);
  rep.provenance["long_n"] = std::to_string(cfg.long_n);
  rep.provenance["samples"] = std::to_string(cfg.samples);
  rep.provenance["sim_start"] = std::to_string(cfg.sim_start);
  rep.provenance["sim_horizon"] = std::to_string(horizon);
  rep.provenance["disc_config"] = cfg.disc.hash();

  const Dataset real_slice = slice_frames(test, cfg.sim_start, horizon + 1);

  for (std::size_t mi = 0; mi < all.size(); ++mi) {
    const ModelEntry& m = all[mi];
    if (!m.male && !m.female) throw DataError("model '" + m.name + "' binds no policy");
    if (m.male) rep.provenance["model:" + m.name + ":male"] = policy_hash(*m.male);
    if (m.female) rep.provenance["model:" + m.name + ":female"] = policy_hash(*m.female);
    const std::uint64_t mseed = derive_seed(cfg.seed, mi);

    if (cfg.wants("nll")) {
      if (const auto r = model_likelihood(test, m)) {
        rep.add(m.name, "nll", r->mean, r->count);
      } else if ((m.male && degenerate_gaussian(*m.male)) || (m.female && degenerate_gaussian(*m.female))) {
        rep.provenance["nll_skipped:" + m.name] = "zero residual stddev";
      }
    }

    for (const auto& [metric, n] : {std::pair<std::string, std::size_t>{"1-step", 1},
                                   std::pair<std::string, std::size_t>{"30-step", cfg.long_n}}) {
      if (!cfg.wants(metric)) continue;
      NStepConfig nc;
      nc.n = n;
      nc.m = cfg.samples;
      nc.stride = cfg.stride;
      nc.first_frame = max_window(m);
      nc.seed = derive_seed(mseed, n);
      const MeanResult r = nstep_error(test, m.male, m.female, nc);
      rep.add(m.name, metric, r.mean, r.count);
    }

    if (cfg.wants("rvf")) {
      std::vector<Dataset> fakes;
      for (std::size_t a = 0; a < test.n_agents(); ++a) {
        const Trajectory& t = test.trajectories[a];
        if (!(t.sex == Sex::male ? m.male : m.female) || !t.valid[cfg.sim_start]) continue;
        SimConfig sc;
        sc.mode = SimMode::loo;
        sc.loo_agent = a;
        sc.start = cfg.sim_start;
        sc.horizon = horizon;
        sc.seed = derive_seed(derive_seed(mseed, 100), a);
        sc.male_policy = m.male;
        sc.female_policy = m.female;
        fakes.push_back(rollout(test, sc));
      }
      if (fakes.empty()) throw DataError("rvf: no agent can be simulated for model '" + m.name + "'");
      WindowSetConfig wc = cfg.windows;
      wc.variant = cfg.disc.variant;
      const WindowSet set = build_window_set(test, fakes, wc);
      const DiscTraining tr = train_discriminator(set, cfg.disc);
      const Accuracy acc = eval_discriminator(*tr.disc, set.test);
      rep.add(m.name, "rvf", acc.overall, acc.n);
    }

    if (wants_distribution(cfg)) {
      const auto mode = free_mode(test, m);
      if (!mode) continue;
      SimConfig sc;
      sc.mode = *mode;
      sc.start = cfg.sim_start;
      sc.horizon = horizon;
      sc.seed = derive_seed(mseed, 200);
      sc.male_policy = m.male;
      sc.female_policy = m.female;
      Dataset sim = rollout(test, sc);
      add_distribution_rows(rep, m.name, real_slice, sim, simulated_sex(*mode), cfg);
    }
  }

  if (reference && wants_distribution(cfg)) add_distribution_rows(rep, "TRAIN-DATA", test, *reference, std::nullopt, cfg);
  return rep;
}

}  // namespace flyeval
