// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#include "flyeval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "flyeval/errors.hpp"
#include "flyeval/sim.hpp"

namespace flyeval {

double pose_error(const Pose& t, const Pose& p, const PoseWeights& w) {
  auto sq = [](double v) { return v * v; };
  const double e = w.x * sq(p.x - t.x) + w.y * sq(p.y - t.y) + w.theta * sq(wrap_angle(p.theta - t.theta)) +
                   w.major * sq(p.major - t.major) + w.wing_angle_l * sq(p.wing_angle_l - t.wing_angle_l) +
                   w.wing_angle_r * sq(p.wing_angle_r - t.wing_angle_r) +
                   w.wing_len_l * sq(p.wing_len_l - t.wing_len_l) + w.wing_len_r * sq(p.wing_len_r - t.wing_len_r);
  return std::sqrt(e);
}

double min_sample_error(const Pose& truth, std::span<const Pose> preds, const PoseWeights& w) {
  if (preds.empty()) throw DataError("min_sample_error needs at least one sample");
  double best = std::numeric_limits<double>::infinity();
  for (const Pose& p : preds) best = std::min(best, pose_error(truth, p, w));
  return best;
}

double nstep_sample_error(const Trajectory& real, std::span<const Trajectory> samples, std::size_t t0,
                          std::size_t n, const PoseWeights& w) {
  if (t0 + n >= real.size()) throw DataError("n-step target frame beyond the recording");
  std::vector<Pose> preds;
  preds.reserve(samples.size());
  for (const Trajectory& s : samples) {
    if (s.size() < n + 1) throw DataError("sample horizon shorter than n");
    preds.push_back(s.poses[n]);
  }
  return min_sample_error(real.poses[t0 + n], preds, w);
}

MeanResult nstep_error(const Dataset& real, std::shared_ptr<const Policy> male,
                       std::shared_ptr<const Policy> female, const NStepConfig& cfg) {
  if (cfg.n == 0 || cfg.m == 0) throw DataError("n-step error needs n >= 1 and m >= 1");
  const std::size_t stride = cfg.stride == 0 ? cfg.n : cfg.stride;
  std::size_t first = 0;
  if (cfg.first_frame) {
    first = *cfg.first_frame;
  } else {
    if (male) first = std::max(first, male->window());
    if (female) first = std::max(first, female->window());
  }
  SimConfig sc;
  sc.mode = SimMode::loo;
  sc.horizon = cfg.n;
  sc.male_policy = male;
  sc.female_policy = female;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t a = 0; a < real.n_agents(); ++a) {
    const Trajectory& t = real.trajectories[a];
    if (!(t.sex == Sex::male ? male : female)) continue;
    sc.loo_agent = a;
    for (std::size_t t0 = first; t0 + cfg.n < t.size(); t0 += stride) {
      if (!t.valid[t0] || !t.valid[t0 + cfg.n]) continue;
      sc.start = t0;
      // per-(agent, start) stream keeps results independent of iteration order
      sc.seed = derive_seed(derive_seed(cfg.seed, a), t0);
      const auto samples = rollout_samples(real, sc, cfg.m);
      sum += nstep_sample_error(t, samples, t0, cfg.n, cfg.weights);
      ++count;
    }
  }
  if (count == 0) throw DataError("n-step error: no usable start frames");
  return {sum / static_cast<double>(count), count};
}

namespace {

// Teacher-forced pass over valid transitions; score(output, target) gives the
// per-frame loss.
template <class Score>
MeanResult teacher_forced(const Dataset& d, const Policy& p, std::size_t first_frame, std::optional<Sex> sex,
                          Score&& score) {
  if (!sex) sex = p.sex();
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t a = 0; a < d.n_agents(); ++a) {
    const Trajectory& t = d.trajectories[a];
    if (sex && *sex != t.sex) continue;
    PolicyState st;
    bool live = false;
    for (std::size_t f = first_frame; f + 1 < t.size(); ++f) {
      if (!t.valid[f] || !t.valid[f + 1]) {
        live = false;
        continue;
      }
      if (!live) {
        st = p.begin(history_from(d, a, f, p.window()));
        live = true;
      }
      StepResult r = p.step(st, sense_agent(d, a, f));
      const MotionDelta target = extract_motion(t.poses[f], t.poses[f + 1]);
      sum += score(r.output, target);
      ++count;
      st = std::move(r.state);
      p.record(st, target, t.poses[f + 1]);
    }
  }
  if (count == 0) throw DataError("likelihood: no valid transitions");
  return {sum / static_cast<double>(count), count};
}

}  // namespace

MeanResult nll(const Dataset& d, const Policy& p, std::size_t first_frame, std::optional<Sex> sex) {
  const BinCodec* codec = p.codec();
  return teacher_forced(d, p, first_frame, sex, [&](const PolicyOutput& out, const MotionDelta& target) {
    if (!out.is_categorical()) throw DataError("nll needs a categorical policy; use gaussian_nll");
    if (!codec) throw DataError("categorical policy without a codec");
    const auto bins = codec->encode(target);
    double s = 0.0;
    for (std::size_t f = 0; f < kMotionDim; ++f) s -= std::log(out.categorical().probs[f][bins[f]]);
    return s;
  });
}

MeanResult gaussian_nll(const Dataset& d, const Policy& p, std::size_t first_frame, std::optional<Sex> sex) {
  return teacher_forced(d, p, first_frame, sex, [&](const PolicyOutput& out, const MotionDelta& target) {
    if (out.is_categorical()) throw DataError("gaussian_nll needs a gaussian policy");
    const auto& g = out.gaussian();
    const auto x = target.to_array();
    double s = 0.0;
    for (std::size_t f = 0; f < kMotionDim; ++f) {
      const double sd = g.stddev[f];
      if (!(sd > 0.0)) throw DataError("gaussian_nll is undefined for a zero standard deviation");
      const double z = (x[f] - g.mean[f]) / sd;
      s += 0.5 * z * z + std::log(sd) + 0.5 * std::log(2.0 * std::numbers::pi);
    }
    return s;
  });
}

// ---- histograms ----

std::string to_string(BehaviorFeature f) {
  switch (f) {
    case BehaviorFeature::speed: return "speed";
    case BehaviorFeature::inter_distance: return "inter_distance";
    case BehaviorFeature::wall_distance: return "wall_distance";
    case BehaviorFeature::angular_motion: return "angular_motion";
    case BehaviorFeature::wing_angle: return "wing_angle";
  }
  return "?";
}

BehaviorFeature parse_behavior_feature(const std::string& s) {
  for (BehaviorFeature f : kBehaviorFeatures) {
    if (to_string(f) == s) return f;
  }
  throw DataError("unknown behavior feature '" + s + "'");
}

std::size_t HistogramSpec::bins() const {
  return static_cast<std::size_t>(std::ceil((hi - lo) / width - 1e-9));
}

void HistogramSpec::validate() const {
  if (!(width > 0.0) || !(hi > lo) || !std::isfinite(hi) || !std::isfinite(lo)) {
    throw DataError("histogram needs width > 0 and a finite range lo < hi");
  }
}

HistogramSpec default_histogram_spec(BehaviorFeature f) {
  switch (f) {
    case BehaviorFeature::speed: return {f, 0.05, 0.0, 50.0};
    case BehaviorFeature::inter_distance: return {f, 0.61, 0.0, 61.0};
    case BehaviorFeature::wall_distance: return {f, 0.61, 0.0, 30.5};
    case BehaviorFeature::angular_motion: return {f, 0.0175, 0.0, std::numbers::pi};
    case BehaviorFeature::wing_angle: return {f, 0.0175, 0.0, std::numbers::pi / 2.0};
  }
  throw DataError("unknown behavior feature");
}

Histogram feature_histogram(std::span<const BehaviorSample> stats, const HistogramSpec& spec,
                            std::optional<Sex> sex) {
  spec.validate();
  Histogram h;
  h.spec = spec;
  const std::size_t nb = spec.bins();
  std::vector<std::size_t> counts(nb, 0);
  for (const BehaviorSample& s : stats) {
    if (sex && s.sex != *sex) continue;
    double v = 0.0;
    switch (spec.feature) {
      case BehaviorFeature::speed: v = s.speed; break;
      case BehaviorFeature::inter_distance:
        if (!s.inter_distance) continue;
        v = *s.inter_distance;
        break;
      case BehaviorFeature::wall_distance: v = s.wall_distance; break;
      case BehaviorFeature::angular_motion: v = s.angular_motion; break;
      case BehaviorFeature::wing_angle: v = s.wing_angle; break;
    }
    const double pos = std::floor((v - spec.lo) / spec.width);
    const auto k = pos < 0.0 ? std::size_t{0} : std::min(nb - 1, static_cast<std::size_t>(pos));
    ++counts[k];
    ++h.count;
  }
  if (h.count == 0) throw DataError("histogram of '" + to_string(spec.feature) + "' has no samples");
  h.mass.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) h.mass[k] = static_cast<double>(counts[k]) / static_cast<double>(h.count);
  return h;
}

double hist_l1(const Histogram& a, const Histogram& b) {
  if (!(a.spec == b.spec) || a.mass.size() != b.mass.size()) {
    throw DataError("hist_l1: histograms use different binning");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < a.mass.size(); ++k) s += std::abs(a.mass[k] - b.mass[k]);
  return s;
}

// ---- chase ----

namespace {

class RuleChaseClassifier final : public ChaseClassifier {
 public:
  explicit RuleChaseClassifier(const ChaseParams& p) : p_(p) {
    if (p_.min_duration == 0) p_.min_duration = 1;
  }
  std::string name() const override { return "reference-rule"; }

  std::vector<std::vector<bool>> classify(const Dataset& d) const override {
    const std::size_t n = d.n_agents();
    std::vector<std::vector<bool>> out(n);
    for (std::size_t a = 0; a < n; ++a) {
      const Trajectory& t = d.trajectories[a];
      std::vector<bool> q(t.size(), false);
      for (std::size_t f = 0; f < t.size(); ++f) q[f] = qualifies(d, a, f);
      // keep only runs of at least min_duration frames
      out[a].assign(t.size(), false);
      std::size_t f = 0;
      while (f < t.size()) {
        if (!q[f]) {
          ++f;
          continue;
        }
        std::size_t e = f;
        while (e < t.size() && q[e]) ++e;
        if (e - f >= p_.min_duration) {
          for (std::size_t k = f; k < e; ++k) out[a][k] = true;
        }
        f = e;
      }
    }
    return out;
  }

 private:
  bool qualifies(const Dataset& d, std::size_t a, std::size_t f) const {
    const Trajectory& t = d.trajectories[a];
    if (!t.valid[f]) return false;
    const Pose& p = t.poses[f];
    double disp = 0.0;
    if (f > 0 && t.valid[f - 1]) {
      disp = std::hypot(p.x - t.poses[f - 1].x, p.y - t.poses[f - 1].y);
    } else if (f + 1 < t.size() && t.valid[f + 1]) {
      disp = std::hypot(t.poses[f + 1].x - p.x, t.poses[f + 1].y - p.y);
    }
    if (disp * t.fps < p_.min_speed) return false;
    for (std::size_t b = 0; b < d.n_agents(); ++b) {
      if (b == a || !d.trajectories[b].valid[f]) continue;
      const Pose& o = d.trajectories[b].poses[f];
      const double dx = o.x - p.x;
      const double dy = o.y - p.y;
      if (std::hypot(dx, dy) > p_.max_distance) continue;
      if (std::abs(wrap_angle(std::atan2(dy, dx) - p.theta)) <= p_.max_bearing) return true;
    }
    return false;
  }

  ChaseParams p_;
};

}  // namespace

std::unique_ptr<ChaseClassifier> reference_chase_classifier(const ChaseParams& params) {
  return std::make_unique<RuleChaseClassifier>(params);
}

ChaseFraction chase_fraction(const Dataset& d, const ChaseClassifier& c) {
  if (d.n_agents() < 2) throw DataError("chase fraction needs at least 2 agents");
  const auto flags = c.classify(d);
  if (flags.size() != d.n_agents()) throw DataError("chase classifier returned the wrong agent count");
  ChaseFraction r;
  for (std::size_t a = 0; a < d.n_agents(); ++a) {
    const Trajectory& t = d.trajectories[a];
    if (t.sex != Sex::male) continue;
    if (flags[a].size() != t.size()) throw DataError("chase classifier returned the wrong frame count");
    for (std::size_t f = 0; f < t.size(); ++f) {
      if (!t.valid[f]) continue;
      ++r.frames;
      if (flags[a][f]) ++r.chasing;
    }
  }
  if (r.frames == 0) throw DataError("chase fraction: no valid male agent-frames");
  r.fraction = static_cast<double>(r.chasing) / static_cast<double>(r.frames);
  return r;
}

double chase_divergence(double p, double q) {
  if (!(p >= 0.0 && p <= 1.0 && q >= 0.0 && q <= 1.0)) throw DataError("chase fractions must lie in [0, 1]");
  auto term = [](double a, double b) {
    if (a == 0.0) return 0.0;
    if (b == 0.0) return std::numeric_limits<double>::infinity();
    return a * std::log(a / b);
  };
  return term(p, q) + term(1.0 - p, 1.0 - q);
}

namespace {

ChaseError make_error(double p, double p_hat, double smoothed_hat) {
  ChaseError e;
  e.value = chase_divergence(p, p_hat);
  e.infinite = std::isinf(e.value);
  e.smoothed = (p_hat == 0.0 || p_hat == 1.0) ? chase_divergence(p, smoothed_hat) : e.value;
  return e;
}

}  // namespace

ChaseError chase_error(double p, const ChaseFraction& est) {
  const double smoothed = (static_cast<double>(est.chasing) + 1.0) / (static_cast<double>(est.frames) + 2.0);
  return make_error(p, est.fraction, smoothed);
}

ChaseError chase_error(double p, double p_hat) {
  // without counts, smooth as if from a single frame
  return make_error(p, p_hat, (p_hat + 1.0) / 3.0);
}

}  // namespace flyeval
