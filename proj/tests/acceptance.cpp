// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors
//
// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and runtime
// budgets are fixed here and must not be relaxed to make a run green.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "flyeval/metrics.hpp"
#include "flyeval/nets.hpp"
#include "flyeval/policy.hpp"
#include "flyeval/rvf.hpp"
#include "flyeval/sense.hpp"
#include "flyeval/sim.hpp"
#include "flyeval/study.hpp"
#include "flyeval/synth.hpp"

// after Eigen: resolv.h defines a _res macro
#include "httplib.h"
#include "json.hpp"

using namespace flyeval;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 6) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

// ---- 1. chase error regression ----
Outcome chase_regression() {
  constexpr double kTol = 5e-4;
  const double a = chase_error(0.23, 0.165).value;
  const double b = chase_error(0.23, 0.15).value;
  const bool pass = std::abs(a - 0.014) <= kTol && std::abs(b - 0.0222) <= kTol;
  return {pass, "chase(0.23,0.165)=" + fmt(a) + " chase(0.23,0.15)=" + fmt(b) + " tol 5e-4"};
}

// ---- 2. sensory nonlinearities ----
Outcome nonlinearities() {
  constexpr double kTol = 1e-9;
  const double one = 3.885505 + 1.0 / 0.26;  // ~7.7316
  const double v[] = {f_vision(1.0), f_vision(101.0), f_vision(401.0), f_chamber(3.885505), f_chamber(one)};
  const double want[] = {1.0, 0.5, 0.0, 0.0, 1.0};
  double worst = 0.0;
  for (int i = 0; i < 5; ++i) worst = std::max(worst, std::abs(v[i] - want[i]));
  return {worst <= kTol, "max |dev| " + fmt(worst) + " at d_chamber(1)=" + fmt(one, 8) + " tol 1e-9"};
}

// ---- 3. replay fidelity ----
Outcome replay_fidelity() {
  constexpr double kTol = 1e-6;
  RandomWalkParams p;
  p.agents = 20;
  p.frames = 1201;
  p.drift = 0.3;
  p.step_sigma = 0.2;
  p.turn_sigma = 0.2;
  const Dataset d = synth_random_walk(p, 3);
  SimConfig sc;
  sc.mode = SimMode::replay;
  sc.start = 0;
  sc.horizon = d.n_frames() - 1;
  const Dataset r = rollout(d, sc);
  double worst = 0.0;
  for (std::size_t a = 0; a < d.n_agents(); ++a) {
    for (std::size_t f = 0; f < d.n_frames(); ++f) {
      const Pose& x = d.trajectories[a].poses[f];
      const Pose& y = r.trajectories[a].poses[f];
      worst = std::max({worst, std::hypot(x.x - y.x, x.y - y.y), std::abs(wrap_angle(x.theta - y.theta))});
    }
  }
  return {worst <= kTol, "20 agents x " + std::to_string(sc.horizon) + " frames, max dev " + fmt(worst) +
                             " mm tol 1e-6"};
}

// ---- 4. n-step m-sample properties ----
Outcome nstep_properties() {
  RandomWalkParams p;
  p.agents = 6;
  p.frames = 600;
  p.drift = 0.3;
  p.step_sigma = 0.2;
  const Dataset d = synth_random_walk(p, 11);
  TrainingConfig tc;
  tc.window = 4;
  const std::vector<Dataset> train{d};
  const auto lin = train_linear(train, tc);

  // min over a growing prefix of samples never increases
  bool monotone = true;
  std::size_t starts = 0;
  SimConfig sc;
  sc.mode = SimMode::loo;
  sc.horizon = 10;
  sc.male_policy = sc.female_policy = lin;
  for (std::size_t a = 0; a < d.n_agents(); ++a) {
    for (std::size_t t0 = 20; t0 + sc.horizon < d.n_frames(); t0 += 97) {
      sc.loo_agent = a;
      sc.start = t0;
      sc.seed = derive_seed(a, t0);
      const auto samples = rollout_samples(d, sc, 10);
      double prev = std::numeric_limits<double>::infinity();
      for (std::size_t m = 1; m <= 10; ++m) {
        const double e = nstep_sample_error(d.trajectories[a], std::span(samples).first(m), t0, sc.horizon);
        if (e > prev) monotone = false;
        prev = e;
      }
      ++starts;
    }
  }

  // m = 1 against a hand-computed Euclidean distance
  double worst_m1 = 0.0;
  for (std::size_t a = 0; a < d.n_agents(); ++a) {
    sc.loo_agent = a;
    sc.start = 50;
    sc.seed = 99 + a;
    const auto one = rollout_samples(d, sc, 1);
    const Pose& truth = d.trajectories[a].poses[sc.start + sc.horizon];
    const Pose& pred = one[0].poses[sc.horizon];
    const double plain = std::sqrt((pred.x - truth.x) * (pred.x - truth.x) + (pred.y - truth.y) * (pred.y - truth.y));
    worst_m1 = std::max(worst_m1, std::abs(plain - nstep_sample_error(d.trajectories[a], one, sc.start, sc.horizon)));
  }

  // HALT one-step error is the mean per-frame displacement
  NStepConfig nc;
  nc.n = 1;
  nc.m = 1;
  nc.stride = 1;
  nc.first_frame = 1;
  auto halt = make_baseline(BaselineKind::halt);
  const MeanResult h = nstep_error(d, halt, halt, nc);
  double sum = 0.0;
  std::size_t cnt = 0;
  for (const Trajectory& t : d.trajectories) {
    for (std::size_t f = 1; f + 1 < t.size(); ++f) {
      if (!t.valid[f] || !t.valid[f + 1]) continue;
      sum += std::hypot(t.poses[f + 1].x - t.poses[f].x, t.poses[f + 1].y - t.poses[f].y);
      ++cnt;
    }
  }
  const double halt_dev = std::abs(h.mean - sum / static_cast<double>(cnt));
  const bool pass = monotone && worst_m1 <= 1e-12 && halt_dev <= 1e-9 && h.count == cnt;
  return {pass, "monotone over " + std::to_string(starts) + " starts: " + (monotone ? "yes" : "no") +
                    "; m=1 dev " + fmt(worst_m1) + " (tol 1e-12); HALT dev " + fmt(halt_dev) + " (tol 1e-9)"};
}

// ---- 5. discriminator null and separable fixtures ----
Outcome discriminator_fixtures() {
  RandomWalkParams p;
  p.agents = 20;
  p.frames = 7501;
  p.arena_radius = 20.0;
  p.drift = 0.3;
  p.step_sigma = 0.2;
  p.turn_sigma = 0.2;
  const Dataset real = synth_random_walk(p, 101);
  const Dataset same = synth_random_walk(p, 202);

  DiscConfig dc;  // 100 epochs, lr 0.01, L2 1e-4, batch 100
  dc.variant = DiscVariant::engineered;
  dc.seed = 5;
  WindowSetConfig wc;
  wc.variant = dc.variant;
  wc.seed = 6;
  const WindowSet null_set = build_window_set(real, same, wc);
  const auto null_disc = train_discriminator(null_set, dc).disc;
  const Accuracy null_acc = eval_discriminator(*null_disc, null_set.test);

  // frozen agents: the HALT model run from frame 0
  SimConfig sc;
  sc.mode = SimMode::smsf;
  sc.horizon = real.n_frames() - 1;
  auto halt = make_baseline(BaselineKind::halt);
  sc.male_policy = sc.female_policy = halt;
  const Dataset frozen = rollout(real, sc);
  const WindowSet sep_set = build_window_set(real, frozen, wc);
  const auto sep_disc = train_discriminator(sep_set, dc).disc;
  const Accuracy sep_acc = eval_discriminator(*sep_disc, sep_set.test);

  // raw-input network on a capped frozen-vs-moving set
  DiscConfig rc = dc;
  rc.variant = DiscVariant::raw;
  WindowSetConfig rw = wc;
  rw.variant = DiscVariant::raw;
  rw.max_per_class = 100;
  const WindowSet raw_set = build_window_set(real, frozen, rw);
  const auto raw_disc = train_discriminator(raw_set, rc).disc;
  const Accuracy raw_acc = eval_discriminator(*raw_disc, raw_set.test);

  const bool pass = null_acc.n >= 1000 && std::abs(null_acc.overall - 0.5) <= 0.05 && sep_acc.overall >= 0.9 &&
                    raw_acc.overall >= 0.9;
  return {pass, "null acc " + fmt(null_acc.overall, 4) + " (n " + std::to_string(null_acc.n) +
                    ", want 0.5 +- 0.05); frozen-vs-moving engineered " + fmt(sep_acc.overall, 4) + ", raw " +
                    fmt(raw_acc.overall, 4) + " (want >= 0.9)"};
}

// ---- 6. gradient checks ----
template <class Net, class Example>
double worst_gradient_error(const Net& net, const Example& ex, Rng& rng) {
  nn::Vec params = net.init_params(rng);
  for (Eigen::Index i = 0; i < params.size(); ++i) params[i] += 0.1 * rng.normal();
  nn::Vec grad = nn::Vec::Zero(params.size());
  net.loss(params, ex, &grad);
  // h = 1e-6 keeps the stencil clear of ReLU kinks that a 1e-5 step straddles
  const nn::Vec num =
      nn::numeric_gradient([&](const nn::Vec& x) { return net.loss(x, ex, nullptr); }, params, 1e-6);
  return nn::relative_error(grad, num);
}

nn::PolicyWindow random_window(std::size_t steps, Rng& rng) {
  nn::PolicyWindow w;
  w.motion = nn::Mat(steps, kMotionDim);
  w.sense = nn::Mat(steps, kSensoryDim);
  for (Eigen::Index i = 0; i < w.motion.size(); ++i) w.motion.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < w.sense.size(); ++i) w.sense.data()[i] = rng.uniform();
  w.targets.resize(steps);
  for (auto& t : w.targets) {
    for (auto& b : t) b = static_cast<std::uint8_t>(rng.index(kBins));
  }
  return w;
}

nn::DiscExample random_disc_example(std::size_t rows, std::size_t cols, Rng& rng) {
  nn::DiscExample ex;
  ex.input = nn::Mat(rows, cols);
  for (Eigen::Index i = 0; i < ex.input.size(); ++i) ex.input.data()[i] = rng.normal();
  ex.label = static_cast<int>(rng.index(2));
  return ex;
}

Outcome gradient_checks() {
  constexpr double kTol = 1e-4;
  constexpr int kInstances = 100;
  Rng rng(2024);
  double worst[4] = {0, 0, 0, 0};
  for (int i = 0; i < kInstances; ++i) {
    const std::size_t width = 2 + rng.index(3);
    const std::size_t steps = 2 + rng.index(4);
    worst[0] = std::max(worst[0], worst_gradient_error(nn::ConvPolicyNet(width), random_window(steps, rng), rng));
    worst[1] = std::max(worst[1], worst_gradient_error(nn::GruPolicyNet(width), random_window(steps, rng), rng));
    const nn::DiscLoss loss = i % 2 ? nn::DiscLoss::cross_entropy : nn::DiscLoss::least_squares;
    const std::size_t ch = 2 + rng.index(3);
    nn::ConvDiscNet conv(ch, 2, 3, 2 + rng.index(3));
    conv.set_loss_kind(loss);
    worst[2] = std::max(worst[2], worst_gradient_error(conv, random_disc_example(4 + rng.index(6), ch, rng), rng));
    const std::size_t feats = 2 + rng.index(6);
    nn::MlpDiscNet mlp(feats, 2 + rng.index(4));
    mlp.set_loss_kind(loss);
    worst[3] = std::max(worst[3], worst_gradient_error(mlp, random_disc_example(1, feats, rng), rng));
  }
  const bool pass = *std::max_element(std::begin(worst), std::end(worst)) <= kTol;
  return {pass, std::to_string(kInstances) + " instances each; worst rel err conv-policy " + fmt(worst[0], 3) +
                    ", gru-policy " + fmt(worst[1], 3) + ", conv-disc " + fmt(worst[2], 3) + ", mlp-disc " +
                    fmt(worst[3], 3) + " (tol 1e-4)"};
}

// ---- 7. histogram distances ----
RandomWalkParams walker(double drift) {
  RandomWalkParams p;
  p.agents = 10;
  p.frames = 10001;  // 10 agents x 10^4 transitions = 10^5 samples per histogram
  p.arena_radius = 6.0;
  p.drift = drift;
  p.step_sigma = 0.02;
  p.turn_sigma = 0.3;
  return p;
}

Outcome histogram_oracle() {
  constexpr double kSameMax = 0.05;
  constexpr double kDistinctMin = 0.3;
  const auto a = behavior_stats(synth_random_walk(walker(0.5), 7));
  const auto b = behavior_stats(synth_random_walk(walker(0.5), 8));
  const auto slow = behavior_stats(synth_random_walk(walker(0.1), 9));
  std::string detail;
  bool pass = true;
  std::size_t n = 0;
  for (BehaviorFeature f : kBehaviorFeatures) {
    const HistogramSpec spec = default_histogram_spec(f);
    const Histogram ha = feature_histogram(a, spec), hb = feature_histogram(b, spec);
    const double d = hist_l1(ha, hb);
    n = std::min(ha.count, hb.count);
    pass = pass && d <= kSameMax && n >= 100000;
    detail += to_string(f) + " " + fmt(d, 3) + ", ";
  }
  const HistogramSpec sp = default_histogram_spec(BehaviorFeature::speed);
  const double fast_slow = hist_l1(feature_histogram(a, sp), feature_histogram(slow, sp));
  pass = pass && fast_slow >= kDistinctMin;
  return {pass, "same process (N " + std::to_string(n) + "): " + detail + "want <= 0.05; fast vs slow speed " +
                    fmt(fast_slow, 3) + " want >= 0.3"};
}

// ---- 8. training sanity ----
Outcome training_sanity() {
  RandomWalkParams rp;
  rp.agents = 2;
  rp.frames = 400;
  rp.drift = 0.3;
  rp.step_sigma = 0.2;
  const Dataset d = synth_random_walk(rp, 21);
  const BinCodec codec = fit_bins(d);

  // overfit: a fixed set of 10 windows drawn once
  TrainingConfig tc;
  tc.window = 4;
  tc.width = 32;
  const auto ends = window_ends(d.trajectories[0], tc.window);
  std::vector<nn::PolicyWindow> fixture;
  for (std::size_t k = 0; k < 10; ++k) {
    fixture.push_back(make_window(d, 0, ends[k * 31], tc.window, codec, nn::MotionNorm::identity(), false));
  }
  nn::ConvPolicyNet net(tc.width);
  Rng init(4);
  nn::Vec params = net.init_params(init);
  std::vector<const nn::PolicyWindow*> all;
  for (const auto& w : fixture) all.push_back(&w);
  sgd_train(net, params, [&](std::vector<const nn::PolicyWindow*>& batch) { batch = all; }, 3000, 0.05, 0.0);
  double fit = 0.0;
  for (const auto& w : fixture) fit += net.loss(params, w, nullptr);
  fit /= static_cast<double>(fixture.size());

  // untrained: freshly initialized parameters
  Rng fresh(8);
  const CategoricalPolicy untrained(Arch::conv, tc.width, tc.window, codec, nn::MotionNorm::fit(motion_samples(d)),
                                    net.init_params(fresh), std::nullopt);
  const double nll0 = nll(d, untrained, untrained.window()).mean;
  const double want = 8.0 * std::log(51.0);

  // linear recovery of the forward-speed generator
  LinearDynamicsParams lp;
  const Dataset ld = synth_linear_dynamics(lp, 33);
  TrainingConfig lc;
  lc.window = lp.window;
  const std::vector<Dataset> lt{ld};
  const auto lin = train_linear(lt, lc);
  const nn::Mat truth = lp.true_weights();
  const double werr = (lin->weights().row(0) - truth.row(0)).cwiseAbs().maxCoeff();

  const bool pass = fit <= 0.1 && std::abs(nll0 - want) <= 0.01 * want && werr <= 1e-4;
  return {pass, "overfit CE " + fmt(fit, 4) + " (want <= 0.1); untrained NLL " + fmt(nll0, 6) + " vs 8 ln 51 = " +
                    fmt(want, 6) + " (1%); linear max weight err " + fmt(werr, 3) + " (want <= 1e-4)"};
}

// ---- 9. study service ----
Outcome study_contract() {
  RandomWalkParams rp;
  rp.agents = 20;
  rp.frames = 1200;
  rp.drift = 0.3;
  rp.step_sigma = 0.2;
  const Dataset d = synth_random_walk(rp, 77);
  auto halt = make_baseline(BaselineKind::halt);
  auto cnst = make_baseline(BaselineKind::constant);
  TrainingConfig tc;
  tc.window = 3;
  const std::vector<Dataset> train{d};
  std::shared_ptr<const Policy> lin = train_linear(train, tc);
  const std::vector<ModelSpec> models{{"halt", halt, halt}, {"const", cnst, cnst}, {"linear", lin, lin},
                                      {"linear-halt", lin, halt}};
  PoolConfig pc;
  pc.seed = 13;
  const ClipPool pool = generate_clip_pool(d, models, pc);

  std::map<std::string, std::size_t> counts;
  for (const Clip& c : pool.clips) counts[c.real ? "real" : c.model]++;
  bool counts_ok = pool.clips.size() == 160 && counts["real"] == 80;
  for (const auto& m : models) counts_ok = counts_ok && counts[m.name] == 20;

  const std::vector<std::string> raters{"r1", "r2", "r3"};
  StudyStore store(pool, raters);
  StudyServer server(store);
  const int port = server.bind("127.0.0.1", 0);
  std::thread th([&] { server.serve(); });
  httplib::Client cli("127.0.0.1", port);

  std::map<std::string, const Clip*> by_id;
  for (const Clip& c : pool.clips) by_id[c.id] = &c;

  // raters r1 and r2 label everything by a fixed script, r3 labels a third
  bool blind_ok = true, repeat_ok = true, idem_ok = true;
  std::set<std::string> key_schema;
  Rng script(5);
  std::size_t submitted = 0;
  for (const std::string& r : raters) {
    std::set<std::string> seen;
    const std::size_t quota = r == "r3" ? 53 : pool.clips.size();
    for (std::size_t k = 0; k < quota; ++k) {
      auto res = cli.Get("/api/clips/next?rater=" + r);
      if (!res || res->status != 200) {
        repeat_ok = false;
        break;
      }
      const json payload = json::parse(res->body);
      std::set<std::string> keys;
      for (auto it = payload.begin(); it != payload.end(); ++it) keys.insert(it.key() + ":" + it->type_name());
      std::string ks;
      for (const auto& x : keys) ks += x + ";";
      key_schema.insert(ks);
      const std::string id = payload.at("id");
      if (!seen.insert(id).second) repeat_ok = false;
      const std::string judgment = script.uniform() < 0.5 ? "real" : "fake";
      const json label{{"clip_id", id}, {"rater_id", r}, {"judgment", judgment}, {"latency_ms", 1000.0}};
      auto post = cli.Post("/api/labels", label.dump(), "application/json");
      if (!post || post->status != 201) idem_ok = false;
      ++submitted;
      // a resubmission with the opposite judgment must be rejected unchanged
      if (k % 10 == 0) {
        json flipped = label;
        flipped["judgment"] = judgment == "real" ? "fake" : "real";
        auto dup = cli.Post("/api/labels", flipped.dump(), "application/json");
        if (!dup || dup->status != 409) idem_ok = false;
      }
    }
    if (r != "r3") {
      auto done = cli.Get("/api/clips/next?rater=" + r);
      if (!done || done->status != 204) repeat_ok = false;
    }
  }
  // every payload has one schema, and no key names the ground truth
  blind_ok = key_schema.size() == 1;
  for (const std::string& banned : {"real", "model", "label", "source", "provenance", "generator"}) {
    if (key_schema.begin()->find(banned + ":") != std::string::npos) blind_ok = false;
  }

  auto res = cli.Get("/api/results");
  server.stop();
  th.join();
  if (!res || res->status != 200) return {false, "results endpoint failed"};
  const json results = json::parse(res->body);

  // brute-force recount from the stored labels
  std::map<std::string, std::pair<std::size_t, std::size_t>> by_model, per_rater;
  std::size_t n = 0, correct = 0;
  const auto labels = store.labels();
  for (const LabelRecord& l : labels) {
    const Clip& c = *by_id.at(l.clip_id);
    const bool ok = (l.judgment == Judgment::real) == c.real;
    auto& bm = by_model[c.real ? "real" : c.model];
    bm.first++;
    bm.second += ok;
    auto& br = per_rater[l.rater_id];
    br.first++;
    br.second += ok;
    ++n;
    correct += ok;
  }
  bool recount_ok = n == submitted && results.at("n_labels") == n && results.at("overall").at("n") == n &&
                    results.at("overall").at("correct") == correct;
  for (const auto& [m, t] : by_model) {
    recount_ok = recount_ok && results.at("by_model").at(m).at("n") == t.first &&
                 results.at("by_model").at(m).at("correct") == t.second;
  }
  for (const auto& [r, t] : per_rater) {
    recount_ok = recount_ok && results.at("raters").at(r).at("overall").at("n") == t.first &&
                 results.at("raters").at(r).at("overall").at("correct") == t.second;
  }
  const bool pass = counts_ok && blind_ok && repeat_ok && idem_ok && recount_ok;
  return {pass, std::string("counts ") + (counts_ok ? "ok" : "BAD") + " (" + std::to_string(pool.clips.size()) +
                    " clips); no-repeat " + (repeat_ok ? "ok" : "BAD") + "; idempotency " + (idem_ok ? "ok" : "BAD") +
                    "; recount " + (recount_ok ? "ok" : "BAD") + " over " + std::to_string(n) + " labels; blinding " +
                    (blind_ok ? "ok" : "BAD")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "chase error regression", 1.0, chase_regression},
      {2, "sensory nonlinearities", 1.0, nonlinearities},
      {3, "replay fidelity", 10.0, replay_fidelity},
      {4, "n-step m-sample properties", 60.0, nstep_properties},
      {5, "discriminator null/separable", 300.0, discriminator_fixtures},
      {6, "gradient checks", 120.0, gradient_checks},
      {7, "distribution-metric oracle", 120.0, histogram_oracle},
      {8, "training sanity", 300.0, training_sanity},
      {9, "study service contract", 60.0, study_contract},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = secs <= c.budget_s;
    const bool pass = o.pass && in_budget;
    failures += !pass;
    std::printf("[%s] criterion %d %s: %s; %.2fs (budget %.0fs)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.budget_s);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
