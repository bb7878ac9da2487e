// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#include "flyeval/policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "flyeval/errors.hpp"
#include "flyeval/textio.hpp"

namespace flyeval {

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0)) throw DataError("learning rate must be > 0");
  if (l2 < 0.0) throw DataError("L2 coefficient must be >= 0");
  if (batch_size == 0 || window == 0 || iterations == 0 || width == 0) {
    throw DataError("batch size, window, iterations and width must be positive");
  }
}

void validate_output(const PolicyOutput& out) {
  if (out.is_categorical()) {
    for (std::size_t f = 0; f < kMotionDim; ++f) {
      double sum = 0.0;
      for (double p : out.categorical().probs[f]) {
        if (!(p >= 0.0)) throw DataError("categorical entry is negative or NaN");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-6) throw DataError("categorical row does not sum to 1");
    }
  } else {
    for (std::size_t f = 0; f < kMotionDim; ++f) {
      const double s = out.gaussian().stddev[f];
      if (!std::isfinite(s) || s < 0.0) throw DataError("gaussian stddev must be finite and >= 0");
      if (!std::isfinite(out.gaussian().mean[f])) throw DataError("gaussian mean is not finite");
    }
  }
}

PolicyHistory history_from(const Dataset& d, std::size_t agent, std::size_t frame,
                           std::size_t window) {
  const Trajectory& t = d.trajectories.at(agent);
  if (frame >= t.size()) throw DataError("history frame out of range");
  if (!t.valid[frame]) {
    throw DataError("agent " + std::to_string(t.agent_id) + " is masked at start frame " +
                    std::to_string(frame));
  }
  PolicyHistory h;
  h.pose = t.poses[frame];
  h.frame = frame;
  const std::size_t len = std::min(window, frame);
  for (std::size_t k = frame + 1 - len; k <= frame && len > 0; ++k) {
    if (t.valid[k] && t.valid[k - 1]) {
      h.motions.push_back(extract_motion(t.poses[k - 1], t.poses[k]));
    } else if (t.valid[k]) {
      h.motions.push_back(hold_motion(t.poses[k]));
    } else {
      h.motions.push_back(h.motions.empty() ? hold_motion(h.pose) : hold_motion(apply_motion(
                                                                        t.poses[frame], h.motions.back())));
    }
    if (k < frame) h.senses.push_back(t.valid[k] ? sense_agent(d, agent, k) : SensoryFrame{});
  }
  return h;
}

PolicyState Policy::begin(const PolicyHistory& history) const {
  PolicyState st;
  const std::size_t w = std::max<std::size_t>(1, window());
  const std::size_t nm = std::min(w, history.motions.size());
  st.motions.assign(history.motions.end() - static_cast<std::ptrdiff_t>(nm), history.motions.end());
  if (st.motions.empty()) st.motions.push_back(hold_motion(history.pose));
  const std::size_t ns = std::min(st.motions.size() - 1, history.senses.size());
  st.senses.assign(history.senses.end() - static_cast<std::ptrdiff_t>(ns), history.senses.end());
  // keep senses aligned with the oldest motions when history was short of them
  while (st.senses.size() + 1 < st.motions.size()) st.senses.push_front(SensoryFrame{});
  st.pose = history.pose;
  st.frame = history.frame;
  st.initialized = true;
  warm_up(st);
  return st;
}

StepResult Policy::step(const PolicyState& state, const SensoryFrame& s) const {
  if (!state.initialized) throw DataError("policy state is not initialized");
  StepResult r{PolicyOutput{}, state};
  r.state.senses.push_back(s);
  r.output = predict(r.state, s);
  return r;
}

void Policy::record(PolicyState& state, const MotionDelta& m, const Pose& pose) const {
  const std::size_t w = std::max<std::size_t>(1, window());
  state.motions.push_back(m);
  while (state.motions.size() > w) state.motions.pop_front();
  while (state.senses.size() + 1 > state.motions.size()) state.senses.pop_front();
  state.pose = pose;
  ++state.frame;
}

StepResult policy_step(const Policy& p, const PolicyState& state, const SensoryFrame& s) {
  return p.step(state, s);
}

MotionDelta sample_motion(const PolicyOutput& out, const BinCodec* codec, Rng& rng) {
  if (out.is_categorical()) {
    if (!codec) throw DataError("categorical output needs a bin codec to sample");
    return sample_categorical(out.categorical().probs, *codec, rng);
  }
  const auto& g = out.gaussian();
  std::array<double, kMotionDim> v{};
  for (std::size_t f = 0; f < kMotionDim; ++f) {
    v[f] = g.stddev[f] > 0.0 ? g.mean[f] + g.stddev[f] * rng.normal() : g.mean[f];
  }
  MotionDelta m = MotionDelta::from_array(v);
  m.dtheta = wrap_angle(m.dtheta);
  m.major = std::max(m.major, 1e-3);
  m.wing_len_l = std::max(m.wing_len_l, 0.0);
  m.wing_len_r = std::max(m.wing_len_r, 0.0);
  return m;
}

namespace {

GaussianOutput deterministic(const MotionDelta& m) {
  GaussianOutput g;
  g.mean = m.to_array();
  g.stddev.fill(0.0);
  return g;
}

class HaltPolicy final : public Policy {
 public:
  std::string kind() const override { return "halt"; }

 protected:
  PolicyOutput predict(PolicyState& next, const SensoryFrame&) const override {
    return PolicyOutput{deterministic(hold_motion(next.pose))};
  }
};

class ConstPolicy final : public Policy {
 public:
  std::string kind() const override { return "const"; }

 protected:
  PolicyOutput predict(PolicyState& next, const SensoryFrame&) const override {
    MotionDelta m = hold_motion(next.pose);
    const MotionDelta& last = next.motions.back();
    m.fwd = last.fwd;
    m.side = last.side;
    m.dtheta = last.dtheta;
    return PolicyOutput{deterministic(m)};
  }
};

// Window of exactly `w` motions, padded at the front with zero-delta copies of
// the oldest available motion.
std::vector<MotionDelta> padded_window(const std::deque<MotionDelta>& motions, std::size_t w) {
  std::vector<MotionDelta> out;
  out.reserve(w);
  MotionDelta pad = motions.front();
  pad.fwd = pad.side = pad.dtheta = 0.0;
  for (std::size_t i = motions.size(); i < w; ++i) out.push_back(pad);
  const std::size_t skip = motions.size() > w ? motions.size() - w : 0;
  out.insert(out.end(), motions.begin() + static_cast<std::ptrdiff_t>(skip), motions.end());
  return out;
}

nn::Vec linear_input(std::span<const MotionDelta> window, const SensoryFrame& s) {
  nn::Vec x(static_cast<Eigen::Index>(LinearPolicy::input_dim(window.size())));
  Eigen::Index i = 0;
  for (const auto& m : window) {
    for (double v : m.to_array()) x[i++] = v;
  }
  for (std::size_t k = 0; k < kSensoryDim; ++k) x[i++] = s[k];
  x[i] = 1.0;
  return x;
}

}  // namespace

std::shared_ptr<const Policy> make_baseline(BaselineKind kind) {
  if (kind == BaselineKind::halt) return std::make_shared<HaltPolicy>();
  return std::make_shared<ConstPolicy>();
}

ReplayPolicy::ReplayPolicy(std::shared_ptr<const Trajectory> traj) : traj_(std::move(traj)) {
  if (!traj_) throw DataError("replay policy needs a trajectory");
}

PolicyOutput ReplayPolicy::predict(PolicyState& next, const SensoryFrame&) const {
  const Trajectory& t = *traj_;
  const std::size_t f = next.frame;
  if (f + 1 >= t.size()) {
    throw DataError("replay of agent " + std::to_string(t.agent_id) + " overran the recording at frame " +
                    std::to_string(f + 1));
  }
  if (!t.valid[f + 1]) {
    PolicyOutput out{deterministic(hold_motion(next.pose))};
    out.held = true;
    return out;
  }
  // relative to the live pose, so replay re-synchronizes after a dropout
  return PolicyOutput{deterministic(extract_motion(next.pose, t.poses[f + 1]))};
}

std::shared_ptr<const Policy> make_replay(const Trajectory& traj) {
  return std::make_shared<ReplayPolicy>(std::make_shared<const Trajectory>(traj));
}

LinearPolicy::LinearPolicy(std::size_t window, nn::Mat weights, std::array<double, kMotionDim> sigma,
                           std::optional<Sex> sex)
    : window_(window), weights_(std::move(weights)), sigma_(sigma), sex_(sex) {
  if (weights_.rows() != static_cast<Eigen::Index>(kMotionDim) ||
      weights_.cols() != static_cast<Eigen::Index>(input_dim(window_))) {
    throw DataError("linear policy weights have the wrong shape");
  }
}

PolicyOutput LinearPolicy::predict(PolicyState& next, const SensoryFrame& s) const {
  const auto window = padded_window(next.motions, window_);
  const nn::Vec y = weights_ * linear_input(window, s);
  GaussianOutput g;
  for (std::size_t f = 0; f < kMotionDim; ++f) g.mean[f] = y[static_cast<Eigen::Index>(f)];
  g.stddev = sigma_;
  return PolicyOutput{g};
}

LinearFit fit_least_squares(const nn::Mat& X, const nn::Mat& Y, double l2) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const Eigen::Index k = Y.cols();
  if (n == 0) throw DataError("least squares needs at least one sample");
  const nn::Vec mu = X.colwise().mean().transpose();
  const nn::Vec ymu = Y.colwise().mean().transpose();
  std::vector<Eigen::Index> keep;
  nn::Vec sd(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    sd[j] = std::sqrt((X.col(j).array() - mu[j]).square().mean());
    if (sd[j] > 1e-12 * std::max(1.0, std::abs(mu[j]))) keep.push_back(j);
  }
  const auto dk = static_cast<Eigen::Index>(keep.size());
  nn::Mat Xs(n, dk);
  for (Eigen::Index c = 0; c < dk; ++c) {
    const Eigen::Index j = keep[static_cast<std::size_t>(c)];
    Xs.col(c) = (X.col(j).array() - mu[j]) / sd[j];
  }
  const nn::Mat Yc = Y.rowwise() - ymu.transpose();

  LinearFit fit;
  nn::Mat Ws = nn::Mat::Zero(dk, k);
  if (dk > 0) {
    nn::Mat A = (Xs.transpose() * Xs) / static_cast<double>(n);
    const nn::Mat B = (Xs.transpose() * Yc) / static_cast<double>(n);
    Eigen::LDLT<nn::Mat> ldlt(A);
    const bool ok = n > dk && ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-10;
    if (ok) {
      Ws = ldlt.solve(B);
    } else {
      fit.used_ridge = true;
      A.diagonal().array() += std::max(l2, 1e-10);
      Ws = A.ldlt().solve(B);
    }
  }
  fit.weights = nn::Mat::Zero(k, d + 1);
  for (Eigen::Index c = 0; c < dk; ++c) {
    const Eigen::Index j = keep[static_cast<std::size_t>(c)];
    fit.weights.col(j) = Ws.row(c).transpose() / sd[j];
  }
  fit.weights.col(d) = ymu - fit.weights.leftCols(d) * mu;
  const nn::Mat resid = Y - ((X * fit.weights.leftCols(d).transpose()).rowwise() + fit.weights.col(d).transpose());
  fit.residual_std.resize(static_cast<std::size_t>(k));
  for (Eigen::Index c = 0; c < k; ++c) {
    fit.residual_std[static_cast<std::size_t>(c)] = std::sqrt(resid.col(c).array().square().mean());
  }
  return fit;
}

std::vector<std::size_t> window_ends(const Trajectory& t, std::size_t steps) {
  std::vector<std::size_t> out;
  if (t.size() < steps + 2) return out;
  // run = number of consecutive valid frames ending at f
  std::size_t run = 0;
  std::vector<std::size_t> run_at(t.size(), 0);
  for (std::size_t f = 0; f < t.size(); ++f) {
    run = t.valid[f] ? run + 1 : 0;
    run_at[f] = run;
  }
  for (std::size_t last = steps; last + 1 < t.size(); ++last) {
    if (run_at[last + 1] >= steps + 2) out.push_back(last);
  }
  return out;
}

std::shared_ptr<const LinearPolicy> train_linear(std::span<const Dataset> train,
                                                 const TrainingConfig& cfg,
                                                 std::optional<Sex> sex) {
  cfg.validate();
  const std::size_t w = cfg.window;
  const auto dim = static_cast<Eigen::Index>(LinearPolicy::input_dim(w) - 1);
  struct Ref {
    std::size_t video, agent, last;
  };
  std::vector<Ref> refs;
  for (std::size_t v = 0; v < train.size(); ++v) {
    for (std::size_t a = 0; a < train[v].n_agents(); ++a) {
      const Trajectory& t = train[v].trajectories[a];
      if (sex && t.sex != *sex) continue;
      // a window ending at `last` needs frames last-w .. last+1; windows_ends(w) covers exactly that
      for (std::size_t last : window_ends(t, w)) refs.push_back({v, a, last});
    }
  }
  if (refs.empty()) throw DataError("train_linear: no usable training windows");

  nn::Mat X(static_cast<Eigen::Index>(refs.size()), dim);
  nn::Mat Y(static_cast<Eigen::Index>(refs.size()), static_cast<Eigen::Index>(kMotionDim));
  for (std::size_t r = 0; r < refs.size(); ++r) {
    const auto& [v, a, last] = refs[r];
    const Trajectory& t = train[v].trajectories[a];
    std::vector<MotionDelta> window;
    window.reserve(w);
    for (std::size_t f = last + 1 - w; f <= last; ++f) window.push_back(extract_motion(t.poses[f - 1], t.poses[f]));
    const nn::Vec x = linear_input(window, sense_agent(train[v], a, last));
    const auto row = static_cast<Eigen::Index>(r);
    X.row(row) = x.head(dim).transpose();
    const auto target = extract_motion(t.poses[last], t.poses[last + 1]).to_array();
    for (std::size_t f = 0; f < kMotionDim; ++f) Y(row, static_cast<Eigen::Index>(f)) = target[f];
  }
  const LinearFit fit = fit_least_squares(X, Y, cfg.l2);
  std::array<double, kMotionDim> sigma{};
  for (std::size_t f = 0; f < kMotionDim; ++f) sigma[f] = fit.residual_std[f];
  auto policy = std::make_shared<LinearPolicy>(w, fit.weights, sigma, sex);
  policy->set_used_ridge(fit.used_ridge);
  return policy;
}

std::string to_string(Arch a) { return a == Arch::conv ? "conv" : "gru"; }

Arch parse_arch(const std::string& s) {
  if (s == "conv" || s == "conv-window") return Arch::conv;
  if (s == "gru") return Arch::gru;
  throw DataError("unknown architecture '" + s + "'");
}

CategoricalPolicy::CategoricalPolicy(Arch arch, std::size_t width, std::size_t window, BinCodec codec,
                                     nn::MotionNorm norm, nn::Vec params, std::optional<Sex> sex)
    : arch_(arch),
      width_(width),
      window_(window),
      codec_(std::move(codec)),
      norm_(norm),
      params_(std::move(params)),
      sex_(sex) {
  if (arch_ == Arch::conv) {
    conv_ = std::make_unique<nn::ConvPolicyNet>(width_);
  } else {
    gru_ = std::make_unique<nn::GruPolicyNet>(width_);
  }
  if (static_cast<std::size_t>(params_.size()) != net().num_params()) {
    throw DataError("categorical policy parameter count does not match its architecture");
  }
}

const nn::Trainable<nn::PolicyWindow>& CategoricalPolicy::net() const {
  if (conv_) return *conv_;
  return *gru_;
}

namespace {

nn::Vec sense_vec(const SensoryFrame& s) {
  nn::Vec v(static_cast<Eigen::Index>(kSensoryDim));
  for (std::size_t k = 0; k < kSensoryDim; ++k) v[static_cast<Eigen::Index>(k)] = s[k];
  return v;
}

nn::Vec gru_input(const nn::MotionNorm& norm, const MotionDelta& m, const SensoryFrame& s) {
  nn::Vec x(static_cast<Eigen::Index>(kMotionDim + kSensoryDim));
  x.head(kMotionDim) = norm.apply(m);
  x.tail(kSensoryDim) = sense_vec(s);
  return x;
}

}  // namespace

void CategoricalPolicy::warm_up(PolicyState& state) const {
  if (arch_ != Arch::gru) return;
  state.hidden = nn::Vec::Zero(static_cast<Eigen::Index>(width_));
  for (std::size_t i = 0; i < state.senses.size(); ++i) {
    state.hidden = gru_->step(params_, state.hidden, gru_input(norm_, state.motions[i], state.senses[i]));
  }
}

PolicyOutput CategoricalPolicy::predict(PolicyState& next, const SensoryFrame& s) const {
  nn::Vec logits;
  if (arch_ == Arch::gru) {
    if (next.hidden.size() != static_cast<Eigen::Index>(width_)) {
      next.hidden = nn::Vec::Zero(static_cast<Eigen::Index>(width_));
    }
    next.hidden = gru_->step(params_, next.hidden, gru_input(norm_, next.motions.back(), s));
    logits = gru_->logits(params_, next.hidden);
  } else {
    const auto window = padded_window(next.motions, window_);
    nn::Mat motion(static_cast<Eigen::Index>(window.size()), static_cast<Eigen::Index>(kMotionDim));
    for (std::size_t i = 0; i < window.size(); ++i) {
      motion.row(static_cast<Eigen::Index>(i)) = norm_.apply(window[i]).transpose();
    }
    logits = conv_->logits(params_, motion, sense_vec(s));
  }
  return PolicyOutput{CategoricalOutput{nn::softmax_rows(logits)}};
}

nn::PolicyWindow make_window(const Dataset& d, std::size_t agent, std::size_t last, std::size_t steps,
                             const BinCodec& codec, const nn::MotionNorm& norm, bool every_sense) {
  const Trajectory& t = d.trajectories.at(agent);
  if (last < steps || last + 1 >= t.size()) throw DataError("training window out of range");
  nn::PolicyWindow w;
  const auto S = static_cast<Eigen::Index>(steps);
  w.motion.resize(S, static_cast<Eigen::Index>(kMotionDim));
  w.sense = nn::Mat::Zero(S, static_cast<Eigen::Index>(kSensoryDim));
  w.targets.resize(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t f = last + 1 - steps + k;
    if (!t.valid[f - 1] || !t.valid[f] || !t.valid[f + 1]) throw DataError("training window crosses a masked frame");
    const auto row = static_cast<Eigen::Index>(k);
    w.motion.row(row) = norm.apply(extract_motion(t.poses[f - 1], t.poses[f])).transpose();
    if (every_sense || k + 1 == steps) w.sense.row(row) = sense_vec(sense_agent(d, agent, f)).transpose();
    const auto bins = codec.encode(extract_motion(t.poses[f], t.poses[f + 1]));
    for (std::size_t g = 0; g < kMotionDim; ++g) w.targets[k][g] = static_cast<std::uint8_t>(bins[g]);
  }
  return w;
}

CategoricalTraining train_categorical(std::span<const Dataset> train, Arch arch, const BinCodec& codec,
                                      const TrainingConfig& cfg, std::optional<Sex> sex) {
  cfg.validate();
  struct Ref {
    std::size_t agent, last;
  };
  std::vector<std::size_t> videos;
  std::vector<std::vector<Ref>> refs(train.size());
  std::vector<MotionDelta> motions;
  for (std::size_t v = 0; v < train.size(); ++v) {
    for (std::size_t a = 0; a < train[v].n_agents(); ++a) {
      const Trajectory& t = train[v].trajectories[a];
      if (sex && t.sex != *sex) continue;
      for (std::size_t last : window_ends(t, cfg.window)) refs[v].push_back({a, last});
      for (std::size_t f = 1; f < t.size(); ++f) {
        if (t.valid[f - 1] && t.valid[f]) motions.push_back(extract_motion(t.poses[f - 1], t.poses[f]));
      }
    }
    if (!refs[v].empty()) videos.push_back(v);
  }
  if (videos.empty()) throw DataError("train_categorical: empty training split (no usable windows)");

  const nn::MotionNorm norm = nn::MotionNorm::fit(motions);
  std::unique_ptr<nn::Trainable<nn::PolicyWindow>> net;
  if (arch == Arch::conv) {
    net = std::make_unique<nn::ConvPolicyNet>(cfg.width);
  } else {
    net = std::make_unique<nn::GruPolicyNet>(cfg.width);
  }
  Rng rng(derive_seed(cfg.seed, 0));
  nn::Vec params = net->init_params(rng);
  Rng sampler(derive_seed(cfg.seed, 1));
  std::vector<nn::PolicyWindow> storage(cfg.batch_size);
  const bool every_sense = arch == Arch::gru;

  auto next_batch = [&](std::vector<const nn::PolicyWindow*>& batch) {
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const std::size_t v = videos[sampler.index(videos.size())];
      const Ref& r = refs[v][sampler.index(refs[v].size())];
      storage[b] = make_window(train[v], r.agent, r.last, cfg.window, codec, norm, every_sense);
      batch.push_back(&storage[b]);
    }
  };
  CategoricalTraining out;
  out.loss_trace = sgd_train(*net, params, next_batch, cfg.iterations, cfg.learning_rate, cfg.l2);
  out.policy = std::make_shared<CategoricalPolicy>(arch, cfg.width, cfg.window, codec, norm, std::move(params), sex);
  return out;
}

// ---- artifacts ----

namespace {

void write_values(std::ostringstream& out, const char* key, const double* v, std::size_t n) {
  out << key << ' ' << n;
  for (std::size_t i = 0; i < n; ++i) out << ((i % 16 == 0) ? "\n" : " ") << textio::format_double(v[i]);
  out << '\n';
}

std::string sex_tag(std::optional<Sex> s) { return s ? to_string(*s) : "any"; }

}  // namespace

std::string serialize_policy(const Policy& p) {
  std::ostringstream out;
  out << "FLYMODEL 1\n";
  out << "arch " << p.kind() << '\n';
  out << "sex " << sex_tag(p.sex()) << '\n';
  out << "window " << p.window() << '\n';
  if (const auto* lin = dynamic_cast<const LinearPolicy*>(&p)) {
    out << "codec_hash none\n";
    write_values(out, "sigma", lin->sigma().data(), kMotionDim);
    // column-major 8 x D
    write_values(out, "weights", lin->weights().data(), static_cast<std::size_t>(lin->weights().size()));
  } else if (const auto* cat = dynamic_cast<const CategoricalPolicy*>(&p)) {
    out << "codec_hash " << cat->codec()->hash() << '\n';
    out << "width " << cat->width() << '\n';
    write_values(out, "norm_mean", cat->norm().mean.data(), kMotionDim);
    write_values(out, "norm_scale", cat->norm().scale.data(), kMotionDim);
    write_values(out, "params", cat->params().data(), static_cast<std::size_t>(cat->params().size()));
  } else if (p.kind() == "halt" || p.kind() == "const") {
    out << "codec_hash none\n";
  } else {
    throw DataError("policy kind '" + p.kind() + "' has no artifact form");
  }
  return out.str();
}

std::shared_ptr<const Policy> parse_policy(const std::string& text, const BinCodec* codec) {
  std::istringstream in(text);
  std::vector<std::string> tokens;
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  std::size_t i = 0;
  auto next = [&]() -> const std::string& {
    if (i >= tokens.size()) throw DataError("truncated model artifact");
    return tokens[i++];
  };
  auto expect = [&](const char* key) {
    if (next() != key) throw DataError(std::string("model artifact: expected '") + key + "'");
  };
  auto read_values = [&](const char* key) {
    expect(key);
    const auto n = static_cast<std::size_t>(textio::parse_int(next()));
    std::vector<double> v(n);
    for (double& x : v) x = textio::parse_double(next());
    return v;
  };
  if (next() != "FLYMODEL" || next() != "1") throw DataError("not a FLYMODEL v1 artifact");
  expect("arch");
  const std::string arch = next();
  expect("sex");
  const std::string sex_s = next();
  const std::optional<Sex> sex = sex_s == "any" ? std::nullopt : std::optional<Sex>(parse_sex(sex_s));
  expect("window");
  const auto window = static_cast<std::size_t>(textio::parse_int(next()));
  expect("codec_hash");
  const std::string hash = next();

  if (arch == "halt") return make_baseline(BaselineKind::halt);
  if (arch == "const") return make_baseline(BaselineKind::constant);
  if (arch == "linear") {
    const auto sigma_v = read_values("sigma");
    const auto w = read_values("weights");
    if (sigma_v.size() != kMotionDim) throw DataError("linear artifact: sigma must have 8 values");
    const auto cols = static_cast<Eigen::Index>(LinearPolicy::input_dim(window));
    if (w.size() != static_cast<std::size_t>(cols) * kMotionDim) throw DataError("linear artifact: weight count mismatch");
    nn::Mat W = Eigen::Map<const nn::Mat>(w.data(), static_cast<Eigen::Index>(kMotionDim), cols);
    std::array<double, kMotionDim> sigma{};
    std::copy(sigma_v.begin(), sigma_v.end(), sigma.begin());
    return std::make_shared<LinearPolicy>(window, W, sigma, sex);
  }
  const Arch a = parse_arch(arch);
  if (!codec) throw DataError("categorical model artifact needs its bin codec");
  if (codec->hash() != hash) {
    throw DataError("codec hash mismatch: model expects " + hash + ", codec is " + codec->hash());
  }
  expect("width");
  const auto width = static_cast<std::size_t>(textio::parse_int(next()));
  const auto mean = read_values("norm_mean");
  const auto scale = read_values("norm_scale");
  const auto params = read_values("params");
  if (mean.size() != kMotionDim || scale.size() != kMotionDim) throw DataError("bad normalization block");
  nn::MotionNorm norm;
  std::copy(mean.begin(), mean.end(), norm.mean.begin());
  std::copy(scale.begin(), scale.end(), norm.scale.begin());
  nn::Vec pv = Eigen::Map<const nn::Vec>(params.data(), static_cast<Eigen::Index>(params.size()));
  return std::make_shared<CategoricalPolicy>(a, width, window, *codec, norm, std::move(pv), sex);
}

void save_policy(const Policy& p, const std::string& path) { textio::write_file(path, serialize_policy(p)); }

std::shared_ptr<const Policy> load_policy(const std::string& path, const BinCodec* codec) {
  return parse_policy(textio::read_file(path), codec);
}

std::string policy_hash(const Policy& p) {
  if (p.kind() == "replay") return "replay";
  return textio::hex64(textio::fnv1a64(serialize_policy(p)));
}

}  // namespace flyeval
