// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#include "flyeval/rvf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "flyeval/errors.hpp"
#include "flyeval/rng.hpp"
#include "flyeval/sense.hpp"
#include "flyeval/textio.hpp"

namespace flyeval {

std::string to_string(DiscVariant v) { return v == DiscVariant::raw ? "raw" : "engineered"; }

DiscVariant parse_disc_variant(const std::string& s) {
  if (s == "raw") return DiscVariant::raw;
  if (s == "engineered" || s == "eng") return DiscVariant::engineered;
  throw DataError("unknown discriminator variant '" + s + "'");
}

std::string to_string(nn::DiscLoss l) { return l == nn::DiscLoss::least_squares ? "least-squares" : "cross-entropy"; }

nn::DiscLoss parse_disc_loss(const std::string& s) {
  if (s == "least-squares" || s == "ls") return nn::DiscLoss::least_squares;
  if (s == "cross-entropy" || s == "ce") return nn::DiscLoss::cross_entropy;
  throw DataError("unknown discriminator loss '" + s + "'");
}

namespace {

void check_window(const Dataset& d, std::size_t agent, std::size_t w) {
  const Trajectory& t = d.trajectories.at(agent);
  if (w == 0 || w + kRvfWindow > t.size()) throw DataError("discriminator window out of range");
  for (std::size_t f = w - 1; f < w + kRvfWindow; ++f) {
    if (!t.valid[f]) throw DataError("discriminator window crosses a masked frame");
  }
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

nn::Mat raw_window(const Dataset& d, std::size_t agent, std::size_t w) {
  check_window(d, agent, w);
  const Trajectory& t = d.trajectories[agent];
  nn::Mat m(static_cast<Eigen::Index>(kRvfWindow), static_cast<Eigen::Index>(kRawChannels));
  for (std::size_t k = 0; k < kRvfWindow; ++k) {
    const std::size_t f = w + k;
    const auto mv = extract_motion(t.poses[f - 1], t.poses[f]).to_array();
    const SensoryFrame s = sense_agent(d, agent, f);
    const auto row = static_cast<Eigen::Index>(k);
    for (std::size_t c = 0; c < kMotionDim; ++c) m(row, static_cast<Eigen::Index>(c)) = mv[c];
    for (std::size_t c = 0; c < kSensoryDim; ++c) m(row, static_cast<Eigen::Index>(kMotionDim + c)) = s[c];
  }
  return m;
}

nn::Mat engineered_window(const Dataset& d, std::size_t agent, std::size_t w) {
  check_window(d, agent, w);
  const Trajectory& t = d.trajectories[agent];
  std::vector<double> speed, turn, inter, wall, wing;
  for (std::size_t f = w; f < w + kRvfWindow; ++f) {
    const Pose& p = t.poses[f];
    const Pose& q = t.poses[f - 1];
    speed.push_back(std::hypot(p.x - q.x, p.y - q.y) * t.fps);
    turn.push_back(std::abs(wrap_angle(p.theta - q.theta)));
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < d.n_agents(); ++b) {
      if (b == agent || !d.trajectories[b].valid[f]) continue;
      const Pose& o = d.trajectories[b].poses[f];
      nearest = std::min(nearest, std::hypot(o.x - p.x, o.y - p.y));
    }
    inter.push_back(std::isfinite(nearest) ? nearest : 0.0);
    wall.push_back(std::max(0.0, d.arena.radius - std::hypot(p.x, p.y)));
    wing.push_back(0.5 * (std::abs(p.wing_angle_l) + std::abs(p.wing_angle_r)));
  }
  nn::Mat m(1, static_cast<Eigen::Index>(kEngineeredFeatures));
  Eigen::Index c = 0;
  for (const auto* v : {&speed, &turn, &inter, &wall, &wing}) {
    const double mu = mean_of(*v);
    m(0, c++) = mu;
    m(0, c++) = std_of(*v, mu);
  }
  return m;
}

std::optional<int> assign_split(const SplitBounds& b, std::size_t first, std::size_t last) {
  if (last < first || last >= b.end) return std::nullopt;
  auto which = [&](std::size_t f) { return f < b.train_end ? 0 : (f < b.val_end ? 1 : 2); };
  const int s = which(first);
  if (which(last) != s) return std::nullopt;
  return s;
}

namespace {

std::size_t provenance_size(const Dataset& d, const char* key, std::size_t fallback) {
  auto it = d.provenance.find(key);
  if (it == d.provenance.end()) return fallback;
  return static_cast<std::size_t>(textio::parse_int(it->second));
}

std::vector<bool> fake_agents(const Dataset& fake) {
  std::vector<bool> out(fake.n_agents(), true);
  auto it = fake.provenance.find("simulated_agents");
  if (it == fake.provenance.end()) return out;
  std::set<std::string> ids;
  std::stringstream ss(it->second);
  std::string tok;
  while (std::getline(ss, tok, ',')) ids.insert(tok);
  for (std::size_t a = 0; a < fake.n_agents(); ++a) {
    out[a] = ids.count(std::to_string(fake.trajectories[a].agent_id)) > 0;
  }
  return out;
}

void collect(const Dataset& d, const std::vector<bool>& use, std::size_t offset, int label,
             const WindowSetConfig& cfg, const SplitBounds& b, std::vector<WindowExample> (&by_split)[3]) {
  for (std::size_t a = 0; a < d.n_agents(); ++a) {
    if (!use[a]) continue;
    const Trajectory& t = d.trajectories[a];
    std::size_t w = 1;
    while (w + kRvfWindow <= t.size()) {
      bool ok = true;
      for (std::size_t f = w - 1; f < w + kRvfWindow && ok; ++f) ok = t.valid[f];
      const auto split = ok ? assign_split(b, offset + w - 1, offset + w + kRvfWindow - 1) : std::nullopt;
      if (!split) {
        ++w;
        continue;
      }
      WindowExample ex;
      ex.input = cfg.variant == DiscVariant::raw ? raw_window(d, a, w) : engineered_window(d, a, w);
      ex.label = label;
      ex.agent = a;
      ex.start = offset + w;
      by_split[*split].push_back(std::move(ex));
      w += std::max<std::size_t>(1, cfg.stride);
    }
  }
}

}  // namespace

WindowSet build_window_set(const Dataset& real, const Dataset& fake, const WindowSetConfig& cfg) {
  return build_window_set(real, std::span<const Dataset>(&fake, 1), cfg);
}

WindowSet build_window_set(const Dataset& real, std::span<const Dataset> fakes, const WindowSetConfig& cfg) {
  if (real.n_agents() == 0 || fakes.empty()) throw DataError("window set needs nonempty datasets");
  for (const Dataset& f : fakes) {
    if (f.n_agents() == 0) throw DataError("window set needs nonempty datasets");
  }
  if (!(cfg.train_fraction > 0.0 && cfg.validation_fraction >= 0.0 &&
        cfg.train_fraction + cfg.validation_fraction < 1.0)) {
    throw DataError("split fractions must be positive and sum to < 1");
  }
  WindowSet set;
  set.bounds.end = real.n_frames();
  for (const Dataset& f : fakes) set.bounds.end = std::max(set.bounds.end, provenance_size(f, "start_frame", 0) + f.n_frames());
  const auto end = static_cast<double>(set.bounds.end);
  set.bounds.train_end = static_cast<std::size_t>(std::floor(end * cfg.train_fraction));
  set.bounds.val_end = static_cast<std::size_t>(std::floor(end * (cfg.train_fraction + cfg.validation_fraction)));

  std::vector<WindowExample> reals[3], fake_w[3];
  collect(real, std::vector<bool>(real.n_agents(), true), 0, 1, cfg, set.bounds, reals);
  for (const Dataset& f : fakes) collect(f, fake_agents(f), provenance_size(f, "start_frame", 0), 0, cfg, set.bounds, fake_w);

  std::vector<WindowExample>* outs[3] = {&set.train, &set.validation, &set.test};
  const char* names[3] = {"train", "validation", "test"};
  for (int s = 0; s < 3; ++s) {
    if (s == 1 && cfg.validation_fraction == 0.0) continue;
    std::size_t n = std::min(reals[s].size(), fake_w[s].size());
    if (cfg.max_per_class > 0) n = std::min(n, cfg.max_per_class);
    if (n == 0) {
      throw DataError(std::string("insufficient windows for the ") + names[s] + " split (" +
                      std::to_string(reals[s].size()) + " real, " + std::to_string(fake_w[s].size()) + " fake)");
    }
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(s)));
    for (auto* pool : {&reals[s], &fake_w[s]}) {
      // partial Fisher-Yates: the first n entries become a uniform subset
      for (std::size_t i = 0; i < n; ++i) std::swap((*pool)[i], (*pool)[i + rng.index(pool->size() - i)]);
      for (std::size_t i = 0; i < n; ++i) outs[s]->push_back(std::move((*pool)[i]));
    }
  }
  return set;
}

double ls_loss(std::span<const double> real, std::span<const double> fake) {
  if (real.empty() || fake.empty()) throw DataError("ls_loss needs scores for both classes");
  double r = 0.0, f = 0.0;
  for (double s : real) r += (s - 1.0) * (s - 1.0);
  for (double s : fake) f += s * s;
  return r / static_cast<double>(real.size()) + f / static_cast<double>(fake.size());
}

void DiscConfig::validate() const {
  if (epochs == 0 || batch_size == 0 || filters1 == 0 || filters2 == 0 || hidden == 0) {
    throw DataError("discriminator sizes and epochs must be positive");
  }
  if (!(learning_rate > 0.0) || l2 < 0.0) throw DataError("discriminator needs lr > 0 and L2 >= 0");
}

std::string DiscConfig::hash() const {
  std::ostringstream s;
  s << to_string(variant) << ' ' << to_string(loss) << ' ' << epochs << ' ' << textio::format_double(learning_rate)
    << ' ' << textio::format_double(l2) << ' ' << batch_size << ' ' << seed << ' ' << filters1 << ' ' << filters2
    << ' ' << hidden;
  return textio::hex64(textio::fnv1a64(s.str()));
}

std::unique_ptr<nn::DiscNet> make_disc_net(const DiscConfig& cfg, std::size_t channels) {
  std::unique_ptr<nn::DiscNet> net;
  if (cfg.variant == DiscVariant::raw) {
    net = std::make_unique<nn::ConvDiscNet>(channels, cfg.filters1, cfg.filters2, cfg.hidden);
  } else {
    net = std::make_unique<nn::MlpDiscNet>(channels, cfg.hidden);
  }
  net->set_loss_kind(cfg.loss);
  return net;
}

Discriminator::Discriminator(DiscConfig cfg, nn::Vec mean, nn::Vec scale, nn::Vec params)
    : cfg_(cfg), mean_(std::move(mean)), scale_(std::move(scale)), params_(std::move(params)) {
  if (mean_.size() != scale_.size()) throw DataError("discriminator normalization size mismatch");
  net_ = make_disc_net(cfg_, channels());
  if (static_cast<std::size_t>(params_.size()) != net_->num_params()) {
    throw DataError("discriminator parameter count does not match its configuration");
  }
}

nn::Mat Discriminator::standardize(const nn::Mat& input) const {
  if (input.cols() != mean_.size()) throw DataError("discriminator input has the wrong channel count");
  return (input.rowwise() - mean_.transpose()).array().rowwise() / scale_.transpose().array();
}

double Discriminator::decision_value(const nn::Mat& input) const {
  return net_->decision_value(params_, standardize(input));
}

DiscTraining train_discriminator(const WindowSet& set, const DiscConfig& cfg) {
  cfg.validate();
  if (set.train.empty()) throw DataError("discriminator training set is empty");
  const Eigen::Index ch = set.train.front().input.cols();
  // per-channel standardization fitted on the training split
  nn::Vec mean = nn::Vec::Zero(ch), sq = nn::Vec::Zero(ch);
  double rows = 0.0;
  for (const auto& ex : set.train) {
    if (ex.input.cols() != ch) throw DataError("mixed window variants in one set");
    mean += ex.input.colwise().sum().transpose();
    rows += static_cast<double>(ex.input.rows());
  }
  mean /= rows;
  for (const auto& ex : set.train) sq += (ex.input.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
  nn::Vec scale = (sq / rows).array().sqrt().max(1e-8).matrix();

  std::unique_ptr<nn::DiscNet> net = make_disc_net(cfg, static_cast<std::size_t>(ch));
  Rng init(derive_seed(cfg.seed, 0));
  nn::Vec params = net->init_params(init);
  Rng shuffle(derive_seed(cfg.seed, 1));

  auto standardize = [&](const nn::Mat& x) -> nn::Mat {
    return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  };
  std::vector<nn::Mat> train_x;
  train_x.reserve(set.train.size());
  for (const auto& ex : set.train) train_x.push_back(standardize(ex.input));
  std::vector<nn::Mat> val_x;
  for (const auto& ex : set.validation) val_x.push_back(standardize(ex.input));

  DiscTraining out;
  std::vector<std::size_t> order(set.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  nn::Vec grad(params.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.index(i)]);
    double epoch_obj = 0.0;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      std::size_t nr = 0, nf = 0;
      for (std::size_t i = b0; i < b1; ++i) (set.train[order[i]].label == 1 ? nr : nf)++;
      grad.setZero();
      double obj = 0.0;
      for (std::size_t i = b0; i < b1; ++i) {
        const std::size_t k = order[i];
        const int y = set.train[k].label;
        // class-wise means, so the batch objective is E_real + E_fake
        const double wgt = 1.0 / static_cast<double>(y == 1 ? nr : nf);
        const double s = net->score(params, train_x[k]);
        double l = 0.0, ds = 0.0;
        if (cfg.loss == nn::DiscLoss::least_squares) {
          const double t = y == 1 ? 1.0 : 0.0;
          l = (s - t) * (s - t);
          ds = 2.0 * (s - t);
        } else {
          const double z = y == 1 ? -s : s;
          l = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
          ds = 1.0 / (1.0 + std::exp(-s)) - (y == 1 ? 1.0 : 0.0);
        }
        obj += wgt * l;
        net->backward(params, train_x[k], wgt * ds, grad);
      }
      if (!std::isfinite(obj) || !grad.allFinite()) {
        throw NumericalError("discriminator diverged at epoch " + std::to_string(epoch));
      }
      params -= cfg.learning_rate * (grad + cfg.l2 * params);
      epoch_obj += obj;
      ++batches;
    }
    out.train_objective.push_back(epoch_obj / static_cast<double>(batches));
    if (!val_x.empty()) {
      std::size_t correct = 0;
      for (std::size_t i = 0; i < val_x.size(); ++i) {
        const bool real = net->decision_value(params, val_x[i]) > 0.5;
        if (real == (set.validation[i].label == 1)) ++correct;
      }
      out.validation_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(val_x.size()));
    }
  }
  out.disc = std::make_shared<Discriminator>(cfg, std::move(mean), std::move(scale), std::move(params));
  return out;
}

Accuracy accuracy_from_decisions(std::span<const double> values, std::span<const int> labels) {
  if (values.size() != labels.size()) throw DataError("decision and label counts differ");
  if (values.empty()) throw DataError("accuracy of an empty set");
  Accuracy a;
  std::size_t correct = 0, cr = 0, cf = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const bool says_real = values[i] > 0.5;
    if (labels[i] == 1) {
      ++a.n_real;
      if (says_real) ++cr;
    } else {
      ++a.n_fake;
      if (!says_real) ++cf;
    }
  }
  correct = cr + cf;
  a.n = values.size();
  a.overall = static_cast<double>(correct) / static_cast<double>(a.n);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  a.real = a.n_real ? static_cast<double>(cr) / static_cast<double>(a.n_real) : nan;
  a.fake = a.n_fake ? static_cast<double>(cf) / static_cast<double>(a.n_fake) : nan;
  return a;
}

Accuracy eval_discriminator(const Discriminator& disc, std::span<const WindowExample> test) {
  std::vector<double> values;
  std::vector<int> labels;
  values.reserve(test.size());
  labels.reserve(test.size());
  for (const auto& ex : test) {
    values.push_back(disc.decision_value(ex.input));
    labels.push_back(ex.label);
  }
  return accuracy_from_decisions(values, labels);
}

std::vector<std::pair<std::string, Accuracy>> rank_models(std::vector<std::pair<std::string, Accuracy>> r) {
  std::stable_sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.second.overall < b.second.overall; });
  return r;
}

namespace {

void put_values(std::ostringstream& out, const char* key, const nn::Vec& v) {
  out << key << ' ' << v.size();
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ((i % 16 == 0) ? "\n" : " ") << textio::format_double(v[i]);
  out << '\n';
}

}  // namespace

std::string serialize_discriminator(const Discriminator& d) {
  const DiscConfig& c = d.config();
  std::ostringstream out;
  out << "FLYDISC 1\n";
  out << "variant " << to_string(c.variant) << "\nloss " << to_string(c.loss) << "\nepochs " << c.epochs
      << "\nlearning_rate " << textio::format_double(c.learning_rate) << "\nl2 " << textio::format_double(c.l2)
      << "\nbatch_size " << c.batch_size << "\nseed " << c.seed << "\nfilters1 " << c.filters1 << "\nfilters2 "
      << c.filters2 << "\nhidden " << c.hidden << "\nconfig_hash " << c.hash() << '\n';
  put_values(out, "mean", d.mean());
  put_values(out, "scale", d.scale());
  put_values(out, "params", d.params());
  return out.str();
}

std::shared_ptr<const Discriminator> parse_discriminator(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> tok;
  for (std::string t; in >> t;) tok.push_back(t);
  std::size_t i = 0;
  auto next = [&]() -> const std::string& {
    if (i >= tok.size()) throw DataError("truncated discriminator artifact");
    return tok[i++];
  };
  auto field = [&](const char* key) -> const std::string& {
    if (next() != key) throw DataError(std::string("discriminator artifact: expected '") + key + "'");
    return next();
  };
  auto values = [&](const char* key) {
    const auto n = textio::parse_int(field(key));
    nn::Vec v(n);
    for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = textio::parse_double(next());
    return v;
  };
  if (next() != "FLYDISC" || next() != "1") throw DataError("not a FLYDISC v1 artifact");
  DiscConfig c;
  c.variant = parse_disc_variant(field("variant"));
  c.loss = parse_disc_loss(field("loss"));
  c.epochs = static_cast<std::size_t>(textio::parse_int(field("epochs")));
  c.learning_rate = textio::parse_double(field("learning_rate"));
  c.l2 = textio::parse_double(field("l2"));
  c.batch_size = static_cast<std::size_t>(textio::parse_int(field("batch_size")));
  c.seed = static_cast<std::uint64_t>(textio::parse_int(field("seed")));
  c.filters1 = static_cast<std::size_t>(textio::parse_int(field("filters1")));
  c.filters2 = static_cast<std::size_t>(textio::parse_int(field("filters2")));
  c.hidden = static_cast<std::size_t>(textio::parse_int(field("hidden")));
  if (field("config_hash") != c.hash()) throw DataError("discriminator config hash mismatch");
  nn::Vec mean = values("mean");
  nn::Vec scale = values("scale");
  nn::Vec params = values("params");
  return std::make_shared<Discriminator>(c, std::move(mean), std::move(scale), std::move(params));
}

}  // namespace flyeval
