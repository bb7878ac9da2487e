// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#include "flyeval/sense.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "flyeval/errors.hpp"
#include "flyeval/textio.hpp"

namespace flyeval {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSectorWidth = 2.0 * kPi / static_cast<double>(kSectors);
// Slack for agents sitting exactly on the boundary after clamping.
constexpr double kArenaTolerance = 1e-9;

}  // namespace

double f_vision(double d) noexcept {
  return 1.0 - std::min(1.0, 0.05 * std::sqrt(std::max(0.0, d - 1.0)));
}

double f_chamber(double d) noexcept {
  const double raw = 1.3 * (0.4 * (d - kChamberOffset)) / 2.0;
  return std::clamp(raw, 0.0, 1.0);
}

std::size_t sector_of(double bearing) noexcept {
  const double b = wrap_angle(bearing);
  auto k = static_cast<long>(std::floor((b + kPi) / kSectorWidth));
  // bearing == pi coincides with -pi, the start of sector 0
  if (k >= static_cast<long>(kSectors)) k -= static_cast<long>(kSectors);
  if (k < 0) k = 0;
  return static_cast<std::size_t>(k);
}

SensoryFrame sense_frame(const Pose& self, std::span<const Pose> others, const Arena& arena) {
  const double r2 = self.x * self.x + self.y * self.y;
  if (std::sqrt(r2) > arena.radius + kArenaTolerance) {
    throw DataError("agent at (" + std::to_string(self.x) + ", " + std::to_string(self.y) +
                    ") lies outside the arena");
  }
  SensoryFrame out;

  std::array<double, kSectors> nearest;
  nearest.fill(INFINITY);
  for (const Pose& o : others) {
    const double dx = o.x - self.x;
    const double dy = o.y - self.y;
    const double d = std::hypot(dx, dy);
    const double bearing = wrap_angle(std::atan2(dy, dx) - self.theta);
    const std::size_t k = sector_of(bearing);
    nearest[k] = std::min(nearest[k], d);
  }
  for (std::size_t k = 0; k < kSectors; ++k) {
    out.vision[k] = std::isfinite(nearest[k]) ? f_vision(nearest[k]) : 0.0;
  }

  const double c = std::min(0.0, r2 - arena.radius * arena.radius);
  for (std::size_t k = 0; k < kSectors; ++k) {
    const double bearing = -kPi + (static_cast<double>(k) + 0.5) * kSectorWidth;
    const double a = self.theta + bearing;
    const double b = self.x * std::cos(a) + self.y * std::sin(a);
    const double t = -b + std::sqrt(b * b - c);
    out.wall[k] = f_chamber(std::max(0.0, t));
  }
  return out;
}

SensoryFrame sense_agent(const Dataset& d, std::size_t agent, std::size_t frame) {
  std::vector<Pose> others;
  others.reserve(d.n_agents());
  for (std::size_t j = 0; j < d.n_agents(); ++j) {
    if (j != agent && d.trajectories[j].valid[frame]) others.push_back(d.trajectories[j].poses[frame]);
  }
  return sense_frame(d.trajectories[agent].poses[frame], others, d.arena);
}

BinCodec::BinCodec(std::array<Edges, kMotionDim> edges, std::string fitted_on)
    : edges_(edges), fitted_on_(std::move(fitted_on)) {
  for (std::size_t f = 0; f < kMotionDim; ++f) {
    for (std::size_t k = 0; k < kBins; ++k) {
      if (!(edges_[f][k] < edges_[f][k + 1])) {
        throw DataError(std::string("bin edges for ") + kMotionFeatureNames[f] +
                        " are not strictly increasing");
      }
    }
  }
}

std::size_t BinCodec::encode(std::size_t feature, double value) const {
  if (std::isnan(value)) throw DataError("cannot encode NaN motion value");
  const Edges& e = edges_.at(feature);
  // bin b covers [e[b], e[b+1]); out-of-range values clip into the edge bins
  auto it = std::upper_bound(e.begin() + 1, e.begin() + kBins, value);
  return static_cast<std::size_t>(it - (e.begin() + 1));
}

std::array<std::size_t, kMotionDim> BinCodec::encode(const MotionDelta& m) const {
  const auto v = m.to_array();
  std::array<std::size_t, kMotionDim> bins{};
  for (std::size_t f = 0; f < kMotionDim; ++f) bins[f] = encode(f, v[f]);
  return bins;
}

double BinCodec::bin_center(std::size_t feature, std::size_t bin) const {
  const Edges& e = edges_.at(feature);
  if (bin >= kBins) throw DataError("bin index out of range");
  return 0.5 * (e[bin] + e[bin + 1]);
}

MotionDelta BinCodec::decode_centers(const std::array<std::size_t, kMotionDim>& bins) const {
  std::array<double, kMotionDim> v{};
  for (std::size_t f = 0; f < kMotionDim; ++f) v[f] = bin_center(f, bins[f]);
  return MotionDelta::from_array(v);
}

std::string BinCodec::serialize() const {
  std::ostringstream out;
  out << "FLYCODEC 1\n";
  out << "fitted_on " << textio::escape(fitted_on_) << '\n';
  for (std::size_t f = 0; f < kMotionDim; ++f) {
    out << "feature " << kMotionFeatureNames[f];
    for (double e : edges_[f]) out << ' ' << textio::format_double(e);
    out << '\n';
  }
  return out.str();
}

BinCodec BinCodec::parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || textio::split_ws(line) != std::vector<std::string_view>{"FLYCODEC", "1"}) {
    throw DataError("not a FLYCODEC v1 artifact");
  }
  std::string fitted_on;
  std::array<Edges, kMotionDim> edges{};
  std::array<bool, kMotionDim> have{};
  while (std::getline(in, line)) {
    auto tok = textio::split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "fitted_on" && tok.size() == 2) {
      fitted_on = textio::unescape(tok[1]);
    } else if (tok[0] == "feature" && tok.size() == kBins + 3) {
      const auto it = std::find(kMotionFeatureNames.begin(), kMotionFeatureNames.end(), tok[1]);
      if (it == kMotionFeatureNames.end()) throw DataError("unknown codec feature");
      const auto f = static_cast<std::size_t>(it - kMotionFeatureNames.begin());
      for (std::size_t k = 0; k <= kBins; ++k) edges[f][k] = textio::parse_double(tok[k + 2]);
      have[f] = true;
    } else {
      throw DataError("malformed codec record");
    }
  }
  for (bool h : have) {
    if (!h) throw DataError("codec is missing a feature");
  }
  return BinCodec(edges, fitted_on);
}

std::string BinCodec::hash() const { return textio::hex64(textio::fnv1a64(serialize())); }

std::vector<MotionDelta> motion_samples(const Dataset& d) {
  std::vector<MotionDelta> out;
  for (const auto& t : d.trajectories) {
    for (std::size_t f = 1; f < t.size(); ++f) {
      if (t.valid[f - 1] && t.valid[f]) out.push_back(extract_motion(t.poses[f - 1], t.poses[f]));
    }
  }
  return out;
}

namespace {

BinCodec::Edges quantile_edges(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  BinCodec::Edges e{};
  const double lo = v.front();
  const double hi = v.back();
  if (!(hi - lo > 1e-12 * std::max(1.0, std::abs(lo)))) {
    // constant feature: widen around the single value
    const double half = std::max(1e-6, 1e-6 * std::abs(lo));
    for (std::size_t k = 0; k <= kBins; ++k) {
      e[k] = lo - half + 2.0 * half * static_cast<double>(k) / static_cast<double>(kBins);
    }
    return e;
  }
  const double n1 = static_cast<double>(v.size() - 1);
  for (std::size_t k = 0; k <= kBins; ++k) {
    const double h = n1 * static_cast<double>(k) / static_cast<double>(kBins);
    const auto i = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(i);
    e[k] = (i + 1 < v.size()) ? v[i] + frac * (v[i + 1] - v[i]) : v[i];
  }
  e[0] = lo;
  e[kBins] = hi;
  bool strict = true;
  for (std::size_t k = 0; k < kBins; ++k) strict = strict && (e[k] < e[k + 1]);
  if (!strict) {
    // ties: blend with a uniform grid so every bin has positive width
    constexpr double alpha = 1e-6;
    for (std::size_t k = 0; k <= kBins; ++k) {
      const double u = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(kBins);
      e[k] = (1.0 - alpha) * e[k] + alpha * u;
    }
    e[0] = lo;
    e[kBins] = hi;
  }
  return e;
}

}  // namespace

BinCodec fit_bins(std::span<const MotionDelta> samples, std::string fitted_on) {
  if (samples.size() < kMinBinSamples) {
    throw DataError("fit_bins needs at least " + std::to_string(kMinBinSamples) +
                    " motion samples, got " + std::to_string(samples.size()));
  }
  std::array<BinCodec::Edges, kMotionDim> edges{};
  std::vector<double> column(samples.size());
  for (std::size_t f = 0; f < kMotionDim; ++f) {
    for (std::size_t i = 0; i < samples.size(); ++i) column[i] = samples[i].to_array()[f];
    edges[f] = quantile_edges(column);
  }
  return BinCodec(edges, std::move(fitted_on));
}

BinCodec fit_bins(const Dataset& train) {
  const auto samples = motion_samples(train);
  return fit_bins(samples, train.genotype_label + ":" + to_string(train.split));
}

MotionDelta sample_categorical(std::span<const std::array<double, kBins>, kMotionDim> probs,
                               const BinCodec& codec, Rng& rng) {
  std::array<double, kMotionDim> v{};
  for (std::size_t f = 0; f < kMotionDim; ++f) {
    const auto& row = probs[f];
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0)) throw DataError("categorical distribution has a negative or NaN entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw DataError(std::string("categorical row for ") + kMotionFeatureNames[f] +
                      " is not normalized");
    }
    const double u = rng.uniform() * sum;
    double acc = 0.0;
    std::size_t bin = kBins - 1;
    for (std::size_t b = 0; b < kBins; ++b) {
      acc += row[b];
      if (u < acc && row[b] > 0.0) {
        bin = b;
        break;
      }
    }
    // rounding can leave u past the last cumulative sum; keep the last nonzero bin
    if (row[bin] == 0.0) {
      for (std::size_t b = kBins; b-- > 0;) {
        if (row[b] > 0.0) {
          bin = b;
          break;
        }
      }
    }
    const auto& e = codec.edges(f);
    v[f] = e[bin] + (e[bin + 1] - e[bin]) * rng.uniform();
  }
  return MotionDelta::from_array(v);
}

std::vector<BehaviorSample> behavior_stats(const Dataset& d) {
  std::vector<BehaviorSample> out;
  const double fps = d.fps();
  for (std::size_t f = 1; f < d.n_frames(); ++f) {
    for (std::size_t a = 0; a < d.n_agents(); ++a) {
      const Trajectory& t = d.trajectories[a];
      if (!t.valid[f] || !t.valid[f - 1]) continue;
      const Pose& p = t.poses[f];
      const Pose& q = t.poses[f - 1];
      BehaviorSample s;
      s.agent = a;
      s.frame = f;
      s.sex = t.sex;
      s.speed = std::hypot(p.x - q.x, p.y - q.y) * fps;
      s.wall_distance = std::max(0.0, d.arena.radius - std::hypot(p.x, p.y));
      s.angular_motion = std::abs(wrap_angle(p.theta - q.theta));
      s.wing_angle = 0.5 * (std::abs(p.wing_angle_l) + std::abs(p.wing_angle_r));
      double best = INFINITY;
      for (std::size_t b = 0; b < d.n_agents(); ++b) {
        if (b == a || !d.trajectories[b].valid[f]) continue;
        const Pose& o = d.trajectories[b].poses[f];
        best = std::min(best, std::hypot(o.x - p.x, o.y - p.y));
      }
      if (std::isfinite(best)) s.inter_distance = best;
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace flyeval
