// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#include "flyeval/nets.hpp"

#include <algorithm>
#include <cmath>

#include "flyeval/errors.hpp"

namespace flyeval::nn {

namespace {

using CMap = Eigen::Map<const Mat>;
using MMap = Eigen::Map<Mat>;
using CVMap = Eigen::Map<const Vec>;
using MVMap = Eigen::Map<Vec>;

Vec relu(const Vec& x) { return x.cwiseMax(0.0); }
Mat relu(const Mat& x) { return x.cwiseMax(0.0); }

// dy masked by the sign of the activation it flowed through
Vec relu_back(const Vec& act, const Vec& dy) {
  return (act.array() > 0.0).select(dy, 0.0);
}
Mat relu_back(const Mat& act, const Mat& dy) {
  return (act.array() > 0.0).select(dy, 0.0);
}

double sigmoid(double s) {
  return s >= 0.0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
}

Vec sigmoid(const Vec& x) { return x.unaryExpr([](double v) { return sigmoid(v); }); }

double softplus(double s) { return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

void fill_uniform(Vec& params, std::size_t off, std::size_t n, double a, Rng& rng) {
  for (std::size_t i = 0; i < n; ++i) params[static_cast<Eigen::Index>(off + i)] = rng.uniform(-a, a);
}

}  // namespace

Dense::Dense(Layout& layout, std::size_t in_dim, std::size_t out_dim, bool with_bias)
    : in(in_dim), out(out_dim), bias(with_bias) {
  w = layout.add(in * out);
  b = bias ? layout.add(out) : 0;
}

Vec Dense::forward(const Vec& params, const Vec& x) const {
  const CMap W(params.data() + w, static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  if (!bias) return W * x;
  return W * x + CVMap(params.data() + b, static_cast<Eigen::Index>(out));
}

Vec Dense::backward(const Vec& params, const Vec& x, const Vec& dy, Vec& grad) const {
  const auto o = static_cast<Eigen::Index>(out);
  const auto i = static_cast<Eigen::Index>(in);
  MMap(grad.data() + w, o, i).noalias() += dy * x.transpose();
  if (bias) MVMap(grad.data() + b, o) += dy;
  return CMap(params.data() + w, o, i).transpose() * dy;
}

void Dense::init(Vec& params, Rng& rng, double gain) const {
  fill_uniform(params, w, in * out, gain * std::sqrt(3.0 / static_cast<double>(in)), rng);
  if (bias) fill_uniform(params, b, out, 0.0, rng);
}

void Dense::zero(Vec& params) const {
  params.segment(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(in * out)).setZero();
  if (bias) params.segment(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(out)).setZero();
}

Conv1d::Conv1d(Layout& layout, std::size_t in_ch, std::size_t out_ch, std::size_t k)
    : cin(in_ch), cout(out_ch), kernel(k), pad(k / 2) {
  w = layout.add(kernel * cout * cin);
  b = layout.add(cout);
}

Mat Conv1d::forward(const Vec& params, const Mat& x) const {
  const auto T = x.rows();
  const auto co = static_cast<Eigen::Index>(cout);
  const auto ci = static_cast<Eigen::Index>(cin);
  Mat y = CVMap(params.data() + b, co).transpose().replicate(T, 1);
  for (std::size_t k = 0; k < kernel; ++k) {
    const auto o = static_cast<Eigen::Index>(k) - static_cast<Eigen::Index>(pad);
    const Eigen::Index t0 = std::max<Eigen::Index>(0, -o);
    const Eigen::Index t1 = std::min<Eigen::Index>(T, T - o);
    if (t1 <= t0) continue;
    const CMap Wk(params.data() + w + k * cout * cin, co, ci);
    y.middleRows(t0, t1 - t0).noalias() += x.middleRows(t0 + o, t1 - t0) * Wk.transpose();
  }
  return y;
}

Mat Conv1d::backward(const Vec& params, const Mat& x, const Mat& dy, Vec& grad) const {
  const auto T = x.rows();
  const auto co = static_cast<Eigen::Index>(cout);
  const auto ci = static_cast<Eigen::Index>(cin);
  Mat dx = Mat::Zero(T, ci);
  MVMap(grad.data() + b, co) += dy.colwise().sum().transpose();
  for (std::size_t k = 0; k < kernel; ++k) {
    const auto o = static_cast<Eigen::Index>(k) - static_cast<Eigen::Index>(pad);
    const Eigen::Index t0 = std::max<Eigen::Index>(0, -o);
    const Eigen::Index t1 = std::min<Eigen::Index>(T, T - o);
    if (t1 <= t0) continue;
    const CMap Wk(params.data() + w + k * cout * cin, co, ci);
    MMap(grad.data() + w + k * cout * cin, co, ci).noalias() +=
        dy.middleRows(t0, t1 - t0).transpose() * x.middleRows(t0 + o, t1 - t0);
    dx.middleRows(t0 + o, t1 - t0).noalias() += dy.middleRows(t0, t1 - t0) * Wk;
  }
  return dx;
}

void Conv1d::init(Vec& params, Rng& rng) const {
  const double fan_in = static_cast<double>(cin * kernel);
  fill_uniform(params, w, kernel * cout * cin, std::sqrt(2.0) * std::sqrt(3.0 / fan_in), rng);
  fill_uniform(params, b, cout, 0.0, rng);
}

MotionNorm MotionNorm::fit(std::span<const MotionDelta> samples) {
  MotionNorm n = identity();
  if (samples.empty()) return n;
  for (std::size_t f = 0; f < kMotionDim; ++f) {
    double mean = 0.0;
    for (const auto& m : samples) mean += m.to_array()[f];
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (const auto& m : samples) {
      const double d = m.to_array()[f] - mean;
      var += d * d;
    }
    var /= static_cast<double>(samples.size());
    n.mean[f] = mean;
    n.scale[f] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  return n;
}

MotionNorm MotionNorm::identity() {
  MotionNorm n;
  n.mean.fill(0.0);
  n.scale.fill(1.0);
  return n;
}

Vec MotionNorm::apply(const MotionDelta& m) const {
  const auto a = m.to_array();
  Vec v(static_cast<Eigen::Index>(kMotionDim));
  for (std::size_t f = 0; f < kMotionDim; ++f) {
    v[static_cast<Eigen::Index>(f)] = (a[f] - mean[f]) / scale[f];
  }
  return v;
}

double categorical_loss(const Vec& logits, const BinTargets& target, Vec* dlogits) {
  double loss = 0.0;
  if (dlogits) dlogits->setZero(logits.size());
  for (std::size_t f = 0; f < kMotionDim; ++f) {
    const auto row = logits.segment(static_cast<Eigen::Index>(f * kBins), kBins);
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    loss += lse - row[target[f]];
    if (dlogits) {
      auto d = dlogits->segment(static_cast<Eigen::Index>(f * kBins), kBins);
      d = (row.array() - lse).exp().matrix();
      d[target[f]] -= 1.0;
    }
  }
  return loss;
}

CategoricalProbs softmax_rows(const Vec& logits) {
  CategoricalProbs p{};
  for (std::size_t f = 0; f < kMotionDim; ++f) {
    const auto row = logits.segment(static_cast<Eigen::Index>(f * kBins), kBins);
    const double mx = row.maxCoeff();
    double sum = 0.0;
    for (std::size_t b = 0; b < kBins; ++b) {
      p[f][b] = std::exp(row[static_cast<Eigen::Index>(b)] - mx);
      sum += p[f][b];
    }
    for (double& v : p[f]) v /= sum;
  }
  return p;
}

// ---- conv policy ----

ConvPolicyNet::ConvPolicyNet(std::size_t width) : width_(width) {
  conv_ = Conv1d(layout_, kMotionDim, width_, 5);
  sense_ = Dense(layout_, kSensoryDim, width_);
  hidden_ = Dense(layout_, 2 * width_, width_);
  out_ = Dense(layout_, width_, kMotionDim * kBins);
}

Vec ConvPolicyNet::init_params(Rng& rng) const {
  Vec p = Vec::Zero(static_cast<Eigen::Index>(num_params()));
  conv_.init(p, rng);
  sense_.init(p, rng, std::sqrt(2.0));
  hidden_.init(p, rng, std::sqrt(2.0));
  // zero head: the untrained policy is exactly uniform over bins
  out_.zero(p);
  return p;
}

Vec ConvPolicyNet::logits(const Vec& params, const Mat& motion, const Vec& sense) const {
  const Mat h = relu(conv_.forward(params, motion));
  const auto C = static_cast<Eigen::Index>(width_);
  Vec u(2 * C);
  u.head(C) = h.colwise().mean().transpose();
  u.tail(C) = relu(sense_.forward(params, sense));
  const Vec z = relu(hidden_.forward(params, u));
  return out_.forward(params, z);
}

double ConvPolicyNet::loss(const Vec& params, const PolicyWindow& ex, Vec* grad) const {
  const auto C = static_cast<Eigen::Index>(width_);
  const auto last = static_cast<Eigen::Index>(ex.steps()) - 1;
  const Vec s = ex.sense.row(last).transpose();
  const Mat h = relu(conv_.forward(params, ex.motion));
  Vec u(2 * C);
  u.head(C) = h.colwise().mean().transpose();
  const Vec q = relu(sense_.forward(params, s));
  u.tail(C) = q;
  const Vec z = relu(hidden_.forward(params, u));
  const Vec lg = out_.forward(params, z);
  Vec dlg;
  const double loss = categorical_loss(lg, ex.targets.back(), grad ? &dlg : nullptr);
  if (!grad) return loss;

  const Vec dz = relu_back(z, out_.backward(params, z, dlg, *grad));
  const Vec du = hidden_.backward(params, u, dz, *grad);
  sense_.backward(params, s, relu_back(q, du.tail(C)), *grad);
  const Mat dh = du.head(C).transpose().replicate(h.rows(), 1) / static_cast<double>(h.rows());
  conv_.backward(params, ex.motion, relu_back(h, dh), *grad);
  return loss;
}

// ---- gru policy ----

GruPolicyNet::GruPolicyNet(std::size_t width) : width_(width) {
  const std::size_t in = kMotionDim + kSensoryDim;
  wz_ = Dense(layout_, in, width_);
  wr_ = Dense(layout_, in, width_);
  wn_ = Dense(layout_, in, width_);
  uz_ = Dense(layout_, width_, width_, false);
  ur_ = Dense(layout_, width_, width_, false);
  un_ = Dense(layout_, width_, width_, false);
  out_ = Dense(layout_, width_, kMotionDim * kBins);
}

Vec GruPolicyNet::init_params(Rng& rng) const {
  Vec p = Vec::Zero(static_cast<Eigen::Index>(num_params()));
  for (const Dense* d : {&wz_, &wr_, &wn_, &uz_, &ur_, &un_}) d->init(p, rng, 1.0);
  out_.zero(p);
  return p;
}

Vec GruPolicyNet::step_cached(const Vec& params, const Vec& h, const Vec& x, Cache& c) const {
  c.x = x;
  c.h = h;
  c.z = sigmoid(Vec(wz_.forward(params, x) + uz_.forward(params, h)));
  c.r = sigmoid(Vec(wr_.forward(params, x) + ur_.forward(params, h)));
  c.rh = c.r.cwiseProduct(h);
  c.n = (wn_.forward(params, x) + un_.forward(params, c.rh)).array().tanh().matrix();
  return (Vec::Ones(h.size()) - c.z).cwiseProduct(h) + c.z.cwiseProduct(c.n);
}

Vec GruPolicyNet::step(const Vec& params, const Vec& h, const Vec& input) const {
  Cache c;
  return step_cached(params, h, input, c);
}

Vec GruPolicyNet::logits(const Vec& params, const Vec& h) const { return out_.forward(params, h); }

double GruPolicyNet::loss(const Vec& params, const PolicyWindow& ex, Vec* grad) const {
  const std::size_t T = ex.steps();
  const auto H = static_cast<Eigen::Index>(width_);
  std::vector<Cache> caches(T);
  std::vector<Vec> hs(T + 1);
  hs[0] = Vec::Zero(H);
  Vec x(static_cast<Eigen::Index>(kMotionDim + kSensoryDim));
  double total = 0.0;
  std::vector<Vec> dlogits(T);
  for (std::size_t k = 0; k < T; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    x.head(kMotionDim) = ex.motion.row(row).transpose();
    x.tail(kSensoryDim) = ex.sense.row(row).transpose();
    hs[k + 1] = step_cached(params, hs[k], x, caches[k]);
    const Vec lg = out_.forward(params, hs[k + 1]);
    total += categorical_loss(lg, ex.targets[k], grad ? &dlogits[k] : nullptr);
  }
  const double inv_t = 1.0 / static_cast<double>(T);
  if (!grad) return total * inv_t;

  Vec dh_next = Vec::Zero(H);
  for (std::size_t k = T; k-- > 0;) {
    const Cache& c = caches[k];
    Vec dh = out_.backward(params, hs[k + 1], Vec(dlogits[k] * inv_t), *grad) + dh_next;
    const Vec dz = dh.cwiseProduct(c.n - c.h);
    const Vec dn = dh.cwiseProduct(c.z);
    Vec dprev = dh.cwiseProduct(Vec::Ones(H) - c.z);
    const Vec dan = dn.cwiseProduct((1.0 - c.n.array().square()).matrix());
    wn_.backward(params, c.x, dan, *grad);
    const Vec drh = un_.backward(params, c.rh, dan, *grad);
    const Vec dr = drh.cwiseProduct(c.h);
    dprev += drh.cwiseProduct(c.r);
    const Vec daz = dz.array() * c.z.array() * (1.0 - c.z.array());
    wz_.backward(params, c.x, daz, *grad);
    dprev += uz_.backward(params, c.h, daz, *grad);
    const Vec dar = dr.array() * c.r.array() * (1.0 - c.r.array());
    wr_.backward(params, c.x, dar, *grad);
    dprev += ur_.backward(params, c.h, dar, *grad);
    dh_next = dprev;
  }
  return total * inv_t;
}

// ---- discriminators ----

double DiscNet::decision_value(const Vec& params, const Mat& input) const {
  const double s = score(params, input);
  return loss_ == DiscLoss::least_squares ? s : sigmoid(s);
}

double DiscNet::loss(const Vec& params, const DiscExample& ex, Vec* grad) const {
  const double s = score(params, ex.input);
  double loss = 0.0;
  double ds = 0.0;
  if (loss_ == DiscLoss::least_squares) {
    const double target = ex.label == 1 ? 1.0 : 0.0;
    loss = (s - target) * (s - target);
    ds = 2.0 * (s - target);
  } else {
    loss = ex.label == 1 ? softplus(-s) : softplus(s);
    ds = sigmoid(s) - (ex.label == 1 ? 1.0 : 0.0);
  }
  if (grad) backward(params, ex.input, ds, *grad);
  return loss;
}

ConvDiscNet::ConvDiscNet(std::size_t channels, std::size_t f1, std::size_t f2, std::size_t hidden) {
  c1_ = Conv1d(layout_, channels, f1, 5);
  c2_ = Conv1d(layout_, f1, f2, 5);
  d1_ = Dense(layout_, f2, hidden);
  d2_ = Dense(layout_, hidden, 1);
}

Vec ConvDiscNet::init_params(Rng& rng) const {
  Vec p = Vec::Zero(static_cast<Eigen::Index>(num_params()));
  c1_.init(p, rng);
  c2_.init(p, rng);
  d1_.init(p, rng, std::sqrt(2.0));
  d2_.init(p, rng, 1.0);
  return p;
}

double ConvDiscNet::score(const Vec& params, const Mat& input) const {
  const Mat a1 = relu(c1_.forward(params, input));
  const Mat a2 = relu(c2_.forward(params, a1));
  const Vec g = a2.colwise().mean().transpose();
  const Vec a3 = relu(d1_.forward(params, g));
  return d2_.forward(params, a3)[0];
}

void ConvDiscNet::backward(const Vec& params, const Mat& input, double dscore, Vec& grad) const {
  const Mat a1 = relu(c1_.forward(params, input));
  const Mat a2 = relu(c2_.forward(params, a1));
  const Vec g = a2.colwise().mean().transpose();
  const Vec a3 = relu(d1_.forward(params, g));
  Vec ds(1);
  ds[0] = dscore;
  const Vec da3 = relu_back(a3, d2_.backward(params, a3, ds, grad));
  const Vec dg = d1_.backward(params, g, da3, grad);
  const Mat da2 = dg.transpose().replicate(a2.rows(), 1) / static_cast<double>(a2.rows());
  const Mat da1 = relu_back(a1, c2_.backward(params, a1, relu_back(a2, da2), grad));
  c1_.backward(params, input, da1, grad);
}

MlpDiscNet::MlpDiscNet(std::size_t features, std::size_t hidden) {
  d1_ = Dense(layout_, features, hidden);
  d2_ = Dense(layout_, hidden, hidden);
  d3_ = Dense(layout_, hidden, 1);
}

Vec MlpDiscNet::init_params(Rng& rng) const {
  Vec p = Vec::Zero(static_cast<Eigen::Index>(num_params()));
  d1_.init(p, rng, std::sqrt(2.0));
  d2_.init(p, rng, std::sqrt(2.0));
  d3_.init(p, rng, 1.0);
  return p;
}

double MlpDiscNet::score(const Vec& params, const Mat& input) const {
  const Vec x = input.row(0).transpose();
  const Vec a1 = relu(d1_.forward(params, x));
  const Vec a2 = relu(d2_.forward(params, a1));
  return d3_.forward(params, a2)[0];
}

void MlpDiscNet::backward(const Vec& params, const Mat& input, double dscore, Vec& grad) const {
  const Vec x = input.row(0).transpose();
  const Vec a1 = relu(d1_.forward(params, x));
  const Vec a2 = relu(d2_.forward(params, a1));
  Vec ds(1);
  ds[0] = dscore;
  const Vec da2 = relu_back(a2, d3_.backward(params, a2, ds, grad));
  const Vec da1 = relu_back(a1, d2_.backward(params, a1, da2, grad));
  d1_.backward(params, x, da1, grad);
}

double relative_error(const Vec& a, const Vec& b) {
  const double denom = a.norm() + b.norm();
  if (denom < 1e-300) return 0.0;
  return (a - b).norm() / denom;
}

}  // namespace flyeval::nn
