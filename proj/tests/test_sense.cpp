// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "flyeval/errors.hpp"
#include "flyeval/sense.hpp"

using namespace flyeval;
using test::pose;

TEST_CASE("vision falls off with the square root of distance") {
  CHECK(f_vision(1.0) == 1.0);
  CHECK(f_vision(0.2) == 1.0);
  CHECK(f_vision(101.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(f_vision(401.0) == 0.0);
  CHECK(f_vision(1e6) == 0.0);
}

TEST_CASE("chamber proximity is clamped to [0, 1]") {
  CHECK(f_chamber(kChamberOffset) == 0.0);
  CHECK(f_chamber(kChamberOffset + 1.0 / 0.26) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f_chamber(0.0) == 0.0);
  CHECK(f_chamber(100.0) == 1.0);
  CHECK(f_chamber(5.0) == doctest::Approx(0.26 * (5.0 - kChamberOffset)));
}

TEST_CASE("sector indexing covers the circle") {
  CHECK(sector_of(0.0) == kSectors / 2);
  CHECK(sector_of(-std::numbers::pi + 1e-9) == 0);
  CHECK(sector_of(std::numbers::pi - 1e-9) == kSectors - 1);
  // pi and -pi name the same direction and share sector 0
  CHECK(sector_of(std::numbers::pi) == 0);
}

TEST_CASE("one fly dead ahead lights exactly one sector") {
  const Arena arena{20.0};
  const std::vector<Pose> others{pose(1, 0)};
  const SensoryFrame s = sense_frame(pose(0, 0, 0), others, arena);
  for (std::size_t k = 0; k < kSectors; ++k) {
    CHECK(s.vision[k] == (k == sector_of(0.0) ? 1.0 : 0.0));
  }
}

TEST_CASE("the nearest fly in a sector wins") {
  const Arena arena{1000.0};
  const std::vector<Pose> others{pose(401, 0), pose(101, 0)};
  const SensoryFrame s = sense_frame(pose(0, 0, 0), others, arena);
  CHECK(s.vision[sector_of(0.0)] == doctest::Approx(0.5));
}

TEST_CASE("bearings are egocentric") {
  const Arena arena{20.0};
  const std::vector<Pose> others{pose(0, 3)};
  const SensoryFrame s = sense_frame(pose(0, 0, std::numbers::pi / 2), others, arena);
  CHECK(s.vision[sector_of(0.0)] > 0.0);
}

TEST_CASE("wall senses are symmetric at the arena center") {
  const Arena arena{5.0};
  const SensoryFrame s = sense_frame(pose(0, 0, 0.7), {}, arena);
  for (double w : s.wall) CHECK(w == doctest::Approx(f_chamber(5.0)));
}

TEST_CASE("sensing from outside the arena is an error") {
  CHECK_THROWS_AS(sense_frame(pose(30, 0), {}, Arena{20.0}), DataError);
}

namespace {

std::vector<MotionDelta> uniform_samples(std::size_t n, Rng& rng) {
  std::vector<MotionDelta> v(n);
  for (auto& m : v) {
    std::array<double, kMotionDim> a{};
    for (double& x : a) x = rng.uniform();
    m = MotionDelta::from_array(a);
  }
  return v;
}

}  // namespace

TEST_CASE("quantile edges of uniform data sit near k/51") {
  Rng rng(3);
  const std::size_t n = 20000;
  const auto samples = uniform_samples(n, rng);
  const BinCodec c = fit_bins(samples, "uniform");
  const double tol = 2.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t f = 0; f < kMotionDim; ++f) {
    for (std::size_t k = 1; k < kBins; ++k) {
      CHECK(std::abs(c.edges(f)[k] - static_cast<double>(k) / kBins) <= tol);
    }
  }
  std::array<std::size_t, kBins> counts{};
  for (const auto& m : samples) counts[c.encode(0, m.fwd)]++;
  for (std::size_t k = 0; k < kBins; ++k) {
    CHECK(std::abs(static_cast<double>(counts[k]) / n - 1.0 / kBins) <= tol);
  }
}

TEST_CASE("a constant feature gets widened bins") {
  Rng rng(3);
  auto samples = uniform_samples(kMinBinSamples, rng);
  for (auto& m : samples) m.major = 2.5;
  const BinCodec c = fit_bins(samples, "const");
  const auto& e = c.edges(3);
  for (std::size_t k = 0; k < kBins; ++k) CHECK(e[k] < e[k + 1]);
  CHECK(e.front() < 2.5);
  CHECK(e.back() > 2.5);
}

TEST_CASE("fit_bins rejects too few samples") {
  Rng rng(3);
  const auto samples = uniform_samples(kMinBinSamples - 1, rng);
  CHECK_THROWS_AS(fit_bins(samples, "short"), DataError);
}

TEST_CASE("encode clips to the edge bins") {
  Rng rng(5);
  const BinCodec c = fit_bins(uniform_samples(2000, rng), "u");
  CHECK(c.encode(0, -5.0) == 0);
  CHECK(c.encode(0, 5.0) == kBins - 1);
  CHECK(BinCodec::parse(c.serialize()) == c);
  CHECK(BinCodec::parse(c.serialize()).hash() == c.hash());
}

TEST_CASE("one-hot distributions sample inside their bin") {
  Rng rng(5);
  const BinCodec c = fit_bins(uniform_samples(2000, rng), "u");
  for (std::size_t k : {0u, 7u, 25u, 50u}) {
    std::array<std::array<double, kBins>, kMotionDim> probs{};
    for (auto& row : probs) row[k] = 1.0;
    for (int i = 0; i < 200; ++i) {
      const auto v = sample_categorical(probs, c, rng).to_array();
      for (std::size_t f = 0; f < kMotionDim; ++f) {
        CHECK(v[f] >= c.edges(f)[k]);
        CHECK(v[f] <= c.edges(f)[k + 1]);
      }
    }
  }
}

TEST_CASE("uniform categorical sampling matches the binomial bound") {
  Rng rng(5);
  const BinCodec c = fit_bins(uniform_samples(5000, rng), "u");
  std::array<std::array<double, kBins>, kMotionDim> probs{};
  for (auto& row : probs) row.fill(1.0 / kBins);
  const std::size_t n = 100000;
  std::array<std::size_t, kBins> counts{};
  for (std::size_t i = 0; i < n; ++i) counts[c.encode(0, sample_categorical(probs, c, rng).fwd)]++;
  const double p = 1.0 / kBins;
  const double sd = std::sqrt(p * (1 - p) / static_cast<double>(n));
  // z = 4.1 holds the family-wise false-alarm rate over all 51 bins near 1e-3
  const double z = 4.1;
  for (std::size_t k = 0; k < kBins; ++k) CHECK(std::abs(static_cast<double>(counts[k]) / n - p) <= z * sd);
}

TEST_CASE("unnormalized rows are rejected") {
  Rng rng(5);
  const BinCodec c = fit_bins(uniform_samples(1000, rng), "u");
  std::array<std::array<double, kBins>, kMotionDim> probs{};
  CHECK_THROWS_AS(sample_categorical(probs, c, rng), DataError);
}

TEST_CASE("behavior statistics of simple fixtures") {
  SUBCASE("stationary fly has zero speed") {
    const Dataset d = test::dataset({std::vector<Pose>(5, pose(1, 1))});
    const auto s = behavior_stats(d);
    REQUIRE(s.size() == 4);
    for (const auto& b : s) {
      CHECK(b.speed == 0.0);
      CHECK_FALSE(b.inter_distance.has_value());
    }
  }
  SUBCASE("wall distance at the center equals the radius") {
    const Dataset d = test::dataset({std::vector<Pose>(3, pose(0, 0))}, 26.7);
    for (const auto& b : behavior_stats(d)) CHECK(b.wall_distance == doctest::Approx(26.7));
  }
  SUBCASE("inter-animal distance is symmetric") {
    const Dataset d = test::dataset({std::vector<Pose>(3, pose(0, 0)), std::vector<Pose>(3, pose(3, 4))});
    for (const auto& b : behavior_stats(d)) CHECK(*b.inter_distance == doctest::Approx(5.0));
  }
  SUBCASE("speed is per-second displacement") {
    const Dataset d = test::dataset({{pose(0, 0), pose(0.1, 0)}});
    const auto s = behavior_stats(d);
    REQUIRE(s.size() == 1);
    CHECK(s[0].speed == doctest::Approx(3.0));
  }
}
