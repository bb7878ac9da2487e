// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flyeval/metrics.hpp"
#include "flyeval/policy.hpp"
#include "flyeval/report.hpp"
#include "flyeval/rvf.hpp"
#include "flyeval/trajcore.hpp"

namespace flyeval {

struct ModelEntry {
  std::string name;
  std::shared_ptr<const Policy> male;
  std::shared_ptr<const Policy> female;
};

struct EvaluateConfig {
  std::vector<std::string> metrics;  // empty: every metric in kReportMetrics
  std::size_t long_n = 30;
  std::size_t samples = 1;  // m in the n-step m-sample error
  std::size_t stride = 0;
  std::size_t sim_start = kDefaultWindow;
  std::optional<std::size_t> sim_horizon;  // default: to the end of the recording
  DiscConfig disc{};
  WindowSetConfig windows{};
  ChaseParams chase{};
  std::uint64_t seed = 0;
  bool baselines = true;  // adds HALT and CONST rows

  bool wants(const std::string& metric) const;
};

/// One row per (model, metric). `reference`, when given, is a second recording
/// of the same population and yields the TRAIN-DATA distribution rows.
MetricReport evaluate(const Dataset& test, const Dataset* reference, std::span<const ModelEntry> models,
                      const EvaluateConfig& cfg);

/// Frames [start, start + length) of every agent.
Dataset slice_frames(const Dataset& d, std::size_t start, std::size_t length);

}  // namespace flyeval
