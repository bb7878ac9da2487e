// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace flyeval {

/// Canonical metric ids, in display order.
inline const std::vector<std::string> kReportMetrics = {
    "nll", "1-step", "30-step", "rvf", "chase",
    "hd-speed", "hd-inter_distance", "hd-wall_distance", "hd-angular_motion", "hd-wing_angle"};

struct MetricRow {
  std::string model;
  std::string metric;
  double value = 0.0;
  std::size_t count = 0;
  std::string note;  // e.g. "infinite" for boundary chase errors
};

struct MetricReport {
  std::vector<MetricRow> rows;
  std::map<std::string, std::string> provenance;

  void add(std::string model, std::string metric, double value, std::size_t count, std::string note = {});
  const MetricRow* find(const std::string& model, const std::string& metric) const;
  /// Models in first-appearance order.
  std::vector<std::string> models() const;
};

/// Versioned whitespace-separated table: FLYREPORT 1, provenance lines, then
/// one row per (model, metric).
std::string serialize_report(const MetricReport& r);
MetricReport parse_report(const std::string& text);

/// Metrics down, models across.
std::string render_report(const MetricReport& r);

}  // namespace flyeval
