// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#include "flyeval/report.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "flyeval/errors.hpp"
#include "flyeval/textio.hpp"

namespace flyeval {

void MetricReport::add(std::string model, std::string metric, double value, std::size_t count, std::string note) {
  if (count == 0) throw DataError("metric row " + model + "/" + metric + " has no samples");
  rows.push_back({std::move(model), std::move(metric), value, count, std::move(note)});
}

const MetricRow* MetricReport::find(const std::string& model, const std::string& metric) const {
  for (const MetricRow& r : rows) {
    if (r.model == model && r.metric == metric) return &r;
  }
  return nullptr;
}

std::vector<std::string> MetricReport::models() const {
  std::vector<std::string> out;
  for (const MetricRow& r : rows) {
    if (std::find(out.begin(), out.end(), r.model) == out.end()) out.push_back(r.model);
  }
  return out;
}

std::string serialize_report(const MetricReport& r) {
  std::ostringstream out;
  out << "FLYREPORT 1\n";
  for (const auto& [k, v] : r.provenance) out << "provenance " << textio::escape(k) << ' ' << textio::escape(v) << '\n';
  out << "columns model metric value count note\n";
  for (const MetricRow& row : r.rows) {
    out << textio::escape(row.model) << ' ' << textio::escape(row.metric) << ' ' << textio::format_double(row.value)
        << ' ' << row.count << ' ' << textio::escape(row.note) << '\n';
  }
  return out.str();
}

MetricReport parse_report(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) { throw DataError("report line " + std::to_string(lineno) + ": " + msg); };
  if (!std::getline(in, line) || line != "FLYREPORT 1") throw DataError("not a FLYREPORT v1 file");
  ++lineno;
  MetricReport r;
  bool in_rows = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = textio::split_ws(line);
    if (tok.empty()) continue;
    if (!in_rows) {
      if (tok[0] == "provenance") {
        if (tok.size() != 3) fail("provenance needs a key and a value");
        r.provenance[textio::unescape(tok[1])] = textio::unescape(tok[2]);
      } else if (tok[0] == "columns") {
        in_rows = true;
      } else {
        fail("unexpected header record");
      }
      continue;
    }
    if (tok.size() != 5) fail("expected 5 fields");
    MetricRow row;
    row.model = textio::unescape(tok[0]);
    row.metric = textio::unescape(tok[1]);
    row.value = textio::parse_double(tok[2]);
    row.count = static_cast<std::size_t>(textio::parse_int(tok[3]));
    row.note = textio::unescape(tok[4]);
    r.rows.push_back(std::move(row));
  }
  if (!in_rows) throw DataError("report has no columns record");
  return r;
}

std::string render_report(const MetricReport& r) {
  const auto models = r.models();
  std::vector<std::string> metrics = kReportMetrics;
  for (const MetricRow& row : r.rows) {
    if (std::find(metrics.begin(), metrics.end(), row.metric) == metrics.end()) metrics.push_back(row.metric);
  }
  std::ostringstream out;
  out << std::left << std::setw(20) << "metric";
  for (const auto& m : models) out << std::setw(14) << m;
  out << '\n';
  for (const auto& metric : metrics) {
    bool any = false;
    for (const auto& m : models) any = any || r.find(m, metric);
    if (!any) continue;
    out << std::setw(20) << metric;
    for (const auto& m : models) {
      const MetricRow* row = r.find(m, metric);
      std::ostringstream cell;
      if (row) {
        cell << std::setprecision(4) << row->value;
        if (!row->note.empty()) cell << '*';
      } else {
        cell << '-';
      }
      out << std::setw(14) << cell.str();
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace flyeval
