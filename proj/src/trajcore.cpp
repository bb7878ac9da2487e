// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#include "flyeval/trajcore.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "flyeval/errors.hpp"
#include "flyeval/textio.hpp"

namespace flyeval {

namespace {

constexpr double kPi = std::numbers::pi;

constexpr std::array<const char*, 12> kColumns = {
    "agent_id", "sex",          "frame",        "valid",      "x",          "y",
    "theta",    "major",        "wing_angle_l", "wing_angle_r", "wing_len_l", "wing_len_r"};

}  // namespace

double wrap_angle(double a) noexcept {
  if (a > -kPi && a <= kPi) return a;
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  if (r > kPi) r -= 2.0 * kPi;
  return r;
}

std::string to_string(Sex s) { return s == Sex::male ? "male" : "female"; }

Sex parse_sex(const std::string& s) {
  if (s == "male") return Sex::male;
  if (s == "female") return Sex::female;
  throw DataError("unknown sex '" + s + "'");
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  throw DataError("unknown split '" + s + "'");
}

std::array<double, kMotionDim> MotionDelta::to_array() const noexcept {
  return {fwd, side, dtheta, major, wing_angle_l, wing_angle_r, wing_len_l, wing_len_r};
}

MotionDelta MotionDelta::from_array(const std::array<double, kMotionDim>& a) noexcept {
  return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7]};
}

MotionDelta hold_motion(const Pose& p) noexcept {
  return {0.0, 0.0, 0.0, p.major, p.wing_angle_l, p.wing_angle_r, p.wing_len_l, p.wing_len_r};
}

void validate_pose(const Pose& p, int agent_id, std::size_t frame) {
  const std::array<std::pair<const char*, double>, 8> fields = {{{"x", p.x},
                                                                  {"y", p.y},
                                                                  {"theta", p.theta},
                                                                  {"major", p.major},
                                                                  {"wing_angle_l", p.wing_angle_l},
                                                                  {"wing_angle_r", p.wing_angle_r},
                                                                  {"wing_len_l", p.wing_len_l},
                                                                  {"wing_len_r", p.wing_len_r}}};
  for (const auto& [name, v] : fields) {
    if (!std::isfinite(v)) throw InvariantError(agent_id, frame, name, "not finite");
  }
  if (!(p.major > 0.0)) throw InvariantError(agent_id, frame, "major", "must be > 0");
  if (p.wing_len_l < 0.0) throw InvariantError(agent_id, frame, "wing_len_l", "must be >= 0");
  if (p.wing_len_r < 0.0) throw InvariantError(agent_id, frame, "wing_len_r", "must be >= 0");
  if (!(p.theta > -kPi && p.theta <= kPi)) {
    throw InvariantError(agent_id, frame, "theta", "outside (-pi, pi]");
  }
}

void validate_dataset(const Dataset& d) {
  if (!(d.arena.radius > 0.0)) throw DataError("arena radius must be > 0");
  if (d.trajectories.empty()) throw DataError("dataset has no agents");
  const std::size_t n = d.trajectories.front().size();
  const double fps = d.trajectories.front().fps;
  for (const auto& t : d.trajectories) {
    if (t.poses.size() != t.valid.size()) {
      throw DataError("agent " + std::to_string(t.agent_id) + ": poses/valid length mismatch");
    }
    if (t.size() != n) throw DataError("trajectories differ in length");
    if (t.fps != fps || !(fps > 0.0)) throw DataError("trajectories differ in fps");
    for (std::size_t f = 0; f < t.size(); ++f) {
      if (t.valid[f]) validate_pose(t.poses[f], t.agent_id, f);
    }
  }
}

MotionDelta extract_motion(const Pose& prev, const Pose& next) noexcept {
  const double dx = next.x - prev.x;
  const double dy = next.y - prev.y;
  const double c = std::cos(prev.theta);
  const double s = std::sin(prev.theta);
  MotionDelta m;
  m.fwd = dx * c + dy * s;
  m.side = -dx * s + dy * c;
  m.dtheta = wrap_angle(next.theta - prev.theta);
  m.major = next.major;
  m.wing_angle_l = next.wing_angle_l;
  m.wing_angle_r = next.wing_angle_r;
  m.wing_len_l = next.wing_len_l;
  m.wing_len_r = next.wing_len_r;
  return m;
}

Pose apply_motion(const Pose& prev, const MotionDelta& m) noexcept {
  const double c = std::cos(prev.theta);
  const double s = std::sin(prev.theta);
  Pose p;
  p.x = prev.x + m.fwd * c - m.side * s;
  p.y = prev.y + m.fwd * s + m.side * c;
  p.theta = wrap_angle(prev.theta + m.dtheta);
  p.major = m.major;
  p.wing_angle_l = m.wing_angle_l;
  p.wing_angle_r = m.wing_angle_r;
  p.wing_len_l = m.wing_len_l;
  p.wing_len_r = m.wing_len_r;
  return p;
}

std::string serialize_dataset(const Dataset& d) {
  using textio::format_double;
  std::ostringstream out;
  out << "FLYTRAJ " << kTrajFormatVersion << '\n';
  out << "fps " << format_double(d.fps()) << '\n';
  out << "arena_radius_mm " << format_double(d.arena.radius) << '\n';
  out << "genotype_label " << textio::escape(d.genotype_label) << '\n';
  out << "split " << to_string(d.split) << '\n';
  out << "n_agents " << d.n_agents() << '\n';
  out << "n_frames " << d.n_frames() << '\n';
  for (const auto& [k, v] : d.provenance) {
    out << "provenance " << textio::escape(k) << ' ' << textio::escape(v) << '\n';
  }
  out << "columns";
  for (const char* c : kColumns) out << ' ' << c;
  out << '\n';
  for (const auto& t : d.trajectories) {
    for (std::size_t f = 0; f < t.size(); ++f) {
      const Pose& p = t.poses[f];
      out << t.agent_id << ' ' << to_string(t.sex) << ' ' << f << ' ' << (t.valid[f] ? 1 : 0)
          << ' ' << format_double(p.x) << ' ' << format_double(p.y) << ' '
          << format_double(p.theta) << ' ' << format_double(p.major) << ' '
          << format_double(p.wing_angle_l) << ' ' << format_double(p.wing_angle_r) << ' '
          << format_double(p.wing_len_l) << ' ' << format_double(p.wing_len_r) << '\n';
    }
  }
  return out.str();
}

Dataset parse_dataset(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> DataError {
    return DataError("line " + std::to_string(line_no) + ": " + msg);
  };

  if (!std::getline(in, line)) throw DataError("empty trajectory file");
  ++line_no;
  {
    auto tok = textio::split_ws(line);
    if (tok.size() != 2 || tok[0] != "FLYTRAJ") throw fail("missing FLYTRAJ header");
    if (textio::parse_int(tok[1]) != kTrajFormatVersion) throw fail("unsupported format version");
  }

  Dataset d;
  double fps = -1.0;
  long long n_agents = -1;
  long long n_frames = -1;
  bool have_radius = false;
  std::array<int, kColumns.size()> col_of{};
  col_of.fill(-1);
  bool have_columns = false;

  while (!have_columns && std::getline(in, line)) {
    ++line_no;
    auto tok = textio::split_ws(line);
    if (tok.empty()) continue;
    try {
      if (tok[0] == "columns") {
        if (tok.size() != kColumns.size() + 1) throw fail("columns record must name 12 fields");
        for (std::size_t i = 1; i < tok.size(); ++i) {
          bool found = false;
          for (std::size_t c = 0; c < kColumns.size(); ++c) {
            if (tok[i] == kColumns[c]) {
              if (col_of[c] != -1) throw fail("duplicate column");
              col_of[c] = static_cast<int>(i - 1);
              found = true;
            }
          }
          if (!found) throw fail("unknown column '" + std::string(tok[i]) + "'");
        }
        have_columns = true;
      } else if (tok[0] == "provenance") {
        if (tok.size() != 3) throw fail("provenance record needs key and value");
        d.provenance[textio::unescape(tok[1])] = textio::unescape(tok[2]);
      } else if (tok.size() != 2) {
        throw fail("header record needs exactly one value");
      } else if (tok[0] == "fps") {
        fps = textio::parse_double(tok[1]);
      } else if (tok[0] == "arena_radius_mm") {
        d.arena.radius = textio::parse_double(tok[1]);
        have_radius = true;
      } else if (tok[0] == "genotype_label") {
        d.genotype_label = textio::unescape(tok[1]);
      } else if (tok[0] == "split") {
        d.split = parse_split(std::string(tok[1]));
      } else if (tok[0] == "n_agents") {
        n_agents = textio::parse_int(tok[1]);
      } else if (tok[0] == "n_frames") {
        n_frames = textio::parse_int(tok[1]);
      } else {
        throw fail("unknown header key '" + std::string(tok[0]) + "'");
      }
    } catch (const InvariantError&) {
      throw;
    } catch (const DataError& e) {
      const std::string msg = e.what();
      if (msg.rfind("line ", 0) == 0) throw;
      throw fail(msg);
    }
  }
  if (!have_columns) throw DataError("missing columns record");
  if (!(fps > 0.0) || !have_radius || n_agents < 1 || n_frames < 0) {
    throw DataError("incomplete header (fps, arena_radius_mm, n_agents, n_frames required)");
  }

  d.trajectories.reserve(static_cast<std::size_t>(n_agents));
  std::map<int, std::size_t> index_of;
  std::vector<std::vector<bool>> seen;
  const auto nf = static_cast<std::size_t>(n_frames);

  while (std::getline(in, line)) {
    ++line_no;
    auto tok = textio::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != kColumns.size()) throw fail("record must have 12 fields");
    auto field = [&](std::size_t c) { return tok[static_cast<std::size_t>(col_of[c])]; };
    try {
      const int agent_id = static_cast<int>(textio::parse_int(field(0)));
      const Sex sex = parse_sex(std::string(field(1)));
      const long long frame_ll = textio::parse_int(field(2));
      if (frame_ll < 0 || static_cast<std::size_t>(frame_ll) >= nf) throw fail("frame out of range");
      const auto frame = static_cast<std::size_t>(frame_ll);
      const long long valid = textio::parse_int(field(3));
      if (valid != 0 && valid != 1) throw fail("valid must be 0 or 1");

      auto it = index_of.find(agent_id);
      if (it == index_of.end()) {
        if (d.trajectories.size() == static_cast<std::size_t>(n_agents)) {
          throw fail("more agents than n_agents");
        }
        Trajectory t;
        t.agent_id = agent_id;
        t.sex = sex;
        t.fps = fps;
        t.poses.resize(nf);
        t.valid.assign(nf, false);
        d.trajectories.push_back(std::move(t));
        seen.emplace_back(nf, false);
        it = index_of.emplace(agent_id, d.trajectories.size() - 1).first;
      }
      Trajectory& t = d.trajectories[it->second];
      if (t.sex != sex) throw fail("agent changes sex");
      if (seen[it->second][frame]) throw fail("duplicate (agent, frame) record");
      seen[it->second][frame] = true;

      Pose p;
      p.x = textio::parse_double(field(4));
      p.y = textio::parse_double(field(5));
      p.theta = textio::parse_double(field(6));
      p.major = textio::parse_double(field(7));
      p.wing_angle_l = textio::parse_double(field(8));
      p.wing_angle_r = textio::parse_double(field(9));
      p.wing_len_l = textio::parse_double(field(10));
      p.wing_len_r = textio::parse_double(field(11));
      if (valid == 1) {
        if (std::isfinite(p.theta)) p.theta = wrap_angle(p.theta);
        validate_pose(p, agent_id, frame);
      }
      t.poses[frame] = p;
      t.valid[frame] = (valid == 1);
    } catch (const InvariantError&) {
      throw;
    } catch (const DataError& e) {
      const std::string msg = e.what();
      if (msg.rfind("line ", 0) == 0) throw;
      throw fail(msg);
    }
  }

  if (d.trajectories.size() != static_cast<std::size_t>(n_agents)) {
    throw DataError("expected " + std::to_string(n_agents) + " agents, found " +
                    std::to_string(d.trajectories.size()));
  }
  for (std::size_t a = 0; a < seen.size(); ++a) {
    for (std::size_t f = 0; f < nf; ++f) {
      if (!seen[a][f]) {
        throw DataError("agent " + std::to_string(d.trajectories[a].agent_id) +
                        " is missing frame " + std::to_string(f));
      }
    }
  }
  validate_dataset(d);
  return d;
}

Dataset load_dataset(const std::string& path) { return parse_dataset(textio::read_file(path)); }

void save_dataset(const Dataset& d, const std::string& path) {
  validate_dataset(d);
  textio::write_file(path, serialize_dataset(d));
}

std::string dataset_hash(const Dataset& d) {
  return textio::hex64(textio::fnv1a64(serialize_dataset(d)));
}

}  // namespace flyeval
