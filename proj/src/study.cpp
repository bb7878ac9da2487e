// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#include "flyeval/study.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>

#include "httplib.h"

#include "flyeval/errors.hpp"
#include "flyeval/rng.hpp"
#include "flyeval/sim.hpp"
#include "flyeval/textio.hpp"

namespace flyeval {

using nlohmann::json;

std::string to_string(Protocol p) { return p == Protocol::loo_one_test_fly ? "one-test-fly" : "all-same"; }

Protocol parse_protocol(const std::string& s) {
  if (s == "one-test-fly") return Protocol::loo_one_test_fly;
  if (s == "all-same") return Protocol::all_same;
  throw DataError("unknown study protocol '" + s + "'");
}

namespace {

Dataset slice(const Dataset& d, std::size_t start, std::size_t length) {
  Dataset out;
  out.arena = d.arena;
  for (const Trajectory& t : d.trajectories) {
    Trajectory s;
    s.agent_id = t.agent_id;
    s.sex = t.sex;
    s.fps = t.fps;
    s.poses.assign(t.poses.begin() + static_cast<std::ptrdiff_t>(start),
                   t.poses.begin() + static_cast<std::ptrdiff_t>(start + length));
    s.valid.assign(t.valid.begin() + static_cast<std::ptrdiff_t>(start),
                   t.valid.begin() + static_cast<std::ptrdiff_t>(start + length));
    out.trajectories.push_back(std::move(s));
  }
  return out;
}

// Everything that could identify the source is reset.
std::string blinded_text(Dataset d) {
  d.provenance.clear();
  d.genotype_label = "clip";
  d.split = Split::test;
  return serialize_dataset(d);
}

struct Pending {
  Protocol protocol;
  std::size_t length;
  bool real;
  const ModelSpec* model;
};

}  // namespace

ClipPool generate_clip_pool(const Dataset& real, std::span<const ModelSpec> models, const PoolConfig& cfg) {
  if (cfg.lengths.empty()) throw DataError("clip pool needs at least one clip length");
  if (!(cfg.loo_fraction >= 0.0 && cfg.loo_fraction <= 1.0)) throw DataError("loo_fraction must be in [0, 1]");
  std::size_t longest = 0;
  for (std::size_t l : cfg.lengths) {
    if (l < 2) throw DataError("clip lengths must be >= 2 frames");
    longest = std::max(longest, l);
  }
  if (cfg.min_start + longest > real.n_frames()) {
    throw DataError("requested clip length " + std::to_string(longest) + " exceeds the recording (" +
                    std::to_string(real.n_frames()) + " frames, " + std::to_string(cfg.min_start) +
                    " reserved for history)");
  }

  std::vector<Pending> plan;
  auto add_class = [&](std::size_t n, bool is_real, const ModelSpec* m) {
    const auto n_loo = static_cast<std::size_t>(std::llround(cfg.loo_fraction * static_cast<double>(n)));
    for (std::size_t i = 0; i < n; ++i) {
      plan.push_back({i < n_loo ? Protocol::loo_one_test_fly : Protocol::all_same, cfg.lengths[i % cfg.lengths.size()],
                      is_real, m});
    }
  };
  add_class(cfg.n_real, true, nullptr);
  for (const ModelSpec& m : models) add_class(cfg.n_fake_per_model, false, &m);
  for (const Pending& p : plan) {
    if (p.protocol == Protocol::loo_one_test_fly && real.n_agents() != kLooAgents) {
      throw DataError("the one-test-fly protocol needs exactly 20 agents, dataset has " +
                      std::to_string(real.n_agents()));
    }
  }

  Rng rng(cfg.seed);
  ClipPool pool;
  pool.seed = cfg.seed;
  for (const Pending& p : plan) {
    Clip c;
    c.protocol = p.protocol;
    c.length = p.length;
    c.real = p.real;
    const std::size_t span = real.n_frames() - p.length - cfg.min_start + 1;
    Dataset data;
    bool made = false;
    for (int attempt = 0; attempt < 100 && !made; ++attempt) {
      c.start_frame = cfg.min_start + rng.index(span);
      c.test_agent = p.protocol == Protocol::loo_one_test_fly ? static_cast<int>(rng.index(real.n_agents())) : -1;
      if (p.real) {
        data = slice(real, c.start_frame, c.length);
        made = true;
        continue;
      }
      c.model = p.model->name;
      SimConfig sc;
      sc.start = c.start_frame;
      sc.horizon = c.length - 1;
      sc.seed = rng.next();
      sc.male_policy = p.model->male;
      sc.female_policy = p.model->female;
      sc.mode = p.protocol == Protocol::loo_one_test_fly ? SimMode::loo : SimMode::smsf;
      if (sc.mode == SimMode::loo) sc.loo_agent = static_cast<std::size_t>(c.test_agent);
      bool startable = true;
      for (std::size_t a = 0; a < real.n_agents(); ++a) {
        if (sc.simulates(real, a) && !real.trajectories[a].valid[sc.start]) startable = false;
      }
      if (!startable) continue;  // a simulated agent is masked at this start; draw another
      data = rollout(real, sc);
      made = true;
    }
    if (!made) throw DataError("could not find a usable start frame for a clip of model " + c.model);
    c.trajectory = blinded_text(std::move(data));
    pool.clips.push_back(std::move(c));
  }
  for (std::size_t i = pool.clips.size(); i > 1; --i) std::swap(pool.clips[i - 1], pool.clips[rng.index(i)]);
  for (std::size_t i = 0; i < pool.clips.size(); ++i) {
    std::ostringstream id;
    id << "clip-" << i;
    pool.clips[i].id = id.str();
  }
  return pool;
}

json pool_to_json(const ClipPool& pool) {
  json clips = json::array();
  for (const Clip& c : pool.clips) {
    clips.push_back({{"id", c.id},
                     {"protocol", to_string(c.protocol)},
                     {"length", c.length},
                     {"truth", {{"real", c.real}, {"model", c.model}}},
                     {"test_agent", c.test_agent},
                     {"start_frame", c.start_frame},
                     {"trajectory", c.trajectory}});
  }
  return {{"format", "flyeval-clip-pool"}, {"version", 1}, {"seed", pool.seed}, {"clips", clips}};
}

ClipPool pool_from_json(const json& j) {
  try {
    if (j.at("format") != "flyeval-clip-pool" || j.at("version") != 1) throw DataError("not a v1 clip pool");
    ClipPool pool;
    pool.seed = j.at("seed").get<std::uint64_t>();
    for (const json& c : j.at("clips")) {
      Clip clip;
      clip.id = c.at("id").get<std::string>();
      clip.protocol = parse_protocol(c.at("protocol").get<std::string>());
      clip.length = c.at("length").get<std::size_t>();
      clip.real = c.at("truth").at("real").get<bool>();
      clip.model = c.at("truth").at("model").get<std::string>();
      clip.test_agent = c.at("test_agent").get<int>();
      clip.start_frame = c.at("start_frame").get<std::size_t>();
      clip.trajectory = c.at("trajectory").get<std::string>();
      pool.clips.push_back(std::move(clip));
    }
    return pool;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed clip pool: ") + e.what());
  }
}

void save_pool(const ClipPool& pool, const std::string& path) { textio::write_file(path, pool_to_json(pool).dump(1) + "\n"); }

ClipPool load_pool(const std::string& path) {
  try {
    return pool_from_json(json::parse(textio::read_file(path)));
  } catch (const json::parse_error& e) {
    throw DataError("clip pool " + path + " is not valid JSON: " + e.what());
  }
}

json clip_payload(const Clip& c) {
  const Dataset d = parse_dataset(c.trajectory);
  return {{"schema_version", kPayloadSchemaVersion},
          {"id", c.id},
          {"protocol", to_string(c.protocol)},
          {"length", c.length},
          {"fps", d.fps()},
          {"arena_radius", d.arena.radius},
          {"n_agents", d.n_agents()},
          {"test_agent", c.test_agent},
          {"trajectory", c.trajectory}};
}

json label_to_json(const LabelRecord& r) {
  return {{"clip_id", r.clip_id},
          {"rater_id", r.rater_id},
          {"judgment", r.judgment == Judgment::real ? "real" : "fake"},
          {"timestamp", r.timestamp},
          {"latency_ms", r.latency_ms}};
}

LabelRecord label_from_json(const json& j) {
  try {
    LabelRecord r;
    r.clip_id = j.at("clip_id").get<std::string>();
    r.rater_id = j.at("rater_id").get<std::string>();
    const auto judgment = j.at("judgment").get<std::string>();
    if (judgment == "real") {
      r.judgment = Judgment::real;
    } else if (judgment == "fake") {
      r.judgment = Judgment::fake;
    } else {
      throw DataError("judgment must be \"real\" or \"fake\"");
    }
    if (j.contains("timestamp")) r.timestamp = j.at("timestamp").get<std::string>();
    if (j.contains("latency_ms")) r.latency_ms = j.at("latency_ms").get<double>();
    if (!std::isfinite(r.latency_ms) || r.latency_ms < 0.0) throw DataError("latency_ms must be finite and >= 0");
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed label record: ") + e.what());
  }
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

StudyStore::StudyStore(ClipPool pool, std::vector<std::string> raters, std::string log_path)
    : pool_(std::move(pool)), raters_(raters.begin(), raters.end()), log_path_(std::move(log_path)) {
  for (std::size_t i = 0; i < pool_.clips.size(); ++i) {
    if (!clip_index_.emplace(pool_.clips[i].id, i).second) throw DataError("duplicate clip id " + pool_.clips[i].id);
  }
  if (log_path_.empty()) return;
  std::ifstream in(log_path_);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      // replay is idempotent: repeated (clip, rater) lines keep the first
      insert_locked(label_from_json(json::parse(line)), false);
    } catch (const json::parse_error& e) {
      throw DataError("label log " + log_path_ + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

bool StudyStore::knows_rater(const std::string& rater) const {
  return !rater.empty() && (raters_.empty() || raters_.count(rater) > 0);
}

const std::vector<std::size_t>& StudyStore::order_for(const std::string& rater) {
  auto it = order_.find(rater);
  if (it != order_.end()) return it->second;
  std::vector<std::size_t> order(pool_.clips.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(pool_.seed, textio::fnv1a64(rater)));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  return order_.emplace(rater, std::move(order)).first->second;
}

std::optional<json> StudyStore::next_clip(const std::string& rater) {
  if (!knows_rater(rater)) throw DataError("unknown rater '" + rater + "'");
  std::unique_lock lock(mu_);
  const auto& order = order_for(rater);
  std::size_t& cur = cursor_[rater];
  while (cur < order.size() && by_key_.count({pool_.clips[order[cur]].id, rater})) ++cur;
  if (cur >= order.size()) return std::nullopt;
  return clip_payload(pool_.clips[order[cur++]]);
}

SubmitResult StudyStore::insert_locked(LabelRecord rec, bool persist) {
  if (!clip_index_.count(rec.clip_id)) return {SubmitStatus::unknown_clip, rec};
  if (!knows_rater(rec.rater_id)) return {SubmitStatus::unknown_rater, rec};
  const auto key = std::make_pair(rec.clip_id, rec.rater_id);
  if (auto it = by_key_.find(key); it != by_key_.end()) return {SubmitStatus::duplicate, labels_[it->second]};
  if (rec.timestamp.empty()) rec.timestamp = utc_now();
  if (persist && !log_path_.empty()) {
    std::ofstream out(log_path_, std::ios::app);
    out << label_to_json(rec).dump() << '\n';
    out.flush();
    if (!out) throw DataError("cannot append to label log " + log_path_);
  }
  by_key_.emplace(key, labels_.size());
  labels_.push_back(rec);
  return {SubmitStatus::accepted, std::move(rec)};
}

SubmitResult StudyStore::submit_label(LabelRecord rec) {
  std::unique_lock lock(mu_);
  return insert_locked(std::move(rec), true);
}

std::vector<LabelRecord> StudyStore::labels() const {
  std::shared_lock lock(mu_);
  return labels_;
}

namespace {

struct Tally {
  std::size_t n = 0, correct = 0;
  void add(bool ok) {
    ++n;
    if (ok) ++correct;
  }
  json to_json() const {
    return {{"n", n}, {"correct", correct}, {"accuracy", static_cast<double>(correct) / static_cast<double>(n)}};
  }
};

json tallies(const std::map<std::string, Tally>& m) {
  json j = json::object();
  for (const auto& [k, t] : m) j[k] = t.to_json();
  return j;
}

}  // namespace

json StudyStore::results() const {
  std::shared_lock lock(mu_);
  Tally overall;
  std::map<std::string, Tally> by_model, by_protocol, by_length;
  std::map<std::string, Tally> rater_overall;
  std::map<std::string, std::map<std::string, Tally>> rater_model;
  for (const LabelRecord& r : labels_) {
    const Clip& c = pool_.clips[clip_index_.at(r.clip_id)];
    const bool ok = (r.judgment == Judgment::real) == c.real;
    const std::string model = c.real ? "real" : c.model;
    overall.add(ok);
    by_model[model].add(ok);
    by_protocol[to_string(c.protocol)].add(ok);
    by_length[std::to_string(c.length)].add(ok);
    rater_overall[r.rater_id].add(ok);
    rater_model[r.rater_id][model].add(ok);
  }
  json raters = json::object();
  for (const auto& [id, t] : rater_overall) raters[id] = {{"overall", t.to_json()}, {"by_model", tallies(rater_model[id])}};
  json out = {{"schema_version", kPayloadSchemaVersion}, {"n_labels", labels_.size()}};
  out["overall"] = overall.n ? overall.to_json() : json(nullptr);
  out["by_model"] = tallies(by_model);
  out["by_protocol"] = tallies(by_protocol);
  out["by_length"] = tallies(by_length);
  out["raters"] = raters;
  return out;
}

// ---- HTTP ----

struct StudyServer::Impl {
  StudyStore& store;
  httplib::Server server;
  explicit Impl(StudyStore& s) : store(s) {}
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json error_body(const std::string& msg) { return {{"error", msg}}; }

}  // namespace

StudyServer::StudyServer(StudyStore& store) : impl_(std::make_unique<Impl>(store)) {
  auto& srv = impl_->server;
  StudyStore* st = &impl_->store;

  srv.Get("/api/health", [st](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}, {"clips", st->n_clips()}, {"schema_version", kPayloadSchemaVersion}});
  });

  srv.Get("/api/clips/next", [st](const httplib::Request& req, httplib::Response& res) {
    const std::string rater = req.get_param_value("rater");
    if (rater.empty()) return send_json(res, 400, error_body("missing rater parameter"));
    if (!st->knows_rater(rater)) return send_json(res, 404, error_body("unknown rater"));
    auto clip = st->next_clip(rater);
    if (!clip) {
      res.status = 204;
      return;
    }
    send_json(res, 200, *clip);
  });

  srv.Post("/api/labels", [st](const httplib::Request& req, httplib::Response& res) {
    LabelRecord rec;
    try {
      rec = label_from_json(json::parse(req.body));
    } catch (const json::parse_error&) {
      return send_json(res, 400, error_body("body is not valid JSON"));
    } catch (const DataError& e) {
      return send_json(res, 400, error_body(e.what()));
    }
    const SubmitResult r = st->submit_label(rec);
    switch (r.status) {
      case SubmitStatus::accepted:
        return send_json(res, 201, {{"status", "accepted"}, {"label", label_to_json(r.record)}});
      case SubmitStatus::duplicate:
        return send_json(res, 409, {{"status", "duplicate"}, {"label", label_to_json(r.record)}});
      case SubmitStatus::unknown_clip: return send_json(res, 404, error_body("unknown clip"));
      case SubmitStatus::unknown_rater: return send_json(res, 404, error_body("unknown rater"));
    }
  });

  srv.Get("/api/results", [st](const httplib::Request&, httplib::Response& res) { send_json(res, 200, st->results()); });

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string msg = "internal error";
    try {
      if (ep) std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      msg = e.what();
    }
    send_json(res, 500, error_body(msg));
  });
}

StudyServer::~StudyServer() { stop(); }

int StudyServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw DataError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void StudyServer::serve() { impl_->server.listen_after_bind(); }

void StudyServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace flyeval
