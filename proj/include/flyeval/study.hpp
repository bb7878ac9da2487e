// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

// Human real-vs-fake study: clip pools, the label store and its HTTP+JSON API.
// Ground truth never leaves the server; payloads share one schema for real
// and fake clips.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "flyeval/policy.hpp"
#include "flyeval/trajcore.hpp"

namespace flyeval {

inline constexpr int kPayloadSchemaVersion = 1;
inline constexpr std::size_t kLooAgents = 20;

enum class Protocol { loo_one_test_fly, all_same };
std::string to_string(Protocol p);
Protocol parse_protocol(const std::string& s);

struct Clip {
  std::string id;
  Protocol protocol = Protocol::all_same;
  std::size_t length = 0;  // frames
  bool real = true;
  std::string model;        // empty for real clips
  int test_agent = -1;      // trajectory index for the one-test-fly protocol, else -1
  std::size_t start_frame = 0;
  std::string trajectory;   // trajcore text, provenance stripped
};

struct ClipPool {
  std::vector<Clip> clips;
  std::uint64_t seed = 0;
};

struct ModelSpec {
  std::string name;
  std::shared_ptr<const Policy> male;
  std::shared_ptr<const Policy> female;
};

struct PoolConfig {
  std::size_t n_real = 80;
  std::size_t n_fake_per_model = 20;
  std::vector<std::size_t> lengths{60, 120, 240, 480};
  double loo_fraction = 0.5;  // share of each class shown under the one-test-fly protocol
  std::size_t min_start = 50; // leaves a real history before every clip
  std::uint64_t seed = 0;
};

/// Clips cycle through the lengths within each class. One-test-fly clips
/// need exactly 20 agents. Throws DataError when the recording is too short.
ClipPool generate_clip_pool(const Dataset& real, std::span<const ModelSpec> models, const PoolConfig& cfg);

nlohmann::json pool_to_json(const ClipPool& pool);
ClipPool pool_from_json(const nlohmann::json& j);
void save_pool(const ClipPool& pool, const std::string& path);
ClipPool load_pool(const std::string& path);

/// The blinded serving form of a clip.
nlohmann::json clip_payload(const Clip& c);

enum class Judgment { real, fake };

struct LabelRecord {
  std::string clip_id;
  std::string rater_id;
  Judgment judgment = Judgment::real;
  std::string timestamp;
  double latency_ms = 0.0;
};

enum class SubmitStatus { accepted, duplicate, unknown_clip, unknown_rater };

struct SubmitResult {
  SubmitStatus status = SubmitStatus::accepted;
  LabelRecord record;  // the stored record; the original one for duplicates
};

/// Label store with per-rater clip assignment. Reads run concurrently; writes
/// and the log appender are serialized.
class StudyStore {
 public:
  /// An empty rater list accepts any rater id. A non-empty log_path is
  /// replayed on construction and appended to on every accepted label.
  StudyStore(ClipPool pool, std::vector<std::string> raters = {}, std::string log_path = {});

  /// Next clip not yet served to this rater, blinded; empty when exhausted.
  /// Throws DataError for unknown raters.
  std::optional<nlohmann::json> next_clip(const std::string& rater);
  SubmitResult submit_label(LabelRecord rec);
  nlohmann::json results() const;
  std::vector<LabelRecord> labels() const;

  bool knows_rater(const std::string& rater) const;
  std::size_t n_clips() const noexcept { return pool_.clips.size(); }
  const ClipPool& pool() const noexcept { return pool_; }

 private:
  SubmitResult insert_locked(LabelRecord rec, bool persist);
  const std::vector<std::size_t>& order_for(const std::string& rater);

  ClipPool pool_;
  std::map<std::string, std::size_t> clip_index_;
  std::set<std::string> raters_;
  std::string log_path_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::vector<std::size_t>> order_;  // per-rater clip permutation
  std::map<std::string, std::size_t> cursor_;
  std::map<std::pair<std::string, std::string>, std::size_t> by_key_;  // (clip, rater) -> label index
  std::vector<LabelRecord> labels_;
};

nlohmann::json label_to_json(const LabelRecord& r);
LabelRecord label_from_json(const nlohmann::json& j);

/// HTTP front end: GET /api/clips/next?rater=ID, POST /api/labels,
/// GET /api/results, GET /api/health.
class StudyServer {
 public:
  explicit StudyServer(StudyStore& store);
  ~StudyServer();
  StudyServer(const StudyServer&) = delete;
  StudyServer& operator=(const StudyServer&) = delete;

  /// Binds and returns the port; port 0 picks a free one.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace flyeval
