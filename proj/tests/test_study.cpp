// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#include <filesystem>
#include <map>
#include <set>
#include <thread>

#include "doctest.h"
#include "fixtures.hpp"
#include "flyeval/errors.hpp"
#include "flyeval/study.hpp"
#include "flyeval/synth.hpp"

// after Eigen: resolv.h defines a _res macro
#include "httplib.h"

using namespace flyeval;
using nlohmann::json;

namespace {

const Dataset& recording() {
  static const Dataset d = [] {
    RandomWalkParams p;
    p.agents = 20;
    p.frames = 700;
    p.drift = 0.3;
    p.step_sigma = 0.2;
    return synth_random_walk(p, 8);
  }();
  return d;
}

std::vector<ModelSpec> two_models() {
  auto halt = make_baseline(BaselineKind::halt);
  auto cnst = make_baseline(BaselineKind::constant);
  return {{"halt", halt, halt}, {"const", cnst, cnst}};
}

ClipPool small_pool(std::size_t n_real, std::size_t n_fake, std::uint64_t seed = 1) {
  PoolConfig pc;
  pc.n_real = n_real;
  pc.n_fake_per_model = n_fake;
  pc.lengths = {60, 120};
  pc.seed = seed;
  const auto models = two_models();
  return generate_clip_pool(recording(), models, pc);
}

LabelRecord label(const std::string& clip, const std::string& rater, Judgment j) {
  LabelRecord r;
  r.clip_id = clip;
  r.rater_id = rater;
  r.judgment = j;
  r.timestamp = "2026-01-01T00:00:00Z";
  return r;
}

const Clip& clip_by_id(const ClipPool& p, const std::string& id) {
  for (const Clip& c : p.clips) {
    if (c.id == id) return c;
  }
  throw DataError("no clip " + id);
}

}  // namespace

TEST_CASE("pool composition, protocols and lengths") {
  const ClipPool pool = small_pool(8, 4);
  REQUIRE(pool.clips.size() == 16);
  std::map<std::string, std::size_t> by_class, by_len, by_protocol;
  std::set<std::string> ids;
  for (const Clip& c : pool.clips) {
    by_class[c.real ? "real" : c.model]++;
    by_len[std::to_string(c.length)]++;
    by_protocol[to_string(c.protocol)]++;
    ids.insert(c.id);
    const Dataset t = parse_dataset(c.trajectory);
    CHECK(t.n_frames() == c.length);
    CHECK(t.provenance.empty());
    if (c.protocol == Protocol::loo_one_test_fly) {
      CHECK(t.n_agents() == kLooAgents);
      CHECK(c.test_agent >= 0);
    } else {
      CHECK(c.test_agent == -1);
    }
  }
  CHECK(ids.size() == 16);
  CHECK(by_class["real"] == 8);
  CHECK(by_class["halt"] == 4);
  CHECK(by_class["const"] == 4);
  CHECK(by_len["60"] == 8);
  CHECK(by_len["120"] == 8);
  CHECK(by_protocol["one-test-fly"] == 8);
}

TEST_CASE("a fixed seed gives an identical pool") {
  CHECK(pool_to_json(small_pool(4, 2, 3)) == pool_to_json(small_pool(4, 2, 3)));
  CHECK(pool_to_json(small_pool(4, 2, 3)) != pool_to_json(small_pool(4, 2, 4)));
}

TEST_CASE("clip lengths beyond the recording are rejected") {
  PoolConfig pc;
  pc.n_real = 2;
  pc.n_fake_per_model = 1;
  pc.lengths = {5000};
  const auto models = two_models();
  CHECK_THROWS_AS(generate_clip_pool(recording(), models, pc), DataError);
}

TEST_CASE("pool files round-trip") {
  const ClipPool pool = small_pool(4, 2);
  const std::string path = test::temp_path("pool.json");
  save_pool(pool, path);
  CHECK(pool_to_json(load_pool(path)) == pool_to_json(pool));
}

TEST_CASE("payload schema is identical for real and fake clips") {
  const ClipPool pool = small_pool(4, 2);
  std::set<std::string> schemas;
  for (const Clip& c : pool.clips) {
    const json p = clip_payload(c);
    std::string s;
    for (auto it = p.begin(); it != p.end(); ++it) s += it.key() + ":" + it->type_name() + ";";
    schemas.insert(s);
    CHECK_FALSE(p.contains("real"));
    CHECK_FALSE(p.contains("model"));
    CHECK(p.at("trajectory").get<std::string>().find("provenance") == std::string::npos);
  }
  CHECK(schemas.size() == 1);
}

TEST_CASE("accuracy, duplicates and unknown ids") {
  const ClipPool pool = small_pool(2, 1);
  REQUIRE(pool.clips.size() == 4);
  StudyStore store(pool, {"ann"});
  CHECK(store.results().at("overall").is_null());
  CHECK(store.results().at("n_labels") == 0);

  int correct = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const Clip& c = pool.clips[i];
    const bool right = i != 2;
    correct += right;
    const Judgment j = (c.real == right) ? Judgment::real : Judgment::fake;
    CHECK(store.submit_label(label(c.id, "ann", j)).status == SubmitStatus::accepted);
  }
  const json r = store.results();
  CHECK(r.at("overall").at("accuracy") == doctest::Approx(0.75));
  CHECK(r.at("raters").at("ann").at("overall").at("correct") == 3);

  LabelRecord again = label(pool.clips[0].id, "ann", Judgment::real);
  const SubmitResult dup = store.submit_label(again);
  CHECK(dup.status == SubmitStatus::duplicate);
  CHECK(dup.record.judgment == store.labels()[0].judgment);
  CHECK(store.labels().size() == 4);
  CHECK(store.submit_label(label("clip-999", "ann", Judgment::real)).status == SubmitStatus::unknown_clip);
  CHECK(store.submit_label(label(pool.clips[0].id, "bob", Judgment::real)).status == SubmitStatus::unknown_rater);
  CHECK_THROWS_AS(store.next_clip("bob"), DataError);
}

TEST_CASE("assignment is exhaustive and non-repeating per rater") {
  const ClipPool pool = small_pool(4, 2);
  StudyStore store(pool);
  for (const std::string rater : {"x", "y"}) {
    std::set<std::string> seen;
    while (auto p = store.next_clip(rater)) {
      const std::string id = p->at("id");
      CHECK(seen.insert(id).second);
      store.submit_label(label(id, rater, Judgment::fake));
    }
    CHECK(seen.size() == pool.clips.size());
  }
}

TEST_CASE("results group by model, protocol and length") {
  const ClipPool pool = small_pool(4, 2);
  StudyStore store(pool);
  for (const Clip& c : pool.clips) store.submit_label(label(c.id, "z", Judgment::real));
  const json r = store.results();
  CHECK(r.at("by_model").at("real").at("accuracy") == 1.0);
  CHECK(r.at("by_model").at("halt").at("accuracy") == 0.0);
  CHECK(r.at("by_length").at("60").at("n") == 4);
  CHECK(r.at("by_protocol").at("one-test-fly").at("n") == 4);
}

TEST_CASE("the label log is replayed on restart") {
  const ClipPool pool = small_pool(2, 1);
  const std::string log = test::temp_path("labels.jsonl");
  std::filesystem::remove(log);
  {
    StudyStore store(pool, {}, log);
    store.submit_label(label(pool.clips[0].id, "r", Judgment::real));
    store.submit_label(label(pool.clips[1].id, "r", Judgment::fake));
  }
  StudyStore again(pool, {}, log);
  CHECK(again.labels().size() == 2);
  CHECK(again.submit_label(label(pool.clips[0].id, "r", Judgment::fake)).status == SubmitStatus::duplicate);
  std::set<std::string> served;
  while (auto p = again.next_clip("r")) {
    served.insert(p->at("id").get<std::string>());
    again.submit_label(label(p->at("id"), "r", Judgment::fake));
  }
  CHECK(served.count(pool.clips[0].id) == 0);
  CHECK(served.size() == 2);
}

TEST_CASE("HTTP routes and status codes") {
  const ClipPool pool = small_pool(2, 1);
  StudyStore store(pool, {"ann"});
  StudyServer server(store);
  const int port = server.bind("127.0.0.1", 0);
  std::thread th([&] { server.serve(); });
  httplib::Client cli("127.0.0.1", port);

  auto health = cli.Get("/api/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(cli.Get("/api/clips/next")->status == 400);
  CHECK(cli.Get("/api/clips/next?rater=bob")->status == 404);
  CHECK(cli.Get("/api/results")->status == 200);

  auto next = cli.Get("/api/clips/next?rater=ann");
  REQUIRE(next->status == 200);
  const json payload = json::parse(next->body);
  CHECK(payload.at("schema_version") == kPayloadSchemaVersion);
  const json body{{"clip_id", payload.at("id")}, {"rater_id", "ann"}, {"judgment", "real"}, {"latency_ms", 5.0}};
  CHECK(cli.Post("/api/labels", body.dump(), "application/json")->status == 201);
  auto dup = cli.Post("/api/labels", body.dump(), "application/json");
  CHECK(dup->status == 409);
  CHECK(cli.Post("/api/labels", "{not json", "application/json")->status == 400);
  json unknown = body;
  unknown["clip_id"] = "clip-x";
  CHECK(cli.Post("/api/labels", unknown.dump(), "application/json")->status == 404);

  for (int i = 0; i < 3; ++i) {
    auto n = cli.Get("/api/clips/next?rater=ann");
    REQUIRE(n->status == 200);
    json b = body;
    b["clip_id"] = json::parse(n->body).at("id");
    cli.Post("/api/labels", b.dump(), "application/json");
  }
  CHECK(cli.Get("/api/clips/next?rater=ann")->status == 204);
  const json res = json::parse(cli.Get("/api/results")->body);
  CHECK(res.at("n_labels") == 4);
  std::size_t real_clips = 0;
  for (const auto& l : store.labels()) real_clips += clip_by_id(pool, l.clip_id).real;
  CHECK(res.at("overall").at("correct") == real_clips);
  server.stop();
  th.join();
}
