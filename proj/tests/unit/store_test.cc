// Copyright 2026 The Annocycle Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <set>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include "annocycle/errors.h"
#include "annocycle/rng.h"
#include "annocycle/service.h"
#include "annocycle/store.h"
#include "doctest.h"
#include "oracles/oracles.h"
#include "support.h"

using namespace annocycle;
using namespace annocycle::testing;
using namespace annocycle::oracle;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path &p, const std::string &text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

std::size_t count_events(const fs::path &log, const std::string &type) {
  std::istringstream in(slurp(log));
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && json::parse(line).at("type") == type) ++n;
  return n;
}

// Submissions the record holds: merged documents plus pending ones.
std::size_t accepted_documents(const ProjectRecord &r) {
  std::set<std::string> docs;
  for (const auto &[id, set] : r.state.annotated) docs.insert(id);
  for (const auto &s : r.submissions) docs.insert(s.document_id);
  return docs.size();
}

ServiceOptions stepping_clock(std::uint64_t snapshot_every) {
  ServiceOptions o;
  o.store.snapshot_every = snapshot_every;
  auto t = std::make_shared<Timestamp>(simulation_epoch());
  o.clock = [t] { return *t += std::chrono::milliseconds(1250); };
  return o;
}

Corpus small_corpus(std::uint64_t seed, std::size_t docs = 12) {
  SyntheticOptions o;
  o.documents = docs;
  o.max_tokens = 20;
  return synthetic_corpus(seed, o);
}

}  // namespace

TEST_CASE("empty data directory restores nothing") {
  TempDir dir;
  Service s(dir.path());
  CHECK(s.project_count() == 0);
  CHECK(fs::is_directory(dir.path() / "projects"));
  CHECK(call(s, "GET", "/projects").body.at("projects").empty());
}

TEST_CASE("restart restores every field") {
  TempDir dir;
  const Corpus c = small_corpus(3);
  ProjectRecord before;
  {
    Service s(dir.path());
    REQUIRE(call(s, "POST", "/projects", create_body(c)).status == 201);
    REQUIRE(call(s, "POST", "/projects/p-0001/iterations", {{"size", 3}}).status == 200);
    REQUIRE(call(s, "PUT", "/projects/p-0001/documents/d0/annotations",
                 gold_submission(c.documents[0], "a1"))
                .status == 200);
    REQUIRE(call(s, "POST", "/projects/p-0001/experiments",
                 {{"plan", {{"k_blocks", 2}, {"target_recall", 0.5}}}, {"annotators", 2}, {"seed", 4}})
                .status == 201);
    before = s.record("p-0001");
  }
  Service restored(dir.path());
  CHECK(restored.project_count() == 1);
  const ProjectRecord after = restored.record("p-0001");
  CHECK(after.revision == before.revision);
  CHECK(after.submissions == before.submissions);
  CHECK(after.state.pending == before.state.pending);
  CHECK(after.experiments == before.experiments);
  CHECK(after == before);
  CHECK(call(restored, "GET", "/projects/p-0001/experiments/e-0001/report").status == 200);
}

TEST_CASE("acknowledged submissions survive SIGKILL") {
  TempDir dir;
  const Corpus c = small_corpus(5);
  {
    Service s(dir.path());
    REQUIRE(call(s, "POST", "/projects", create_body(c)).status == 201);
    REQUIRE(call(s, "POST", "/projects/p-0001/iterations", {{"size", 3}}).status == 200);
  }
  int ack[2];
  REQUIRE(pipe(ack) == 0);
  const pid_t pid = fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    close(ack[0]);
    Service s(dir.path());
    for (int i = 0; i < 2; ++i) {
      auto r = call(s, "PUT", "/projects/p-0001/documents/d" + std::to_string(i) + "/annotations",
                    gold_submission(c.documents[i], "a1"));
      const char b = r.status == 200 ? 'y' : 'n';
      if (write(ack[1], &b, 1) != 1) _exit(3);
    }
    for (;;) pause();
  }
  close(ack[1]);
  char got[2];
  REQUIRE(read(ack[0], got, 1) == 1);
  REQUIRE(read(ack[0], got + 1, 1) == 1);
  CHECK(got[0] == 'y');
  CHECK(got[1] == 'y');
  kill(pid, SIGKILL);
  int status = 0;
  waitpid(pid, &status, 0);
  close(ack[0]);
  CHECK(WIFSIGNALED(status));

  Service s(dir.path());
  const auto rec = s.record("p-0001");
  CHECK(rec.submissions.size() == 2);
  CHECK(count_events(dir.path() / "projects" / "p-0001" / "events.log", "submission") == 2);
  CHECK(rec.state.pending.has_value());
}

TEST_CASE("random kill points never lose an acknowledged submission") {
  Rng rng(77);
  for (int round = 0; round < 8; ++round) {
    TempDir dir;
    const Corpus c = small_corpus(100 + round, 30);
    {
      Service s(dir.path(), stepping_clock(1 + rng.below(5)));
      REQUIRE(call(s, "POST", "/projects", create_body(c)).status == 201);
    }
    int ack[2];
    REQUIRE(pipe(ack) == 0);
    const pid_t pid = fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
      close(ack[0]);
      ServiceOptions o;
      o.store.snapshot_every = 3;
      Service s(dir.path(), o);
      for (;;) {
        auto it = call(s, "POST", "/projects/p-0001/iterations", {{"size", 4}});
        if (it.body.value("complete", false)) break;
        for (const auto &d : it.body.at("documents")) {
          const auto id = d.at("document_id").get<std::string>();
          const Document *doc = nullptr;
          for (const auto &x : c.documents)
            if (x.id == id) doc = &x;
          auto r = call(s, "PUT", "/projects/p-0001/documents/" + id + "/annotations",
                        gold_submission(*doc, "a1"));
          if (r.status != 200) _exit(4);
          const char b = 'y';
          if (write(ack[1], &b, 1) != 1) _exit(3);
        }
      }
      for (;;) pause();
    }
    close(ack[1]);
    const std::size_t wait_for = 1 + rng.below(c.documents.size());
    std::size_t acked = 0;
    char b;
    while (acked < wait_for && read(ack[0], &b, 1) == 1) ++acked;
    std::this_thread::sleep_for(std::chrono::microseconds(rng.below(3000)));
    kill(pid, SIGKILL);
    int status = 0;
    waitpid(pid, &status, 0);
    // Acks written before the kill landed.
    while (read(ack[0], &b, 1) == 1) ++acked;
    close(ack[0]);

    Service s(dir.path());
    const std::size_t kept = accepted_documents(s.record("p-0001"));
    CHECK(kept >= acked);
    CHECK(kept <= acked + 1);
    // The restored project keeps accepting work.
    auto cur = call(s, "GET", "/projects/p-0001/iterations/current");
    if (cur.status == 404)
      cur = call(s, "POST", "/projects/p-0001/iterations", {{"size", 2}});
    CHECK(cur.status == 200);
  }
}

TEST_CASE("torn final line is dropped and the log stays appendable") {
  TempDir dir;
  const Corpus c = small_corpus(8);
  {
    Service s(dir.path());
    REQUIRE(call(s, "POST", "/projects", create_body(c)).status == 201);
    REQUIRE(call(s, "POST", "/projects/p-0001/iterations", {{"size", 2}}).status == 200);
  }
  const fs::path log = dir.path() / "projects" / "p-0001" / "events.log";
  const std::string intact = slurp(log);
  spit(log, intact + R"({"type":"submission","revis)");
  {
    Service s(dir.path());
    CHECK(s.record("p-0001").revision == 2);
    CHECK(slurp(log) == intact);
    CHECK(call(s, "PUT", "/projects/p-0001/documents/d0/annotations",
               gold_submission(c.documents[0], "a1"))
              .status == 200);
  }
  Service s(dir.path());
  CHECK(s.record("p-0001").revision == 3);
  CHECK(s.record("p-0001").submissions.size() == 1);
}

TEST_CASE("a damaged event in the middle is reported with its offset") {
  TempDir dir;
  const Corpus c = small_corpus(9);
  {
    ServiceOptions o;
    o.store.snapshot_every = 0;
    Service s(dir.path(), o);
    REQUIRE(call(s, "POST", "/projects", create_body(c)).status == 201);
    REQUIRE(call(s, "POST", "/projects/p-0001/iterations", {{"size", 2}}).status == 200);
    REQUIRE(call(s, "PUT", "/projects/p-0001/documents/d0/annotations",
                 gold_submission(c.documents[0], "a1"))
                .status == 200);
  }
  const fs::path pdir = dir.path() / "projects" / "p-0001";
  fs::remove(pdir / "snapshot.json");
  std::string text = slurp(pdir / "events.log");
  const std::size_t second = text.find('\n') + 1;
  text[second + 3] = '#';
  spit(pdir / "events.log", text);
  try {
    Service s(dir.path());
    FAIL("restore accepted a corrupt log");
  } catch (const CorruptSnapshotError &e) {
    CHECK(e.file() == (pdir / "events.log").string());
    CHECK(e.offset() == second);
    CHECK(e.kind() == CorruptSnapshotError("", 0, "").kind());
  }
}

TEST_CASE("corrupt snapshots and unknown schema versions refuse to load") {
  TempDir dir;
  const Corpus c = small_corpus(10);
  {
    Service s(dir.path());
    REQUIRE(call(s, "POST", "/projects", create_body(c)).status == 201);
  }
  const fs::path snap = dir.path() / "projects" / "p-0001" / "snapshot.json";
  const std::string good = slurp(snap);

  spit(snap, good.substr(0, good.size() / 2));
  CHECK_THROWS_AS(Service(dir.path()), CorruptSnapshotError);

  spit(snap, R"({"project":{}})");
  CHECK_THROWS_AS(Service(dir.path()), CorruptSnapshotError);

  json j = json::parse(good);
  j["schema_version"] = 99;
  spit(snap, j.dump());
  CHECK_THROWS_AS(Service(dir.path()), MigrationError);

  spit(snap, good);
  CHECK_NOTHROW(Service(dir.path()));
}

TEST_CASE("replay from snapshots and from events alone equals the live state") {
  Rng rng(2024);
  std::uint64_t revisions = 0;
  std::size_t iterations = 0, experiments = 0;
  for (int seq = 0; seq < 100; ++seq) {
    TempDir dir;
    const Corpus c = small_corpus(1000 + seq, 10);
    const std::uint64_t every = rng.below(6);
    ProjectRecord live;
    {
      Service s(dir.path(), stepping_clock(every));
      REQUIRE(call(s, "POST", "/projects", create_body(c)).status == 201);
      const int steps = 10 + static_cast<int>(rng.below(30));
      for (int i = 0; i < steps; ++i) random_step(s, "p-0001", c, rng, seq % 10 == 0);
      live = s.record("p-0001");
    }
    revisions += live.revision;
    iterations += live.state.iteration_counter;
    experiments += live.experiments.size();
    Service with_snapshot(dir.path());
    CHECK(with_snapshot.record("p-0001") == live);

    fs::remove(dir.path() / "projects" / "p-0001" / "snapshot.json");
    Service events_only(dir.path());
    CHECK(events_only.record("p-0001") == live);
    if (live != events_only.record("p-0001")) break;
  }
  CHECK(revisions > 1000);
  CHECK(iterations > 100);
  CHECK(experiments > 0);
}

TEST_CASE("apply_event rejects events that do not fit") {
  const Corpus c = small_corpus(11, 4);
  json created = created_event("p-0001", simulation_epoch(), c, MlBinding{});
  Applied a = apply_event({}, created);
  CHECK(a.record.revision == 1);
  CHECK(created.at("revision") == 1);
  json done = completed_event(simulation_epoch());
  CHECK_THROWS_AS(apply_event(a.record, done), ConflictError);
}
