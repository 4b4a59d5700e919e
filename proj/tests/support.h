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

#ifndef ANNOCYCLE_TESTS_SUPPORT_H_
#define ANNOCYCLE_TESTS_SUPPORT_H_

// Temp directories and request helpers shared by the server-side tests.

#include <fcntl.h>
#include <stdlib.h>
#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "annocycle/rng.h"
#include "annocycle/service.h"
#include "annocycle/workcycle.h"
#include "json.hpp"

namespace annocycle::testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "annocycle-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const std::filesystem::path &path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_text(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path &p, const std::string &text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Runs `binary args...` with stdout and stderr captured.
inline RunResult run_binary(const std::string &binary, const std::vector<std::string> &args) {
  TempDir scratch;
  const auto out_path = scratch.path() / "out";
  const auto err_path = scratch.path() / "err";
  const pid_t pid = fork();
  if (pid < 0) throw std::runtime_error("fork failed");
  if (pid == 0) {
    const int o = open(out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    const int e = open(err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (o < 0 || e < 0) _exit(127);
    dup2(o, 1);
    dup2(e, 2);
    std::vector<char *> argv;
    argv.push_back(const_cast<char *>(binary.c_str()));
    for (const auto &a : args) argv.push_back(const_cast<char *>(a.c_str()));
    argv.push_back(nullptr);
    execv(binary.c_str(), argv.data());
    _exit(127);
  }
  int status = 0;
  waitpid(pid, &status, 0);
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  r.out = read_text(out_path);
  r.err = read_text(err_path);
  return r;
}

inline Response call(Service &s, const std::string &method, const std::string &path,
                     const nlohmann::json &body = nullptr,
                     std::map<std::string, std::string> query = {}) {
  return s.handle({method, path, std::move(query), body.is_null() ? "" : body.dump()});
}

inline nlohmann::json create_body(const Corpus &c, const nlohmann::json &ml_unit = nullptr) {
  nlohmann::json j = corpus_to_json(c);
  if (!ml_unit.is_null()) j["ml_unit"] = ml_unit;
  return j;
}

// A submission that reproduces the gold of `doc`.
inline nlohmann::json gold_submission(const Document &doc, const std::string &annotator,
                                      Timestamp start = simulation_epoch()) {
  AnnotationSet set;
  set.document_id = doc.id;
  set.annotator_id = annotator;
  set.annotations = doc.gold.value_or(std::vector<Annotation>{});
  set.started_at = start;
  set.finished_at = start + std::chrono::seconds(3);
  Timestamp t = start;
  for (const auto &a : set.annotations) {
    t += std::chrono::milliseconds(500);
    set.actions.push_back({ActionType::kAdd, a.span, a.label, t});
  }
  if (!set.actions.empty()) set.finished_at = std::max(set.finished_at, t);
  return annotation_set_to_json(set);
}

// One random API call against project `p`; covers opening, submitting
// (including resubmissions and rejected ones), completing and experiments.
inline void random_step(Service &s, const std::string &p, const Corpus &corpus, Rng &rng,
                        bool with_experiments = true) {
  static const char *kStrategies[] = {"sequential", "random", "least_confidence"};
  const std::string base = "/projects/" + p;
  const auto roll = rng.below(100);
  if (roll < 20) {
    call(s, "POST", base + "/iterations",
         {{"size", 1 + rng.below(4)}, {"strategy", kStrategies[rng.below(3)]},
          {"seed", rng.below(1000)}});
  } else if (roll < 75) {
    auto cur = call(s, "GET", base + "/iterations/current");
    const Document *doc = nullptr;
    if (cur.status == 200 && !cur.body.at("documents").empty()) {
      const auto &docs = cur.body.at("documents");
      const auto id = docs.at(rng.below(docs.size())).at("document_id").get<std::string>();
      for (const auto &d : corpus.documents)
        if (d.id == id) doc = &d;
    } else {
      doc = &corpus.documents.at(rng.below(corpus.documents.size()));
    }
    auto sub = gold_submission(*doc, "a" + std::to_string(rng.below(2)));
    if (!sub.at("annotations").empty() && rng.bernoulli(0.3)) sub["annotations"].erase(0);
    call(s, "PUT", base + "/documents/" + doc->id + "/annotations", sub);
  } else if (roll < 90) {
    call(s, "POST", base + "/iterations/current/complete");
  } else if (roll < 95 && with_experiments) {
    call(s, "POST", base + "/experiments",
         {{"plan", {{"k_blocks", 2}, {"target_recall", 0.5}, {"seed", rng.below(100)}}},
          {"annotators", 1 + rng.below(2)},
          {"seed", rng.below(100)}});
  } else {
    call(s, "GET", base + "/documents/nope");
  }
}

}  // namespace annocycle::testing

#endif  // ANNOCYCLE_TESTS_SUPPORT_H_
