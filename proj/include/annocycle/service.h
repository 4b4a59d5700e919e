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

#ifndef ANNOCYCLE_SERVICE_H_
#define ANNOCYCLE_SERVICE_H_

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>

#include "annocycle/store.h"
#include "json.hpp"

namespace annocycle {

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  nlohmann::json body;
};

struct ServiceOptions {
  StoreOptions store;
  std::chrono::milliseconds ml_timeout = std::chrono::seconds(30);
  std::function<Timestamp()> clock = now_utc;
  // Returned by GET /config for clients that need an absolute API URL.
  std::string public_base_url;
};

// The HTTP API without the transport. Errors come back as
// {"error": {"kind", "message", ...}} with a 4xx/5xx status.
//
//   POST /projects                                 corpus file (+ "ml_unit")
//   GET  /projects
//   GET  /projects/{p}
//   POST /projects/{p}/iterations                  {"size", "strategy", "seed"?}
//   GET  /projects/{p}/iterations/current
//   POST /projects/{p}/iterations/current/complete
//   GET  /projects/{p}/documents/{d}
//   PUT  /projects/{p}/documents/{d}/annotations   annotation set
//   GET  /projects/{p}/stats?annotator=&block=&experiment=
//   POST /projects/{p}/experiments                 plan + behaviors|submissions
//   GET  /projects/{p}/experiments
//   GET  /projects/{p}/experiments/{e}/report
//   GET  /health, GET /config
class Service {
 public:
  // Restores every project under data_dir; throws CorruptSnapshotError or
  // MigrationError rather than starting on damaged state.
  explicit Service(std::filesystem::path data_dir, ServiceOptions options = {});
  ~Service();

  Response handle(const Request &request);

  std::size_t project_count() const;
  // Copy of the committed record; NotFoundError if absent.
  ProjectRecord record(const std::string &project_id) const;

 private:
  struct Slot;

  std::shared_ptr<Slot> slot(const std::string &project_id) const;
  std::unique_ptr<MlUnit> make_unit(const ProjectRecord &record) const;
  // Applies and persists one event under the slot's exclusive lock.
  Applied commit(Slot &slot, nlohmann::json event);
  void retrain(Slot &slot);

  Response create_project(const Request &r);
  Response list_projects() const;
  Response get_project(const std::string &p) const;
  Response open_iteration(const std::string &p, const Request &r);
  Response current_iteration(const std::string &p) const;
  Response complete_iteration(const std::string &p);
  Response get_document(const std::string &p, const std::string &d) const;
  Response submit(const std::string &p, const std::string &d, const Request &r);
  Response stats(const std::string &p, const Request &r) const;
  Response create_experiment(const std::string &p, const Request &r);
  Response list_experiments(const std::string &p) const;
  Response experiment_report(const std::string &p, const std::string &e) const;

  ServiceOptions options_;
  Store store_;
  mutable std::shared_mutex projects_mu_;
  std::map<std::string, std::shared_ptr<Slot>> projects_;
};

nlohmann::json error_body(std::string_view kind, const std::string &message);

}  // namespace annocycle

#endif  // ANNOCYCLE_SERVICE_H_
