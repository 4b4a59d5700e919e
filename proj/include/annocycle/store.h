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

#ifndef ANNOCYCLE_STORE_H_
#define ANNOCYCLE_STORE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "annocycle/timestamp.h"
#include "annocycle/workcycle.h"
#include "json.hpp"

namespace annocycle {

inline constexpr int kSchemaVersion = 1;

struct StoredExperiment {
  std::string id;
  ExperimentPlan plan;
  std::vector<AnnotatorBehavior> behaviors;  // empty for imported results
  std::vector<ExperimentSubmission> submissions;
  Timestamp created_at;

  bool operator==(const StoredExperiment &) const = default;
};

struct ProjectRecord {
  std::string id;
  Timestamp created_at;
  // Number of events applied; bumped by every mutation.
  std::uint64_t revision = 0;
  ProjectState state;
  // Submissions for the pending iteration, one per (document, annotator),
  // in arrival order.
  std::vector<AnnotationSet> submissions;
  std::vector<StoredExperiment> experiments;

  Corpus corpus() const { return {state.labels, state.corpus}; }
  // Latest submission per planned document.
  std::vector<AnnotationSet> latest_submissions() const;
  const StoredExperiment *find_experiment(std::string_view id) const;

  bool operator==(const ProjectRecord &) const = default;
};

nlohmann::json ml_binding_to_json(const MlBinding &b);
// {"simulated": {"target_recall", "seed"?}} or {"external": {"base_url"}}.
// Throws ParseError.
MlBinding ml_binding_from_json(const nlohmann::json &j);

nlohmann::json record_to_json(const ProjectRecord &r);
ProjectRecord record_from_json(const nlohmann::json &j);

// Events. Every event carries "type", "revision" and "at"; apply_event is
// the only way a record changes, both live and on replay.
nlohmann::json created_event(const std::string &project_id, Timestamp at,
                             const Corpus &corpus, const MlBinding &binding);
nlohmann::json iteration_opened_event(const IterationPlan &plan, Timestamp at);
nlohmann::json submission_event(const AnnotationSet &set, Timestamp at);
nlohmann::json completed_event(Timestamp at);
nlohmann::json experiment_event(const StoredExperiment &e, Timestamp at);

// Result of applying one event.
struct Applied {
  ProjectRecord record;
  // Set when a submission completed the iteration or a completion event
  // ended it; lists the merged document ids.
  std::optional<std::vector<std::string>> merged;
};

// `record` is ignored for "created". Stamps event["revision"]. Throws the
// workcycle errors (ConflictError, IncompleteIterationError, ...) when the
// event does not fit the record.
Applied apply_event(const ProjectRecord &record, nlohmann::json &event);

struct StoreOptions {
  // Snapshot after this many events; 0 means only at creation.
  std::uint64_t snapshot_every = 32;
};

// Data directory layout: <dir>/projects/<id>/{snapshot.json, events.log}.
// Events are appended and fsync'd before commit() returns; snapshots are
// written to a temp file, fsync'd and renamed over the old one.
class Store {
 public:
  explicit Store(std::filesystem::path dir, StoreOptions options = {});

  // Restores every project: latest snapshot plus newer events. A torn last
  // line (crash during append) is dropped. Throws CorruptSnapshotError /
  // MigrationError.
  std::vector<ProjectRecord> load_all();

  // Persists `event`, already applied to give `after`.
  void commit(const ProjectRecord &after, const nlohmann::json &event);

  void write_snapshot(const ProjectRecord &record);

  const std::filesystem::path &dir() const { return dir_; }
  std::filesystem::path project_dir(const std::string &id) const;

 private:
  std::optional<ProjectRecord> load_project(const std::filesystem::path &pdir);

  std::filesystem::path dir_;
  StoreOptions options_;
};

}  // namespace annocycle

#endif  // ANNOCYCLE_STORE_H_
