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

#include "annocycle/store.h"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "annocycle/errors.h"

namespace annocycle {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char *kSnapshotFile = "snapshot.json";
constexpr const char *kEventsFile = "events.log";

json strategy_to_json(const SelectionStrategy &s) {
  json j = {{"name", strategy_name(s.kind)}};
  if (s.kind == SelectionKind::kRandom) j["seed"] = s.seed;
  return j;
}

SelectionStrategy strategy_from_json(const json &j) {
  return parse_strategy(j.at("name").get<std::string>(), j.value("seed", std::uint64_t{0}));
}

json plan_to_json(const IterationPlan &p) {
  json pre = json::object();
  for (const auto &[id, anns] : p.pre_annotations)
    pre[id] = pre_annotations_to_json(id, anns, true).at("annotations");
  return {{"iteration_index", p.iteration_index},
          {"document_ids", p.document_ids},
          {"strategy", strategy_to_json(p.strategy)},
          {"pre_annotations", std::move(pre)}};
}

IterationPlan iteration_plan_from_json(const json &j) {
  IterationPlan p;
  p.iteration_index = j.at("iteration_index").get<std::size_t>();
  p.document_ids = j.at("document_ids").get<std::vector<std::string>>();
  p.strategy = strategy_from_json(j.at("strategy"));
  for (const auto &[id, anns] : j.at("pre_annotations").items()) {
    p.pre_annotations[id] =
        pre_annotations_from_json(json{{"document_id", id}, {"annotations", anns}})
            .annotations;
  }
  return p;
}

const Document &document_or_throw(const ProjectState &state, const std::string &id) {
  const Document *d = state.find_document(id);
  if (!d) throw NotFoundError("unknown document '" + id + "'");
  return *d;
}

AnnotationSet set_from_json(const ProjectState &state, const json &j) {
  return annotation_set_from_json(
      j, document_or_throw(state, j.at("document_id").get<std::string>()));
}

json experiment_to_json(const StoredExperiment &e) {
  json behaviors = json::array();
  for (const auto &b : e.behaviors) behaviors.push_back(behavior_to_json(b));
  json subs = json::array();
  for (const auto &s : e.submissions) subs.push_back(experiment_submission_to_json(s));
  return {{"id", e.id},
          {"created_at", format_timestamp(e.created_at)},
          {"plan", annocycle::plan_to_json(e.plan)},
          {"behaviors", std::move(behaviors)},
          {"submissions", std::move(subs)}};
}

StoredExperiment experiment_from_json(const json &j, const Corpus &corpus) {
  StoredExperiment e;
  e.id = j.at("id").get<std::string>();
  e.created_at = parse_timestamp(j.at("created_at").get<std::string>());
  e.plan = plan_from_json(j.at("plan"));
  for (const auto &b : j.at("behaviors")) e.behaviors.push_back(behavior_from_json(b));
  for (const auto &s : j.at("submissions"))
    e.submissions.push_back(experiment_submission_from_json(s, corpus));
  return e;
}

void throw_errno(const std::string &what, const fs::path &path) {
  throw StorageError(what + " " + path.string() + ": " + std::strerror(errno));
}

void write_all(int fd, const std::string &data, const fs::path &path) {
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("write", path);
    }
    done += static_cast<std::size_t>(n);
  }
}

void fsync_dir(const fs::path &dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) throw_errno("open", dir);
  ::fsync(fd);
  ::close(fd);
}

std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<AnnotationSet> ProjectRecord::latest_submissions() const {
  std::map<std::string, const AnnotationSet *> latest;
  for (const auto &s : submissions) latest[s.document_id] = &s;
  std::vector<AnnotationSet> out;
  if (!state.pending) return out;
  for (const auto &id : state.pending->document_ids) {
    auto it = latest.find(id);
    if (it != latest.end()) out.push_back(*it->second);
  }
  return out;
}

const StoredExperiment *ProjectRecord::find_experiment(std::string_view id) const {
  for (const auto &e : experiments)
    if (e.id == id) return &e;
  return nullptr;
}

json ml_binding_to_json(const MlBinding &b) {
  if (const auto *s = std::get_if<SimulatedBinding>(&b))
    return {{"simulated", {{"target_recall", s->target_recall}, {"seed", s->seed}}}};
  return {{"external", {{"base_url", std::get<ExternalBinding>(b).base_url}}}};
}

MlBinding ml_binding_from_json(const json &j) {
  try {
    if (j.is_object() && j.size() == 1 && j.contains("simulated")) {
      const auto &s = j.at("simulated");
      SimulatedBinding b;
      b.target_recall = s.at("target_recall").get<double>();
      b.seed = s.value("seed", std::uint64_t{0});
      if (!(b.target_recall >= 0.0 && b.target_recall <= 1.0))
        throw ParseError("ml_unit: target_recall outside [0,1]");
      return b;
    }
    if (j.is_object() && j.size() == 1 && j.contains("external")) {
      ExternalBinding b{j.at("external").at("base_url").get<std::string>()};
      if (b.base_url.rfind("http://", 0) != 0 && b.base_url.rfind("https://", 0) != 0)
        throw ParseError("ml_unit: base_url must start with http:// or https://");
      return b;
    }
  } catch (const json::exception &e) {
    throw ParseError(std::string("ml_unit: ") + e.what());
  }
  throw ParseError(R"(ml_unit must be {"simulated": {...}} or {"external": {...}})");
}

json record_to_json(const ProjectRecord &r) {
  json annotated = json::array();
  for (const auto &d : r.state.corpus) {
    auto it = r.state.annotated.find(d.id);
    if (it != r.state.annotated.end()) annotated.push_back(annotation_set_to_json(it->second));
  }
  json subs = json::array();
  for (const auto &s : r.submissions) subs.push_back(annotation_set_to_json(s));
  json experiments = json::array();
  for (const auto &e : r.experiments) experiments.push_back(experiment_to_json(e));
  return {{"id", r.id},
          {"created_at", format_timestamp(r.created_at)},
          {"revision", r.revision},
          {"corpus", corpus_to_json(r.corpus())},
          {"ml_unit", ml_binding_to_json(r.state.ml_unit)},
          {"iteration_counter", r.state.iteration_counter},
          {"annotated", std::move(annotated)},
          {"pending", r.state.pending ? plan_to_json(*r.state.pending) : json(nullptr)},
          {"submissions", std::move(subs)},
          {"experiments", std::move(experiments)}};
}

ProjectRecord record_from_json(const json &j) {
  ProjectRecord r;
  r.id = j.at("id").get<std::string>();
  r.created_at = parse_timestamp(j.at("created_at").get<std::string>());
  r.revision = j.at("revision").get<std::uint64_t>();
  Corpus corpus = corpus_from_json(j.at("corpus"));
  r.state.labels = std::move(corpus.labels);
  r.state.corpus = std::move(corpus.documents);
  r.state.ml_unit = ml_binding_from_json(j.at("ml_unit"));
  r.state.iteration_counter = j.at("iteration_counter").get<std::size_t>();
  for (const auto &s : j.at("annotated")) {
    AnnotationSet set = set_from_json(r.state, s);
    r.state.annotated[set.document_id] = std::move(set);
  }
  if (!j.at("pending").is_null()) r.state.pending = iteration_plan_from_json(j.at("pending"));
  for (const auto &s : j.at("submissions")) r.submissions.push_back(set_from_json(r.state, s));
  const Corpus c = r.corpus();
  for (const auto &e : j.at("experiments")) r.experiments.push_back(experiment_from_json(e, c));
  return r;
}

json created_event(const std::string &project_id, Timestamp at, const Corpus &corpus,
                   const MlBinding &binding) {
  return {{"type", "created"},
          {"at", format_timestamp(at)},
          {"project_id", project_id},
          {"corpus", corpus_to_json(corpus)},
          {"ml_unit", ml_binding_to_json(binding)}};
}

json iteration_opened_event(const IterationPlan &plan, Timestamp at) {
  return {{"type", "iteration_opened"}, {"at", format_timestamp(at)}, {"plan", plan_to_json(plan)}};
}

json submission_event(const AnnotationSet &set, Timestamp at) {
  return {{"type", "submission"}, {"at", format_timestamp(at)}, {"set", annotation_set_to_json(set)}};
}

json completed_event(Timestamp at) {
  return {{"type", "completed"}, {"at", format_timestamp(at)}};
}

json experiment_event(const StoredExperiment &e, Timestamp at) {
  return {{"type", "experiment"}, {"at", format_timestamp(at)}, {"experiment", experiment_to_json(e)}};
}

Applied apply_event(const ProjectRecord &record, json &event) {
  const std::string type = event.at("type").get<std::string>();
  const Timestamp at = parse_timestamp(event.at("at").get<std::string>());
  Applied out;
  if (type == "created") {
    ProjectRecord r;
    r.id = event.at("project_id").get<std::string>();
    r.created_at = at;
    Corpus corpus = corpus_from_json(event.at("corpus"));
    r.state.labels = std::move(corpus.labels);
    r.state.corpus = std::move(corpus.documents);
    r.state.ml_unit = ml_binding_from_json(event.at("ml_unit"));
    out.record = std::move(r);
  } else {
    out.record = record;
    ProjectRecord &r = out.record;
    if (type == "iteration_opened") {
      if (r.state.pending) throw ConflictError("an iteration is already pending");
      IterationPlan plan = iteration_plan_from_json(event.at("plan"));
      std::set<std::string> seen;
      for (const auto &id : plan.document_ids) {
        document_or_throw(r.state, id);
        if (r.state.is_annotated(id) || !seen.insert(id).second)
          throw ConflictError("document '" + id + "' cannot be planned again");
      }
      r.state.pending = std::move(plan);
      r.submissions.clear();
    } else if (type == "submission") {
      AnnotationSet set = set_from_json(r.state, event.at("set"));
      if (!r.state.is_pending(set.document_id))
        throw ConflictError("document '" + set.document_id + "' is not in the pending iteration");
      std::erase_if(r.submissions, [&](const AnnotationSet &s) {
        return s.document_id == set.document_id && s.annotator_id == set.annotator_id;
      });
      r.submissions.push_back(std::move(set));
      auto latest = r.latest_submissions();
      if (latest.size() == r.state.pending->document_ids.size()) {
        out.merged = r.state.pending->document_ids;
        r.state = merge_back(std::move(r.state), latest, nullptr);
        r.submissions.clear();
      }
    } else if (type == "completed") {
      if (!r.state.pending) throw ConflictError("no pending iteration");
      auto latest = r.latest_submissions();
      std::vector<std::string> ids;
      for (const auto &s : latest) ids.push_back(s.document_id);
      out.merged = std::move(ids);
      r.state = complete_partial(std::move(r.state), latest, nullptr);
      r.submissions.clear();
    } else if (type == "experiment") {
      StoredExperiment e = experiment_from_json(event.at("experiment"), r.corpus());
      if (r.find_experiment(e.id)) throw ConflictError("experiment '" + e.id + "' exists");
      r.experiments.push_back(std::move(e));
    } else {
      throw ParseError("unknown event type '" + type + "'");
    }
  }
  ++out.record.revision;
  event["revision"] = out.record.revision;
  return out;
}

Store::Store(fs::path dir, StoreOptions options)
    : dir_(std::move(dir)), options_(options) {
  std::error_code ec;
  fs::create_directories(dir_ / "projects", ec);
  if (ec) throw StorageError("cannot create " + (dir_ / "projects").string() + ": " + ec.message());
}

fs::path Store::project_dir(const std::string &id) const { return dir_ / "projects" / id; }

void Store::commit(const ProjectRecord &after, const json &event) {
  const fs::path pdir = project_dir(after.id);
  const bool created = event.at("type") == "created";
  if (created) {
    fs::create_directories(pdir);
    fsync_dir(pdir.parent_path());
  }
  const fs::path log = pdir / kEventsFile;
  const int fd = ::open(log.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  if (fd < 0) throw_errno("open", log);
  try {
    write_all(fd, event.dump() + "\n", log);
    if (::fsync(fd) != 0) throw_errno("fsync", log);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  if (created) {
    fsync_dir(pdir);
    write_snapshot(after);
  } else if (options_.snapshot_every > 0 && after.revision % options_.snapshot_every == 0) {
    write_snapshot(after);
  }
}

void Store::write_snapshot(const ProjectRecord &record) {
  const fs::path pdir = project_dir(record.id);
  const fs::path tmp = pdir / (std::string(kSnapshotFile) + ".tmp");
  const fs::path final_path = pdir / kSnapshotFile;
  const std::string body =
      json{{"schema_version", kSchemaVersion}, {"project", record_to_json(record)}}.dump();
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw_errno("open", tmp);
  try {
    write_all(fd, body, tmp);
    if (::fsync(fd) != 0) throw_errno("fsync", tmp);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  if (::rename(tmp.c_str(), final_path.c_str()) != 0) throw_errno("rename", tmp);
  fsync_dir(pdir);
}

std::optional<ProjectRecord> Store::load_project(const fs::path &pdir) {
  std::optional<ProjectRecord> record;
  const fs::path snap = pdir / kSnapshotFile;
  if (fs::exists(snap)) {
    const std::string text = read_file(snap);
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error &e) {
      throw CorruptSnapshotError(snap.string(), e.byte, e.what());
    }
    if (!j.is_object() || !j.contains("schema_version"))
      throw CorruptSnapshotError(snap.string(), 0, "no schema_version");
    if (j.at("schema_version") != kSchemaVersion) {
      throw MigrationError("snapshot " + snap.string() + " has schema version " +
                           j.at("schema_version").dump() + ", this build reads " +
                           std::to_string(kSchemaVersion));
    }
    try {
      record = record_from_json(j.at("project"));
    } catch (const std::exception &e) {
      throw CorruptSnapshotError(snap.string(), 0, e.what());
    }
  }

  const fs::path log = pdir / kEventsFile;
  if (fs::exists(log)) {
    const std::string text = read_file(log);
    std::size_t offset = 0;
    while (offset < text.size()) {
      const std::size_t nl = text.find('\n', offset);
      if (nl == std::string::npos) {
        // Torn append: never acknowledged. Cut it so later appends start on a
        // fresh line.
        fs::resize_file(log, offset);
        break;
      }
      json event;
      try {
        event = json::parse(text.substr(offset, nl - offset));
      } catch (const json::parse_error &e) {
        throw CorruptSnapshotError(log.string(), offset, e.what());
      }
      try {
        const std::uint64_t rev = event.at("revision").get<std::uint64_t>();
        const std::uint64_t current = record ? record->revision : 0;
        if (rev > current) {
          if (rev != current + 1) {
            throw StorageError("revision " + std::to_string(rev) + " follows " +
                               std::to_string(current));
          }
          json replay = event;
          record = apply_event(record ? *record : ProjectRecord{}, replay).record;
        }
      } catch (const CorruptSnapshotError &) {
        throw;
      } catch (const std::exception &e) {
        throw CorruptSnapshotError(log.string(), offset, e.what());
      }
      offset = nl + 1;
    }
  }
  return record;
}

std::vector<ProjectRecord> Store::load_all() {
  std::vector<fs::path> dirs;
  for (const auto &entry : fs::directory_iterator(dir_ / "projects"))
    if (entry.is_directory()) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<ProjectRecord> out;
  for (const auto &d : dirs) {
    if (auto r = load_project(d)) out.push_back(std::move(*r));
  }
  return out;
}

}  // namespace annocycle
