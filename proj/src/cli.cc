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

#include "annocycle/cli.h"

#include <pthread.h>
#include <signal.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "annocycle/errors.h"
#include "annocycle/http_server.h"
#include "annocycle/scoring.h"
#include "annocycle/service.h"
#include "annocycle/workcycle.h"
#include "json.hpp"

namespace annocycle {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::string &path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error &e) {
    throw ParseError(path + ": " + e.what());
  }
}

// Writes to `path`, or to `out` when path is empty.
void emit(const std::string &path, const std::string &text, std::ostream &out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path);
  f << text;
  if (!f) throw InputError("cannot write " + path);
}

Corpus load_corpus(const std::string &path) { return ingest_corpus(read_text(path)); }

int cmd_ingest(const std::string &corpus_path, const std::string &out_path, std::ostream &out) {
  const Corpus c = load_corpus(corpus_path);
  std::size_t with_gold = 0;
  for (const auto &d : c.documents) with_gold += d.has_gold();
  const json summary = {{"documents", c.documents.size()},
                        {"documents_with_gold", with_gold},
                        {"gold_entities", c.gold_entity_count()},
                        {"labels", c.labels.size()},
                        {"tokens", [&] {
                           std::size_t n = 0;
                           for (const auto &d : c.documents) n += d.tokens.size();
                           return n;
                         }()}};
  if (!out_path.empty()) emit(out_path, corpus_to_json(c).dump(2) + "\n", out);
  out << summary.dump(2) << "\n";
  return kExitOk;
}

int cmd_degrade(const std::string &corpus_path, double recall, std::uint64_t seed,
                const std::string &out_path, std::ostream &out) {
  const Corpus c = load_corpus(corpus_path);
  const auto unit = simulated_ml_unit(c, recall, seed);
  json docs = json::array();
  for (const auto &d : c.documents) {
    const DegradeResult r = unit->predict_with_notes(d);
    json j = pre_annotations_to_json(d.id, r.annotations, true);
    j["notes"] = r.notes;
    docs.push_back(std::move(j));
  }
  const json file = {{"target_recall", recall},
                     {"seed", seed},
                     {"spurious_rate", unit->distribution().spurious_rate},
                     {"documents", std::move(docs)}};
  emit(out_path, file.dump(2) + "\n", out);
  return kExitOk;
}

// Produced file: {"documents": [{"document_id", "annotator_id"?,
// "annotations": [...]}]}, i.e. the degrade output or any exchange-format
// list.
std::vector<ScoringInput> scoring_inputs(const Corpus &gold, const json &produced) {
  if (!produced.is_object() || !produced.contains("documents"))
    throw ParseError("produced file needs a \"documents\" list");
  std::vector<ScoringInput> inputs;
  std::size_t index = 0;
  for (const auto &entry : produced.at("documents")) {
    PreAnnotatedDocument p;
    try {
      p = pre_annotations_from_json(entry);
    } catch (const ParseError &e) {
      throw ParseError("produced record " + std::to_string(index) + ": " + e.what(),
                       static_cast<long>(index));
    }
    const Document *doc = gold.find_document(p.document_id);
    if (!doc) throw InputError("produced record for unknown document '" + p.document_id + "'");
    if (!doc->gold) throw InputError("document '" + p.document_id + "' has no gold");
    ScoringInput in;
    in.document_id = p.document_id;
    in.annotator_id = entry.value("annotator_id", std::string("annotator"));
    for (const auto &a : p.annotations) {
      if (a.annotation.span.end > doc->tokens.size())
        throw InputError("span outside document '" + p.document_id + "'");
      in.produced.push_back(a.annotation);
    }
    in.gold = *doc->gold;
    inputs.push_back(std::move(in));
    ++index;
  }
  return inputs;
}

int cmd_score(const std::string &corpus_path, const std::string &produced_path,
              const std::string &format, const std::string &out_path, std::ostream &out) {
  const Corpus gold = load_corpus(corpus_path);
  const auto summary = score_documents(scoring_inputs(gold, read_json(produced_path)));
  if (format == "csv") {
    std::ostringstream csv;
    write_score_csv(csv, summary);
    emit(out_path, csv.str(), out);
  } else {
    emit(out_path, score_report_to_json(summary, std::nullopt).dump(2) + "\n", out);
  }
  return kExitOk;
}

int cmd_simulate(const std::string &plan_path, std::size_t annotators, std::uint64_t seed,
                 const std::string &corpus_override, double spread_override,
                 const std::string &out_path, std::ostream &out) {
  json config = read_json(plan_path);
  if (!config.is_object()) throw ParseError(plan_path + ": plan config must be an object");
  std::string corpus_path = corpus_override;
  if (corpus_path.empty()) {
    if (!config.contains("corpus"))
      throw InputError("no corpus: pass --corpus or set \"corpus\" in the plan config");
    corpus_path = config.at("corpus").get<std::string>();
    if (fs::path(corpus_path).is_relative())
      corpus_path = (fs::path(plan_path).parent_path() / corpus_path).string();
  }
  const Corpus corpus = load_corpus(corpus_path);
  if (!config.contains("seed")) config["seed"] = seed;
  const ExperimentPlan plan = plan_from_config(config, corpus.documents);
  const AnnotatorBehavior base = behavior_from_json(config.value("behavior", json::object()));
  const double spread = spread_override >= 0.0 ? spread_override : config.value("spread", 0.0);
  const auto behaviors = cohort_behaviors(base, annotators, seed, spread);
  const auto report = run_experiment(plan, corpus, behaviors);
  emit(out_path, experiment_report_to_json(report).dump(2) + "\n", out);
  return kExitOk;
}

int cmd_project_cost(double count, double seconds, double hours, std::ostream &out) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f workdays\n", cost_projection(count, seconds, hours));
  out << buf;
  return kExitOk;
}

int cmd_ttest(const std::vector<double> &values, std::ostream &out) {
  out << ttest_to_json(one_sample_ttest(values)).dump(2) << "\n";
  return kExitOk;
}

int cmd_serve(const std::string &data_dir, const std::string &listen,
              const std::string &static_dir, std::uint64_t snapshot_every,
              std::size_t max_body, std::ostream &out) {
  // Handle SIGINT/SIGTERM on a dedicated thread; server threads inherit the
  // blocked mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  ServiceOptions sopts;
  sopts.store.snapshot_every = snapshot_every;
  Service service(data_dir, sopts);
  ServerOptions opts;
  opts.listen = parse_listen_address(listen);
  opts.max_body_bytes = max_body;
  if (!static_dir.empty()) opts.static_dir = static_dir;
  HttpServer server(service, opts);
  const int port = server.bind();
  out << json{{"listening", opts.listen.host + ":" + std::to_string(port)},
              {"data_dir", data_dir},
              {"projects", service.project_count()}}
             .dump()
      << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.serve();
  // serve() also returns on bind loss; wake the waiter either way.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
  return kExitOk;
}

void diagnose(std::ostream &err, std::string_view kind, const std::string &message) {
  err << error_body(kind, message).dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Annotation work-cycle toolkit: corpora, simulated pre-annotation, scoring, "
               "experiments and the annotation server."};
  app.require_subcommand(1);

  std::string corpus, out_path, produced, format = "json", plan, data_dir, listen, static_dir;
  double recall = 1.0, count = 0.0, seconds = 0.0, hours = 8.0, spread = -1.0;
  std::uint64_t seed = 0, snapshot_every = 32;
  std::size_t annotators = 1, max_body = 64u << 20;
  std::vector<double> values;

  auto *ingest = app.add_subcommand("ingest", "Validate a corpus and print counts");
  ingest->add_option("--corpus,corpus", corpus, "Corpus JSON file")->required();
  ingest->add_option("--out", out_path, "Also write the normalized corpus here");

  auto *degrade = app.add_subcommand("degrade", "Simulate pre-annotations from gold");
  degrade->add_option("--corpus", corpus, "Gold corpus JSON file")->required();
  degrade->add_option("--recall", recall, "Target recall in [0,1]")->required();
  degrade->add_option("--seed", seed, "Random seed");
  degrade->add_option("--out", out_path, "Output file (default stdout)");

  auto *score = app.add_subcommand("score", "Classify produced annotations against gold");
  score->add_option("--corpus", corpus, "Gold corpus JSON file")->required();
  score->add_option("--produced", produced, "Produced annotations JSON file")->required();
  score->add_option("--format", format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  score->add_option("--out", out_path, "Output file (default stdout)");

  auto *simulate = app.add_subcommand("simulate", "Run a simulated annotation experiment");
  simulate->add_option("--plan", plan, "Experiment config JSON file")->required();
  simulate->add_option("--annotators", annotators, "Number of simulated annotators")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--seed", seed, "Cohort seed");
  simulate->add_option("--corpus", corpus, "Corpus file (overrides the config)");
  simulate->add_option("--spread", spread, "Per-annotator probability jitter (sd)");
  simulate->add_option("--out", out_path, "Output file (default stdout)");

  auto *cost = app.add_subcommand("project-cost", "Annotation effort in workdays");
  cost->add_option("--count", count, "Number of annotations")->required();
  cost->add_option("--seconds", seconds, "Seconds per annotation")->required();
  cost->add_option("--hours-per-day", hours, "Working hours per day");

  auto *ttest = app.add_subcommand("ttest", "Two-tailed one-sample t-test against 0");
  ttest->add_option("--values", values, "Sample values")->required()->delimiter(',');

  auto *serve = app.add_subcommand("serve", "Run the annotation server");
  serve->add_option("--data-dir", data_dir, "State directory (env DATA_DIR)");
  serve->add_option("--listen", listen, "host:port (env LISTEN_ADDR)");
  serve->add_option("--static", static_dir, "Serve UI assets from this directory");
  serve->add_option("--snapshot-every", snapshot_every, "Events between snapshots");
  serve->add_option("--max-body-bytes", max_body, "Request size limit");

  std::vector<std::string> argv_storage = {"annocycle"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char *> argv;
  for (const auto &a : argv_storage) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp &e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError &e) {
    diagnose(err, "usage", e.what());
    return kExitUsage;
  }

  try {
    if (*ingest) return cmd_ingest(corpus, out_path, out);
    if (*degrade) return cmd_degrade(corpus, recall, seed, out_path, out);
    if (*score) return cmd_score(corpus, produced, format, out_path, out);
    if (*simulate)
      return cmd_simulate(plan, annotators, seed, corpus, spread, out_path, out);
    if (*cost) return cmd_project_cost(count, seconds, hours, out);
    if (*ttest) return cmd_ttest(values, out);
    if (*serve) {
      return cmd_serve(data_dir.empty() ? env_or("DATA_DIR", "./data") : data_dir,
                       listen.empty() ? env_or("LISTEN_ADDR", "127.0.0.1:8080") : listen,
                       static_dir, snapshot_every, max_body, out);
    }
  } catch (const Error &e) {
    json body = error_body(e.kind(), e.what());
    if (const auto *p = dynamic_cast<const ParseError *>(&e); p && p->record_index() >= 0)
      body["error"]["record_index"] = p->record_index();
    err << body.dump() << "\n";
    return kExitData;
  } catch (const json::exception &e) {
    diagnose(err, "parse_error", e.what());
    return kExitData;
  } catch (const std::filesystem::filesystem_error &e) {
    diagnose(err, "storage_error", e.what());
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace annocycle
