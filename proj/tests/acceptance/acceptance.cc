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

// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "annocycle/assistance.h"
#include "annocycle/corpus.h"
#include "annocycle/errors.h"
#include "annocycle/rng.h"
#include "annocycle/scoring.h"
#include "annocycle/service.h"
#include "annocycle/workcycle.h"
#include "json.hpp"
#include "oracles/oracles.h"
#include "support.h"

using namespace annocycle;
using namespace annocycle::testing;
using E = ErrorCategory;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char *f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

class Runner {
 public:
  void run(const std::string &name, const std::function<Outcome()> &fn,
           double limit_seconds = 0) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception &e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_seconds > 0 && secs >= limit_seconds) {
      o.pass = false;
      o.detail += fmt("; runtime %.2f s over the %.0f s limit", secs, limit_seconds);
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << fmt(" (%.2f s): ", secs) << o.detail
              << std::endl;
    failures_ += o.pass ? 0 : 1;
  }
  int failures() const { return failures_; }

 private:
  int failures_ = 0;
};

// ---------------------------------------------------------------------------

Outcome distribution_scaling() {
  // Reference values: r = 0.5 and 0.9 hand-derived; r = 0.1 recomputed here
  // as (1 - r) * base / error_mass.
  const double base_err[] = {0.078, 0.031, 0.0, 0.298};
  // Unnecessary is drawn separately, so it is not part of the mass.
  const double mass = 0.078 + 0.031 + 0.0 + 0.298;
  std::map<double, std::vector<double>> expected = {
      {0.5, {0.5, 0.0958, 0.0381, 0.0, 0.3661, 0.0184}},
      {0.9, {0.9, 0.0192, 0.0076, 0.0, 0.0732, 0.0037}},
  };
  {
    const double r = 0.1;
    std::vector<double> v = {r};
    for (double w : base_err) v.push_back((1 - r) * w / mass);
    v.push_back((1 - r) * 0.015 / mass);
    expected[r] = v;
  }
  double worst = 0, worst_sum = 0;
  for (const auto &[r, want] : expected) {
    const auto s = scale_distribution(base_distribution(), r);
    const double got[] = {s.categories[E::kCorrect], s.categories[E::kCorrectLabelWrongSpan],
                          s.categories[E::kWrongLabelCorrectSpan],
                          s.categories[E::kWrongLabelWrongSpan], s.categories[E::kMissing],
                          s.spurious_rate};
    for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
    double sum = 0;
    for (auto c : kAllCategories) sum += s.categories[c];
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
  }
  return {worst <= 1e-4 && worst_sum <= 1e-9,
          fmt("max |deviation| %.2e (tol 1e-4), max |sum - 1| %.2e (tol 1e-9)", worst, worst_sum)};
}

Outcome degradation_convergence() {
  double worst = 0;
  std::ostringstream detail;
  for (double r : {0.1, 0.5, 0.9}) {
    oracle::SyntheticOptions opts;
    opts.documents = 1;
    opts.min_tokens = opts.max_tokens = 40;
    opts.min_gap = 2;
    const auto s = scale_distribution(base_distribution(), r);
    std::map<E, std::size_t> counts;
    std::size_t gold_total = 0;
    const std::size_t target = 10000;
    for (std::uint64_t d = 0; gold_total < target; ++d) {
      Corpus c = oracle::synthetic_corpus(derive_seed(static_cast<std::uint64_t>(r * 10), d), opts);
      auto &doc = c.documents[0];
      if (doc.gold->size() > target - gold_total) doc.gold->resize(target - gold_total);
      gold_total += doc.gold->size();
      const auto out = degrade(doc, c.labels, s.categories, s.spurious_rate, 1000 + d);
      std::size_t consumed = 0;
      for (const auto &p : out.annotations) {
        ++counts[*p.intended_category];
        if (consumes_gold(*p.intended_category)) ++consumed;
      }
      counts[E::kMissing] += doc.gold->size() - consumed;
    }
    for (auto c : kAllCategories) {
      const double freq = static_cast<double>(counts[c]) / gold_total;
      const double want = c == E::kUnnecessary ? s.spurious_rate : s.categories[c];
      worst = std::max(worst, std::abs(freq - want));
    }
    detail << fmt("r=%.1f correct %.4f; ", r, static_cast<double>(counts[E::kCorrect]) / gold_total);
  }
  detail << fmt("max |empirical - expected| %.4f (tol 0.02) over 10000 entities each", worst);
  return {worst <= 0.02, detail.str()};
}

Outcome oracle_agreement() {
  std::size_t mismatches = 0, checked = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    oracle::SyntheticOptions opts;
    opts.documents = 20;
    opts.entity_density = 0.2 + 0.02 * static_cast<double>(seed % 10);
    const Corpus corpus = oracle::synthetic_corpus(5000 + seed, opts);
    const double r = static_cast<double>(seed % 11) / 10.0;
    const auto unit = simulated_ml_unit(corpus, r, seed);
    for (const auto &doc : corpus.documents) {
      const auto pre = unit->predict(doc);
      std::vector<Annotation> produced;
      std::size_t consumed = 0;
      for (const auto &p : pre) {
        produced.push_back(p.annotation);
        if (consumes_gold(*p.intended_category)) ++consumed;
      }
      const auto cls = classify(produced, *doc.gold);
      for (const auto &m : cls.matches) {
        if (!m.produced_index) continue;
        ++checked;
        if (m.category != *pre[*m.produced_index].intended_category) ++mismatches;
      }
      if (cls.counts[E::kMissing] != doc.gold->size() - consumed) ++mismatches;
    }
  }
  return {mismatches == 0 && checked > 0,
          fmt("%.0f mismatches over %.0f produced annotations in 100 corpora", mismatches, checked)};
}

std::vector<Annotation> random_annotations(Rng &rng, std::size_t n_tokens) {
  std::vector<Annotation> out;
  std::size_t pos = 0;
  while (pos < n_tokens) {
    pos += rng.below(4);
    if (pos >= n_tokens) break;
    const std::size_t len = 1 + rng.below(std::min<std::size_t>(4, n_tokens - pos));
    out.push_back({{pos, pos + len}, rng.bernoulli(0.5) ? "PER" : "ORG"});
    pos += len;
  }
  return out;
}

Outcome scoring_conservation() {
  Rng rng(99);
  std::size_t violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + rng.below(40);
    const auto gold = random_annotations(rng, n);
    const auto produced = random_annotations(rng, n);
    const auto c = classify(produced, gold).counts;
    const std::size_t shared = c[E::kCorrect] + c[E::kCorrectLabelWrongSpan] +
                               c[E::kWrongLabelCorrectSpan] + c[E::kWrongLabelWrongSpan];
    if (shared + c[E::kMissing] != gold.size()) ++violations;
    if (shared + c[E::kUnnecessary] != produced.size()) ++violations;
  }
  return {violations == 0, fmt("%.0f violations over 1000 random cases", violations)};
}

Outcome ttest_oracle() {
  double worst = 0;
  std::size_t cases = 0;
  for (std::size_t df = 1; df <= 60; ++df) {
    const std::size_t n = df + 1;
    // Centred values with unit sample sd, shifted to hit a target t.
    std::vector<double> e(n);
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      e[i] = static_cast<double>(i) - static_cast<double>(n - 1) / 2.0;
      ss += e[i] * e[i];
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    for (double t = 0.0; t <= 10.0 + 1e-9; t += 0.25) {
      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = e[i] / sd + t / std::sqrt(static_cast<double>(n));
      const auto res = one_sample_ttest(v);
      const double want = oracle::t_two_tailed_p(t, static_cast<double>(df));
      worst = std::max(worst, std::abs(res.p_two_tailed - want));
      worst = std::max(worst, std::abs(student_t_two_tailed_p(-t, static_cast<double>(df)) - want));
      ++cases;
    }
  }
  const double v[] = {2, 4, 6};
  const auto fx = one_sample_ttest(v);
  const bool fixture = std::abs(fx.t - 3.4641) <= 1e-4 && std::abs(fx.p_two_tailed - 0.0742) <= 5e-4;
  return {worst <= 1e-4 && fixture,
          fmt("max |p - integral| %.2e over %.0f (df, t) pairs (tol 1e-4); ", worst, cases) +
              fmt("[2,4,6]: t = %.4f, p = %.5f", fx.t, fx.p_two_tailed)};
}

Outcome cost_projection_check() {
  const double a = cost_projection(37926, 8.2, 8), b = cost_projection(37926, 6.5, 8);
  return {std::abs(a - 10.80) <= 0.01 && std::abs(b - 8.56) <= 0.01,
          fmt("(37926, 8.2 s) -> %.4f, (37926, 6.5 s) -> %.4f workdays", a, b)};
}

// 73 documents, 310 entities in total, uneven per-document counts.
std::vector<Document> study_shaped(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> counts(73, 1);
  std::vector<double> weight(73);
  for (auto &w : weight) w = std::pow(rng.uniform(0.05, 1.0), 2.0);
  double total_w = 0;
  for (double w : weight) total_w += w;
  for (std::size_t placed = 73; placed < 310; ++placed) {
    double u = rng.uniform() * total_w;
    std::size_t i = 0;
    while (i + 1 < weight.size() && u >= weight[i]) u -= weight[i++];
    ++counts[i];
  }
  std::vector<Document> docs;
  for (std::size_t d = 0; d < counts.size(); ++d) {
    std::string text;
    std::vector<Annotation> gold;
    for (std::size_t k = 0; k < counts[d]; ++k) {
      text += "a " + std::string("E ");
      gold.push_back({{2 * k + 1, 2 * k + 2}, "PER"});
    }
    text += "end";
    Document doc = make_document("s" + std::to_string(d), text);
    doc.gold = std::move(gold);
    docs.push_back(std::move(doc));
  }
  return docs;
}

Outcome partitioning() {
  std::size_t worst_excess = 0, corpora = 0;
  std::ostringstream first;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto docs = study_shaped(seed);
    std::size_t total = 0, largest = 0;
    for (const auto &d : docs) {
      total += d.gold->size();
      largest = std::max(largest, d.gold->size());
    }
    if (total != 310) return {false, "generator produced " + std::to_string(total) + " entities"};
    const auto blocks = partition_blocks(docs, 4);
    std::size_t lo = SIZE_MAX, hi = 0, assigned = 0;
    for (const auto &b : blocks) {
      lo = std::min(lo, b.entity_total);
      hi = std::max(hi, b.entity_total);
      assigned += b.document_ids.size();
    }
    if (assigned != docs.size()) return {false, "documents lost by partition_blocks"};
    if (hi - lo > largest) worst_excess = std::max(worst_excess, hi - lo - largest);
    if (seed == 0) {
      first << "seed 0 totals";
      for (const auto &b : blocks) first << ' ' << b.entity_total;
      first << " (max doc " << largest << ")";
    }
    ++corpora;
  }
  std::vector<Document> fx;
  const std::size_t sizes[] = {5, 4, 3, 2, 1, 1};
  for (std::size_t i = 0; i < 6; ++i) {
    std::string text;
    std::vector<Annotation> gold;
    for (std::size_t k = 0; k < sizes[i]; ++k) {
      text += "a E ";
      gold.push_back({{2 * k + 1, 2 * k + 2}, "PER"});
    }
    Document doc = make_document("f" + std::to_string(i), text + "end");
    doc.gold = gold;
    fx.push_back(std::move(doc));
  }
  const auto two = partition_blocks(fx, 2);
  const bool fixture = two.size() == 2 && two[0].entity_total == 8 && two[1].entity_total == 8;
  return {worst_excess == 0 && fixture,
          fmt("%.0f study-shaped corpora, spread within max document count in all; ", corpora) +
              first.str() + "; [5,4,3,2,1,1] into 2 -> (" +
              std::to_string(two.at(0).entity_total) + ", " + std::to_string(two.at(1).entity_total) +
              ")"};
}

Outcome state_machine() {
  Rng rng(4242);
  std::size_t partition_violations = 0, error_mismatches = 0, steps = 0;
  std::map<std::string, std::size_t> fired;
  for (int seq = 0; seq < 1000; ++seq) {
    oracle::SyntheticOptions opts;
    opts.documents = 1 + rng.below(10);
    opts.max_tokens = 12;
    const Corpus c = oracle::synthetic_corpus(90000 + seq, opts);
    ProjectState s;
    s.labels = c.labels;
    s.corpus = c.documents;
    const auto unit = simulated_ml_unit(c, 0.5, seq);
    std::vector<AnnotationSet> submitted;
    auto submission = [&](const std::string &id) {
      AnnotationSet set;
      set.document_id = id;
      set.annotator_id = "a";
      set.annotations = *s.find_document(id)->gold;
      set.started_at = simulation_epoch();
      set.finished_at = simulation_epoch();
      return set;
    };
    for (int step = 0; step < 25; ++step, ++steps) {
      switch (rng.below(4)) {
        case 0: {
          const bool pending = s.pending.has_value();
          const bool empty = s.unannotated_ids().empty();
          try {
            s = open_iteration(s, SelectionStrategy::random(rng.next()), 1 + rng.below(4), *unit)
                    .first;
            submitted.clear();
            if (pending || empty) ++error_mismatches;
          } catch (const ConflictError &) {
            ++fired["pending_conflict"];
            if (!pending) ++error_mismatches;
          } catch (const EmptyCorpusError &) {
            ++fired["empty_corpus"];
            if (pending || !empty) ++error_mismatches;
          }
          break;
        }
        case 1: {
          if (!s.pending) break;
          // Mostly planned documents, sometimes a stray one.
          std::string id;
          if (rng.bernoulli(0.9)) {
            const auto &ids = s.pending->document_ids;
            id = ids[rng.below(ids.size())];
          } else {
            id = s.corpus[rng.below(s.corpus.size())].id;
          }
          bool dup = false;
          for (const auto &x : submitted) dup |= x.document_id == id;
          if (!dup) submitted.push_back(submission(id));
          break;
        }
        case 2: {
          std::set<std::string> got, want;
          for (const auto &x : submitted) got.insert(x.document_id);
          if (s.pending) want.insert(s.pending->document_ids.begin(), s.pending->document_ids.end());
          const bool exact = s.pending && got == want;
          try {
            s = merge_back(s, submitted, nullptr);
            submitted.clear();
            if (!exact) ++error_mismatches;
          } catch (const ConflictError &) {
            ++fired["merge_without_iteration"];
            if (s.pending) ++error_mismatches;
          } catch (const IncompleteIterationError &e) {
            ++fired["incomplete_iteration"];
            if (exact || !s.pending) ++error_mismatches;
            std::set<std::string> missing, unexpected;
            for (const auto &id : want)
              if (!got.count(id)) missing.insert(id);
            for (const auto &id : got)
              if (!want.count(id)) unexpected.insert(id);
            if (std::set<std::string>(e.missing().begin(), e.missing().end()) != missing ||
                std::set<std::string>(e.unexpected().begin(), e.unexpected().end()) != unexpected)
              ++error_mismatches;
            // Drop strays so the iteration can finish.
            std::erase_if(submitted, [&](const AnnotationSet &x) { return !want.count(x.document_id); });
          }
          break;
        }
        case 3:
          if (s.pending && rng.bernoulli(0.25)) {
            std::erase_if(submitted,
                          [&](const AnnotationSet &x) { return !s.is_pending(x.document_id); });
            s = complete_partial(s, submitted, nullptr);
            submitted.clear();
          }
          break;
      }
      std::size_t annotated = 0, pending = 0;
      for (const auto &d : s.corpus) {
        const bool a = s.is_annotated(d.id), p = s.is_pending(d.id);
        if (a && p) ++partition_violations;
        annotated += a;
        pending += p;
      }
      if (annotated != s.annotated.size() ||
          annotated + pending + s.unannotated_ids().size() != s.corpus.size())
        ++partition_violations;
    }
  }
  std::ostringstream d;
  d << steps << " steps in 1000 sequences, " << partition_violations << " partition violations, "
    << error_mismatches << " error mismatches; fired:";
  for (const auto &[k, v] : fired) d << ' ' << k << '=' << v;
  const bool all_fired = fired["pending_conflict"] > 0 && fired["incomplete_iteration"] > 0;
  return {partition_violations == 0 && error_mismatches == 0 && all_fired, d.str()};
}

Outcome end_to_end_determinism() {
  TempDir dir;
  oracle::SyntheticOptions opts;
  opts.documents = 40;
  opts.max_tokens = 40;
  write_text(dir.path() / "corpus.json", corpus_to_json(oracle::synthetic_corpus(73, opts)).dump());
  const json base = {{"corpus", "corpus.json"}, {"k_blocks", 4}, {"target_recall", 0.5},
                     {"training_documents", 4}, {"seed", 5}};
  write_text(dir.path() / "plan.json", base.dump());
  const auto plan = (dir.path() / "plan.json").string();
  const std::vector<std::string> args = {"simulate", "--plan", plan, "--annotators", "6",
                                         "--seed", "17", "--spread", "0.03"};
  const auto a = run_binary(ANNOCYCLE_BINARY, args);
  const auto b = run_binary(ANNOCYCLE_BINARY, args);
  if (a.exit_code != 0) return {false, "simulate exited " + std::to_string(a.exit_code) + ": " + a.err};
  const bool identical = a.out == b.out && !a.out.empty();

  AnnotatorBehavior perfect;
  perfect.p_fix_missing = perfect.p_fix_error = perfect.p_remove_spurious = 1.0;
  perfect.seconds_sd = 0.0;
  json pcfg = base;
  pcfg["behavior"] = behavior_to_json(perfect);
  write_text(dir.path() / "perfect.json", pcfg.dump());
  const auto p = run_binary(ANNOCYCLE_BINARY, {"simulate", "--plan",
                                               (dir.path() / "perfect.json").string(),
                                               "--annotators", "4", "--seed", "1"});
  if (p.exit_code != 0) return {false, "perfect simulate failed: " + p.err};
  const json report = json::parse(p.out);
  std::size_t blocks = 0, imperfect = 0, nonzero = 0;
  for (const auto &row : report.at("per_block")) {
    if (row.at("metrics").is_null()) continue;
    ++blocks;
    if (row.at("metrics").at("percent_correct") != 1.0) ++imperfect;
  }
  for (const auto &dim : report.at("condition_comparison").at("dimensions"))
    if (dim.at("mean_diff") != 0.0) ++nonzero;
  std::ostringstream d;
  d << "two runs " << (identical ? "byte-identical" : "DIFFER") << " (" << a.out.size()
    << " bytes); perfect behavior: " << imperfect << " of " << blocks
    << " blocks below 1.0, " << nonzero << " non-zero condition differences";
  return {identical && imperfect == 0 && blocks > 0 && nonzero == 0, d.str()};
}

Outcome server_durability() {
  // Crash injection: a child acknowledges each accepted submission over a
  // pipe and is SIGKILLed at a random point.
  Rng rng(31337);
  std::size_t lost = 0, acked_total = 0;
  for (int round = 0; round < 20; ++round) {
    TempDir dir;
    oracle::SyntheticOptions opts;
    opts.documents = 30;
    opts.max_tokens = 20;
    const Corpus c = oracle::synthetic_corpus(700 + round, opts);
    {
      Service s(dir.path());
      if (call(s, "POST", "/projects", create_body(c)).status != 201)
        return {false, "project creation failed"};
    }
    int ack[2];
    if (pipe(ack) != 0) return {false, "pipe failed"};
    const std::uint64_t every = rng.below(5);
    const pid_t pid = fork();
    if (pid == 0) {
      close(ack[0]);
      ServiceOptions o;
      o.store.snapshot_every = every;
      Service s(dir.path(), o);
      for (;;) {
        auto it = call(s, "POST", "/projects/p-0001/iterations", {{"size", 3}});
        if (it.body.value("complete", false)) break;
        for (const auto &d : it.body.at("documents")) {
          const std::string id = d.at("document_id");
          const Document *doc = nullptr;
          for (const auto &x : c.documents)
            if (x.id == id) doc = &x;
          if (call(s, "PUT", "/projects/p-0001/documents/" + id + "/annotations",
                   gold_submission(*doc, "a"))
                  .status != 200)
            _exit(4);
          const char b = 'y';
          if (write(ack[1], &b, 1) != 1) _exit(3);
        }
      }
      for (;;) pause();
    }
    close(ack[1]);
    const std::size_t wait_for = rng.below(c.documents.size() + 1);
    std::size_t acked = 0;
    char b;
    while (acked < wait_for && read(ack[0], &b, 1) == 1) ++acked;
    std::this_thread::sleep_for(std::chrono::microseconds(rng.below(2000)));
    kill(pid, SIGKILL);
    waitpid(pid, nullptr, 0);
    while (read(ack[0], &b, 1) == 1) ++acked;
    close(ack[0]);
    Service s(dir.path());
    const auto rec = s.record("p-0001");
    std::set<std::string> kept;
    for (const auto &[id, set] : rec.state.annotated) kept.insert(id);
    for (const auto &x : rec.submissions) kept.insert(x.document_id);
    if (kept.size() < acked) lost += acked - kept.size();
    acked_total += acked;
  }

  // Replay: live state == snapshot + tail == events alone.
  std::size_t differ = 0;
  for (int seq = 0; seq < 100; ++seq) {
    TempDir dir;
    oracle::SyntheticOptions opts;
    opts.documents = 10;
    opts.max_tokens = 20;
    const Corpus c = oracle::synthetic_corpus(8000 + seq, opts);
    ServiceOptions o;
    o.store.snapshot_every = rng.below(6);
    ProjectRecord live;
    {
      Service s(dir.path(), o);
      call(s, "POST", "/projects", create_body(c));
      const int steps = 10 + static_cast<int>(rng.below(30));
      for (int i = 0; i < steps; ++i) random_step(s, "p-0001", c, rng, seq % 10 == 0);
      live = s.record("p-0001");
    }
    if (!(Service(dir.path()).record("p-0001") == live)) ++differ;
    fs::remove(dir.path() / "projects" / "p-0001" / "snapshot.json");
    if (!(Service(dir.path()).record("p-0001") == live)) ++differ;
  }
  std::ostringstream d;
  d << acked_total << " acknowledged submissions over 20 SIGKILLs, " << lost
    << " lost; 100 interaction sequences, " << differ << " replay mismatches";
  return {lost == 0 && differ == 0 && acked_total > 0, d.str()};
}

}  // namespace

int main() {
  Runner r;
  r.run("distribution scaling", distribution_scaling, 1);
  r.run("degradation convergence", degradation_convergence, 10);
  r.run("generator/scorer oracle agreement", oracle_agreement, 30);
  r.run("scoring conservation", scoring_conservation);
  r.run("t-test oracle", ttest_oracle);
  r.run("cost projection", cost_projection_check);
  r.run("partitioning", partitioning);
  r.run("work-cycle state machine", state_machine);
  r.run("end-to-end determinism", end_to_end_determinism);
  r.run("server durability", server_durability);
  const int before = r.failures();
  r.run("no secondary component", [&] {
    // Everything above ran from this binary and the CLI, both C++ only.
    return Outcome{before == 0 && fs::exists(ANNOCYCLE_BINARY),
                   "criteria above ran against C++ targets only"};
  });
  std::cout << (r.failures() == 0 ? "ALL PASS" : std::to_string(r.failures()) + " FAILED")
            << std::endl;
  return r.failures() == 0 ? 0 : 1;
}
