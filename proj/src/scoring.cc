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

#include "annocycle/scoring.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "annocycle/errors.h"

namespace annocycle {
namespace {

using nlohmann::json;
using E = ErrorCategory;

TokenSpan anchor(const Match &m) {
  return m.gold ? m.gold->span : m.produced->span;
}

std::string csv_field(const std::string &s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

CategoryCounts &CategoryCounts::operator+=(const CategoryCounts &other) {
  for (std::size_t i = 0; i < kNumCategories; ++i) n_[i] += other.n_[i];
  return *this;
}

std::size_t CategoryCounts::gold_total() const {
  return (*this)[E::kCorrect] + (*this)[E::kCorrectLabelWrongSpan] +
         (*this)[E::kWrongLabelCorrectSpan] + (*this)[E::kWrongLabelWrongSpan] +
         (*this)[E::kMissing];
}

std::size_t CategoryCounts::produced_total() const {
  return (*this)[E::kCorrect] + (*this)[E::kCorrectLabelWrongSpan] +
         (*this)[E::kWrongLabelCorrectSpan] + (*this)[E::kWrongLabelWrongSpan] +
         (*this)[E::kUnnecessary];
}

Classification classify(std::span<const Annotation> produced,
                        std::span<const Annotation> gold) {
  check_non_overlapping(produced, "produced annotations");
  check_non_overlapping(gold, "gold annotations");

  std::vector<bool> p_used(produced.size()), g_used(gold.size());
  Classification cls;
  auto add = [&](std::optional<std::size_t> pi, std::optional<std::size_t> gi,
                 E category) {
    Match m{pi, gi, std::nullopt, std::nullopt, category};
    if (pi) {
      m.produced = produced[*pi];
      p_used[*pi] = true;
    }
    if (gi) {
      m.gold = gold[*gi];
      g_used[*gi] = true;
    }
    cls.counts[category] += 1;
    cls.matches.push_back(std::move(m));
  };

  // Pass 1: identical spans. Non-overlap makes each span unique per list.
  std::map<TokenSpan, std::size_t> gold_by_span;
  for (std::size_t gi = 0; gi < gold.size(); ++gi) gold_by_span[gold[gi].span] = gi;
  for (std::size_t pi = 0; pi < produced.size(); ++pi) {
    auto it = gold_by_span.find(produced[pi].span);
    if (it == gold_by_span.end()) continue;
    add(pi, it->second,
        produced[pi].label == gold[it->second].label ? E::kCorrect
                                                     : E::kWrongLabelCorrectSpan);
  }

  // Pass 2: greedy by overlap size.
  struct Pair {
    std::size_t overlap, pi, gi;
  };
  std::vector<Pair> pairs;
  for (std::size_t pi = 0; pi < produced.size(); ++pi) {
    if (p_used[pi]) continue;
    for (std::size_t gi = 0; gi < gold.size(); ++gi) {
      if (g_used[gi]) continue;
      const std::size_t ov = produced[pi].span.overlap(gold[gi].span);
      if (ov > 0) pairs.push_back({ov, pi, gi});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [&](const Pair &a, const Pair &b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (gold[a.gi].span != gold[b.gi].span)
      return gold[a.gi].span < gold[b.gi].span;
    const auto sa = produced[a.pi].span.size(), sb = produced[b.pi].span.size();
    if (sa != sb) return sa < sb;
    return produced[a.pi].span < produced[b.pi].span;
  });
  for (const auto &pair : pairs) {
    if (p_used[pair.pi] || g_used[pair.gi]) continue;
    add(pair.pi, pair.gi,
        produced[pair.pi].label == gold[pair.gi].label
            ? E::kCorrectLabelWrongSpan
            : E::kWrongLabelWrongSpan);
  }

  // Pass 3: leftovers.
  for (std::size_t pi = 0; pi < produced.size(); ++pi)
    if (!p_used[pi]) add(pi, std::nullopt, E::kUnnecessary);
  for (std::size_t gi = 0; gi < gold.size(); ++gi)
    if (!g_used[gi]) add(std::nullopt, gi, E::kMissing);

  std::stable_sort(cls.matches.begin(), cls.matches.end(),
                   [](const Match &a, const Match &b) {
                     return anchor(a) < anchor(b);
                   });
  return cls;
}

SampleStats sample_stats(std::span<const double> values) {
  if (values.empty()) throw InsufficientDataError("empty sample");
  SampleStats s;
  s.n = values.size();
  const bool constant = std::all_of(values.begin(), values.end(),
                                    [&](double v) { return v == values[0]; });
  if (constant) {
    s.mean = values[0];
    return s;
  }
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

MetricsReport metrics(const CategoryCounts &counts, std::size_t gold_count,
                      std::span<const double> timings) {
  if (gold_count == 0) throw DomainError("metrics undefined for zero gold");
  if (counts.gold_total() > gold_count) {
    throw InputError("classification accounts for " +
                     std::to_string(counts.gold_total()) +
                     " gold entities but gold_count is " +
                     std::to_string(gold_count));
  }
  MetricsReport m;
  m.counts = counts;
  m.gold_count = gold_count;
  m.produced_count = counts.produced_total();
  const double correct = static_cast<double>(counts[E::kCorrect]);
  m.percent_correct = correct / static_cast<double>(gold_count);
  m.recall = m.percent_correct;
  m.missing_count = counts[E::kMissing];
  m.precision =
      m.produced_count ? correct / static_cast<double>(m.produced_count) : 0.0;
  m.f1 = m.precision + m.recall > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  if (!timings.empty()) m.seconds_per_correct_annotation = sample_stats(timings);
  return m;
}

MetricsReport metrics(const Classification &cls, std::size_t gold_count,
                      std::span<const double> timings) {
  return metrics(cls.counts, gold_count, timings);
}

double student_t_two_tailed_p(double t, double df) {
  if (t == 0.0) return 1.0;
  boost::math::students_t dist(df);
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return std::clamp(p, 0.0, 1.0);
}

TTestResult one_sample_ttest(std::span<const double> diffs) {
  if (diffs.size() < 2) {
    throw InsufficientDataError("t-test needs at least 2 values, got " +
                                std::to_string(diffs.size()));
  }
  const SampleStats s = sample_stats(diffs);
  TTestResult r;
  r.n = s.n;
  r.mean_diff = s.mean;
  r.sd = s.sd;
  r.df = s.n - 1;
  if (s.sd == 0.0) {
    if (s.mean != 0.0) {
      throw DegenerateSampleError(
          "all differences equal a nonzero value; t is undefined");
    }
    r.t = 0.0;
    r.p_two_tailed = 1.0;
    return r;
  }
  r.t = s.mean / (s.sd / std::sqrt(static_cast<double>(s.n)));
  r.p_two_tailed = student_t_two_tailed_p(r.t, static_cast<double>(r.df));
  return r;
}

double cost_projection(double annotation_count, double seconds_per_annotation,
                       double hours_per_day) {
  if (!(annotation_count >= 0.0) || !(seconds_per_annotation >= 0.0)) {
    throw DomainError("count and seconds must be non-negative");
  }
  if (!(hours_per_day > 0.0)) throw DomainError("hours per day must be > 0");
  return annotation_count * seconds_per_annotation / 3600.0 / hours_per_day;
}

ConditionReport condition_differences(std::span<const MetricsReport> assisted,
                                      std::span<const MetricsReport> unassisted) {
  if (assisted.size() != unassisted.size()) {
    throw InputError("assisted and unassisted lists differ in length (" +
                     std::to_string(assisted.size()) + " vs " +
                     std::to_string(unassisted.size()) + ")");
  }
  ConditionReport report;
  report.annotators = assisted.size();

  std::vector<double> pc, missing, seconds;
  double missing_a = 0.0, missing_u = 0.0, reduction_sum = 0.0;
  std::size_t reduction_n = 0;
  for (std::size_t i = 0; i < assisted.size(); ++i) {
    const auto &a = assisted[i];
    const auto &u = unassisted[i];
    pc.push_back(a.percent_correct - u.percent_correct);
    missing.push_back(static_cast<double>(a.missing_count) -
                      static_cast<double>(u.missing_count));
    if (a.seconds_per_correct_annotation && u.seconds_per_correct_annotation) {
      seconds.push_back(a.seconds_per_correct_annotation->mean -
                        u.seconds_per_correct_annotation->mean);
    }
    missing_a += static_cast<double>(a.missing_count);
    missing_u += static_cast<double>(u.missing_count);
    if (u.missing_count > 0) {
      reduction_sum += 1.0 - static_cast<double>(a.missing_count) /
                                 static_cast<double>(u.missing_count);
      ++reduction_n;
    }
  }

  auto dimension = [](std::string name, const std::vector<double> &diffs) {
    DimensionComparison d;
    d.name = std::move(name);
    d.n = diffs.size();
    if (diffs.empty()) {
      d.note = "no annotator has measurements in both conditions";
      return d;
    }
    const SampleStats s = sample_stats(diffs);
    d.mean_diff = s.mean;
    d.standard_error = s.sd / std::sqrt(static_cast<double>(s.n));
    if (s.n < 2) {
      d.note = "t-test needs at least 2 annotators";
    } else {
      try {
        d.ttest = one_sample_ttest(diffs);
      } catch (const DegenerateSampleError &e) {
        d.note = e.what();
      }
    }
    return d;
  };
  report.dimensions.push_back(dimension("percent_correct", pc));
  report.dimensions.push_back(dimension("missing_count", missing));
  report.dimensions.push_back(
      dimension("seconds_per_correct_annotation", seconds));

  if (missing_u > 0.0) report.missing_reduction_pooled = 1.0 - missing_a / missing_u;
  if (reduction_n > 0) {
    report.missing_reduction_per_annotator =
        reduction_sum / static_cast<double>(reduction_n);
  }
  return report;
}

ConditionReport compare_conditions(std::span<const MetricsReport> assisted,
                                   std::span<const MetricsReport> unassisted) {
  if (assisted.size() != unassisted.size()) {
    throw InputError("assisted and unassisted lists differ in length (" +
                     std::to_string(assisted.size()) + " vs " +
                     std::to_string(unassisted.size()) + ")");
  }
  if (assisted.size() < 2) {
    throw InputError("condition comparison needs at least 2 annotators");
  }
  return condition_differences(assisted, unassisted);
}

DocumentScore score_document(const ScoringInput &input) {
  DocumentScore s;
  s.document_id = input.document_id;
  s.annotator_id = input.annotator_id;
  s.classification = classify(input.produced, input.gold);
  for (const auto &m : s.classification.matches) {
    if (m.category != E::kCorrect || !m.produced_index) continue;
    if (*m.produced_index < input.produced_seconds.size() &&
        input.produced_seconds[*m.produced_index]) {
      s.correct_seconds.push_back(*input.produced_seconds[*m.produced_index]);
    }
  }
  if (!input.gold.empty()) {
    s.metrics = metrics(s.classification, input.gold.size(), s.correct_seconds);
  }
  return s;
}

ScoreSummary score_documents(std::span<const ScoringInput> inputs) {
  ScoreSummary summary;
  for (const auto &in : inputs) {
    auto s = score_document(in);
    summary.counts += s.classification.counts;
    summary.gold_count += in.gold.size();
    summary.correct_seconds.insert(summary.correct_seconds.end(),
                                   s.correct_seconds.begin(),
                                   s.correct_seconds.end());
    summary.per_document.push_back(std::move(s));
  }
  return summary;
}

std::optional<MetricsReport> ScoreSummary::aggregate() const {
  if (gold_count == 0) return std::nullopt;
  return metrics(counts, gold_count, correct_seconds);
}

json counts_to_json(const CategoryCounts &counts) {
  json j = json::object();
  for (auto c : kAllCategories) j[std::string(category_name(c))] = counts[c];
  return j;
}

json metrics_to_json(const MetricsReport &m) {
  json j = {{"counts", counts_to_json(m.counts)},
            {"gold_count", m.gold_count},
            {"produced_count", m.produced_count},
            {"percent_correct", m.percent_correct},
            {"missing_count", m.missing_count},
            {"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1}};
  if (m.seconds_per_correct_annotation) {
    const auto &s = *m.seconds_per_correct_annotation;
    j["seconds_per_correct_annotation"] = {
        {"n", s.n}, {"mean", s.mean}, {"sd", s.sd}};
  } else {
    j["seconds_per_correct_annotation"] = nullptr;
  }
  return j;
}

json classification_to_json(const Classification &cls) {
  auto span_json = [](const std::optional<Annotation> &a) -> json {
    if (!a) return nullptr;
    return {{"start_token", a->span.begin},
            {"end_token", a->span.end},
            {"label", a->label}};
  };
  json matches = json::array();
  for (const auto &m : cls.matches) {
    matches.push_back({{"category", category_name(m.category)},
                       {"produced", span_json(m.produced)},
                       {"gold", span_json(m.gold)}});
  }
  return {{"matches", std::move(matches)}, {"counts", counts_to_json(cls.counts)}};
}

json ttest_to_json(const TTestResult &t) {
  return {{"n", t.n},   {"mean_diff", t.mean_diff}, {"sd", t.sd},
          {"t", t.t},   {"df", t.df},               {"p_two_tailed", t.p_two_tailed}};
}

json condition_report_to_json(const ConditionReport &r) {
  json dims = json::object();
  for (const auto &d : r.dimensions) {
    json j = {{"n", d.n},
              {"mean_diff", d.mean_diff},
              {"standard_error", d.standard_error},
              {"ttest", d.ttest ? ttest_to_json(*d.ttest) : json(nullptr)}};
    if (d.note) j["note"] = *d.note;
    dims[d.name] = std::move(j);
  }
  auto opt = [](const std::optional<double> &v) -> json {
    return v ? json(*v) : json(nullptr);
  };
  return {{"annotators", r.annotators},
          {"dimensions", std::move(dims)},
          {"missing_reduction_pooled", opt(r.missing_reduction_pooled)},
          {"missing_reduction_per_annotator",
           opt(r.missing_reduction_per_annotator)}};
}

json score_report_to_json(const ScoreSummary &summary,
                          const std::optional<ConditionReport> &cmp) {
  json per_doc = json::array();
  for (const auto &s : summary.per_document) {
    json j = {{"document_id", s.document_id},
              {"annotator_id", s.annotator_id},
              {"classification", classification_to_json(s.classification)},
              {"metrics", s.metrics ? metrics_to_json(*s.metrics) : json(nullptr)}};
    per_doc.push_back(std::move(j));
  }
  const auto agg = summary.aggregate();
  json aggregate = agg ? metrics_to_json(*agg)
                       : json{{"counts", counts_to_json(summary.counts)},
                              {"gold_count", 0}};
  return {{"per_document", std::move(per_doc)},
          {"aggregate", std::move(aggregate)},
          {"ttests", cmp ? condition_report_to_json(*cmp) : json::object()}};
}

void write_score_csv(std::ostream &out, const ScoreSummary &summary) {
  out << "annotator_id,document_id,gold_count,produced_count";
  for (auto c : kAllCategories) out << ',' << category_name(c);
  out << ",percent_correct,precision,recall,f1\n";
  for (const auto &s : summary.per_document) {
    const auto &counts = s.classification.counts;
    out << csv_field(s.annotator_id) << ',' << csv_field(s.document_id) << ','
        << counts.gold_total() << ',' << counts.produced_total();
    for (auto c : kAllCategories) out << ',' << counts[c];
    if (s.metrics) {
      out << ',' << csv_number(s.metrics->percent_correct) << ','
          << csv_number(s.metrics->precision) << ','
          << csv_number(s.metrics->recall) << ',' << csv_number(s.metrics->f1);
    } else {
      out << ",,,,";
    }
    out << '\n';
  }
}

}  // namespace annocycle
