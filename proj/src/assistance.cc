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

#include "annocycle/assistance.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "annocycle/errors.h"
#include "annocycle/rng.h"

namespace annocycle {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {
    "correct",
    "correct_label_wrong_span",
    "wrong_label_correct_span",
    "wrong_label_wrong_span",
    "unnecessary",
    "missing",
};

// Categories drawn per gold entity, in draw order.
constexpr std::array<ErrorCategory, 5> kGoldDraw = {
    ErrorCategory::kCorrect,
    ErrorCategory::kCorrectLabelWrongSpan,
    ErrorCategory::kWrongLabelCorrectSpan,
    ErrorCategory::kWrongLabelWrongSpan,
    ErrorCategory::kMissing,
};

constexpr double kCorrectConfidenceLo = 0.7;
constexpr double kErrorConfidenceLo = 0.3;

bool is_free(const TokenSpan &candidate, std::span<const TokenSpan> taken) {
  return std::none_of(taken.begin(), taken.end(), [&](const TokenSpan &t) {
    return t.overlaps(candidate);
  });
}

}  // namespace

std::string_view category_name(ErrorCategory c) {
  return kCategoryNames[index_of(c)];
}

std::optional<ErrorCategory> parse_category(std::string_view name) {
  for (auto c : kAllCategories)
    if (category_name(c) == name) return c;
  return std::nullopt;
}

bool consumes_gold(ErrorCategory c) { return c != ErrorCategory::kUnnecessary; }

CategoryDistribution::CategoryDistribution(
    const std::array<double, kNumCategories> &p)
    : p_(p) {
  for (auto c : kAllCategories) {
    const double v = p_[index_of(c)];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError("probability of " + std::string(category_name(c)) +
                        " outside [0,1]: " + std::to_string(v));
    }
  }
  if (std::abs(sum() - 1.0) > 1e-9) {
    throw DomainError("category probabilities sum to " +
                      std::to_string(sum()) + ", not 1");
  }
}

double CategoryDistribution::sum() const {
  return std::accumulate(p_.begin(), p_.end(), 0.0);
}

const CategoryDistribution &base_distribution() {
  static const CategoryDistribution base({0.578, 0.078, 0.031, 0.000, 0.015,
                                          0.298});
  return base;
}

ScaledDistribution scale_distribution(const CategoryDistribution &base,
                                      double target_recall) {
  if (!(target_recall >= 0.0 && target_recall <= 1.0)) {
    throw DomainError("target recall " + std::to_string(target_recall) +
                      " outside [0,1]");
  }
  using E = ErrorCategory;
  const double error_weight = base[E::kCorrectLabelWrongSpan] +
                              base[E::kWrongLabelCorrectSpan] +
                              base[E::kWrongLabelWrongSpan] + base[E::kMissing];
  std::array<double, kNumCategories> p{};
  p[index_of(E::kCorrect)] = target_recall;
  double spurious = 0.0;
  if (target_recall < 1.0) {
    if (!(error_weight > 0.0)) {
      throw DomainError(
          "base distribution has no error mass to scale to recall < 1");
    }
    const double rest = 1.0 - target_recall;
    for (auto c : {E::kCorrectLabelWrongSpan, E::kWrongLabelCorrectSpan,
                   E::kWrongLabelWrongSpan, E::kMissing}) {
      p[index_of(c)] = rest * base[c] / error_weight;
    }
    spurious = rest * base[E::kUnnecessary] / error_weight;
  }
  return {CategoryDistribution(p), spurious};
}

std::vector<TokenSpan> span_perturbations(TokenSpan source,
                                          std::size_t token_count) {
  std::vector<TokenSpan> out;
  auto consider = [&](long begin, long end) {
    if (begin < 0 || end > static_cast<long>(token_count) || end <= begin)
      return;
    const TokenSpan s{static_cast<std::size_t>(begin),
                      static_cast<std::size_t>(end)};
    if (s == source || !s.overlaps(source)) return;
    out.push_back(s);
  };
  const long b = static_cast<long>(source.begin);
  const long e = static_cast<long>(source.end);
  consider(b - 1, e);
  consider(b + 1, e);
  consider(b, e - 1);
  consider(b, e + 1);
  consider(b - 1, e - 1);
  consider(b + 1, e + 1);
  return out;
}

DegradeResult degrade(const Document &doc, std::span<const Label> labels,
                      const CategoryDistribution &dist, double spurious_rate,
                      std::uint64_t seed) {
  using E = ErrorCategory;
  if (!doc.gold) throw PredictionError(doc.id, "document has no gold");
  if (!(spurious_rate >= 0.0 && spurious_rate <= 1.0)) {
    throw DomainError("spurious rate outside [0,1]");
  }
  if (labels.empty()) throw DomainError("empty label set");

  std::array<double, kGoldDraw.size()> cumulative{};
  double total = 0.0;
  for (std::size_t i = 0; i < kGoldDraw.size(); ++i) {
    total += dist[kGoldDraw[i]];
    cumulative[i] = total;
  }
  if (!(total > 0.0)) {
    throw DomainError("distribution has no gold-consuming mass");
  }

  std::vector<GoldAnnotation> gold = *doc.gold;
  std::sort(gold.begin(), gold.end());
  std::vector<TokenSpan> gold_spans;
  for (const auto &g : gold) gold_spans.push_back(g.span);
  const std::size_t n_tokens = doc.tokens.size();

  Rng rng(seed);
  DegradeResult result;
  std::vector<TokenSpan> taken;

  auto confidence = [&](E category) {
    return category == E::kCorrect ? rng.uniform(kCorrectConfidenceLo, 1.0)
                                   : rng.uniform(kErrorConfidenceLo,
                                                 kCorrectConfidenceLo);
  };

  for (std::size_t gi = 0; gi < gold.size(); ++gi) {
    const auto &g = gold[gi];
    const double u = rng.uniform() * total;
    E category = kGoldDraw.back();
    for (std::size_t i = 0; i < kGoldDraw.size(); ++i) {
      if (u < cumulative[i]) {
        category = kGoldDraw[i];
        break;
      }
    }
    if (category == E::kMissing) continue;

    TokenSpan span = g.span;
    std::string label = g.label;
    const bool wrong_span = category == E::kCorrectLabelWrongSpan ||
                            category == E::kWrongLabelWrongSpan;
    const bool wrong_label = category == E::kWrongLabelCorrectSpan ||
                             category == E::kWrongLabelWrongSpan;

    std::vector<TokenSpan> spans;
    if (wrong_span) {
      for (const auto &c : span_perturbations(g.span, n_tokens)) {
        bool clear = is_free(c, taken);
        for (std::size_t oj = 0; clear && oj < gold_spans.size(); ++oj) {
          if (oj != gi && gold_spans[oj].overlaps(c)) clear = false;
        }
        if (clear) spans.push_back(c);
      }
    }
    std::vector<const Label *> others;
    if (wrong_label) {
      for (const auto &l : labels)
        if (l.id != g.label) others.push_back(&l);
    }
    if ((wrong_span && spans.empty()) || (wrong_label && others.empty())) {
      result.notes.push_back(
          "document '" + doc.id + "': gold [" + std::to_string(g.span.begin) +
          "," + std::to_string(g.span.end) + ") drawn as " +
          std::string(category_name(category)) +
          (wrong_span && spans.empty() ? " has no valid perturbed span"
                                       : " has no alternative label") +
          "; emitted as correct");
      category = E::kCorrect;
    } else {
      if (wrong_span) span = spans[rng.below(spans.size())];
      if (wrong_label) label = others[rng.below(others.size())]->id;
    }
    taken.push_back(span);
    result.annotations.push_back(
        {{span, std::move(label)}, confidence(category), category});
  }

  const auto spurious_count = rng.binomial(gold.size(), spurious_rate);
  for (std::uint64_t k = 0; k < spurious_count; ++k) {
    std::vector<TokenSpan> free_spans;
    for (std::size_t len = 1; len <= 2; ++len) {
      for (std::size_t b = 0; b + len <= n_tokens; ++b) {
        const TokenSpan c{b, b + len};
        if (is_free(c, taken) && is_free(c, gold_spans)) free_spans.push_back(c);
      }
    }
    if (free_spans.empty()) {
      result.notes.push_back("document '" + doc.id +
                             "': no free span for an unnecessary annotation");
      continue;
    }
    const TokenSpan span = free_spans[rng.below(free_spans.size())];
    const std::string &label = labels[rng.below(labels.size())].id;
    taken.push_back(span);
    result.annotations.push_back(
        {{span, label}, confidence(E::kUnnecessary), E::kUnnecessary});
  }

  std::sort(result.annotations.begin(), result.annotations.end(),
            [](const PreAnnotation &a, const PreAnnotation &b) {
              return a.annotation.span < b.annotation.span;
            });
  return result;
}

std::uint64_t document_seed(std::uint64_t corpus_seed,
                            std::string_view document_id) {
  return derive_seed(corpus_seed, document_id);
}

SimulatedMlUnit::SimulatedMlUnit(std::vector<Label> labels,
                                 std::span<const Document> hidden_gold,
                                 double target_recall,
                                 std::uint64_t corpus_seed)
    : labels_(std::move(labels)),
      target_recall_(target_recall),
      dist_(scale_distribution(base_distribution(), target_recall)),
      corpus_seed_(corpus_seed) {
  if (labels_.empty()) throw DomainError("simulated unit needs labels");
  for (const auto &d : hidden_gold) gold_.emplace(d.id, d.gold);
}

DegradeResult SimulatedMlUnit::predict_with_notes(const Document &doc) const {
  auto it = gold_.find(doc.id);
  if (it == gold_.end()) {
    throw PredictionError(doc.id, "document unknown to the simulated unit");
  }
  if (!it->second) throw PredictionError(doc.id, "document has no gold");
  Document with_gold = doc;
  with_gold.gold = it->second;
  return degrade(with_gold, labels_, dist_.categories, dist_.spurious_rate,
                 document_seed(corpus_seed_, doc.id));
}

std::vector<PreAnnotation> SimulatedMlUnit::predict(const Document &doc) const {
  return predict_with_notes(doc).annotations;
}

std::unique_ptr<SimulatedMlUnit> simulated_ml_unit(const Corpus &hidden_gold,
                                                   double target_recall,
                                                   std::uint64_t corpus_seed) {
  return std::make_unique<SimulatedMlUnit>(
      hidden_gold.labels, hidden_gold.documents, target_recall, corpus_seed);
}

json pre_annotations_to_json(std::string_view document_id,
                             std::span<const PreAnnotation> pre,
                             bool include_intended) {
  json list = json::array();
  for (const auto &p : pre) {
    json a = {{"start_token", p.annotation.span.begin},
              {"end_token", p.annotation.span.end},
              {"label", p.annotation.label},
              {"confidence", p.confidence}};
    if (include_intended && p.intended_category) {
      a["intended_category"] = category_name(*p.intended_category);
    }
    list.push_back(std::move(a));
  }
  return {{"document_id", document_id}, {"annotations", std::move(list)}};
}

PreAnnotatedDocument pre_annotations_from_json(const json &j) {
  PreAnnotatedDocument out;
  try {
    out.document_id = j.at("document_id").get<std::string>();
    const auto &list = j.at("annotations");
    if (!list.is_array()) throw ParseError("\"annotations\" must be an array");
    for (const auto &a : list) {
      if (!is_offset(a.at("start_token")) ||
          !is_offset(a.at("end_token"))) {
        throw ParseError("token offsets must be non-negative integers");
      }
      PreAnnotation p;
      p.annotation.span = {a.at("start_token").get<std::size_t>(),
                           a.at("end_token").get<std::size_t>()};
      p.annotation.label = a.at("label").get<std::string>();
      if (a.contains("confidence")) {
        p.confidence = a.at("confidence").get<double>();
        if (!(p.confidence > 0.0 && p.confidence <= 1.0)) {
          throw ParseError("confidence outside (0,1]");
        }
      }
      if (a.contains("intended_category")) {
        const auto name = a.at("intended_category").get<std::string>();
        p.intended_category = parse_category(name);
        if (!p.intended_category) {
          throw ParseError("unknown category '" + name + "'");
        }
      }
      out.annotations.push_back(std::move(p));
    }
  } catch (const json::exception &e) {
    throw ParseError(std::string("pre-annotations: ") + e.what());
  }
  return out;
}

}  // namespace annocycle
