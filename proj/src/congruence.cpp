#include "mma/congruence.hpp"

#include <algorithm>

#include "mma/assignment.hpp"
#include "mma/error.hpp"
#include "mma/study.hpp"

namespace mma {

namespace {

constexpr double kTieEpsilon = 1e-9;
// Similarities are multiples of 1/55440, so a bonus this small only reorders
// assignments of equal total similarity (up to a few hundred rules).
constexpr double kExactBonus = 1e-8;

bool contains(std::span<const CanonicalAtom> set, const CanonicalAtom& a, std::span<const FeatureDef> features) {
  return std::any_of(set.begin(), set.end(), [&](const CanonicalAtom& b) { return atoms_equivalent(a, b, features); });
}

// Optimum over the rows/cols still open, plus the weight already fixed.
double best_total(const std::vector<std::vector<double>>& w, const std::vector<char>& row_open,
                  const std::vector<char>& col_open) {
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < row_open.size(); ++i)
    if (row_open[i]) rows.push_back(i);
  for (std::size_t j = 0; j < col_open.size(); ++j)
    if (col_open[j]) cols.push_back(j);
  if (rows.empty() || cols.empty()) return 0;
  std::vector<std::vector<double>> sub(rows.size(), std::vector<double>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) sub[i][j] = w[rows[i]][cols[j]];
  return assignment_total(sub, max_weight_assignment(sub));
}

}  // namespace

std::string_view mismatch_text(Mismatch m) {
  switch (m) {
    case Mismatch::kRelevance: return "relevance";
    case Mismatch::kSatisfaction: return "satisfaction";
    case Mismatch::kClass: return "class";
    case Mismatch::kDirection: return "direction";
    case Mismatch::kUnmatched: return "unmatched";
  }
  return "?";
}

std::vector<CanonicalAtom> canonical_elements(const RuleSet& rules, std::span<const FeatureDef> features) {
  std::vector<CanonicalAtom> all;
  for (const auto& r : rules.rules) {
    all.insert(all.end(), r.relevance.begin(), r.relevance.end());
    all.insert(all.end(), r.satisfaction.begin(), r.satisfaction.end());
  }
  return dedupe_atoms(all, features);
}

std::vector<CanonicalAtom> rule_atoms(const ConstraintRule& rule, std::span<const FeatureDef> features) {
  std::vector<CanonicalAtom> all = rule.relevance;
  all.insert(all.end(), rule.satisfaction.begin(), rule.satisfaction.end());
  return dedupe_atoms(all, features);
}

namespace {

double jaccard(const ConstraintRule& a, const ConstraintRule& b, std::span<const FeatureDef> features) {
  auto xa = rule_atoms(a, features);
  auto xb = rule_atoms(b, features);
  std::size_t common = 0;
  for (const auto& x : xa)
    if (contains(xb, x, features)) ++common;
  std::size_t uni = xa.size() + xb.size() - common;
  return uni == 0 ? 1.0 : static_cast<double>(common) / static_cast<double>(uni);
}

}  // namespace

double rule_similarity(const ConstraintRule& a, const ConstraintRule& b, std::span<const FeatureDef> features) {
  return 0.5 * jaccard(a, b, features) + 0.25 * (a.effect_class == b.effect_class ? 1.0 : 0.0) +
         0.25 * (a.direction == b.direction ? 1.0 : 0.0);
}

double match_weight(const ConstraintRule& a, const ConstraintRule& b, std::span<const FeatureDef> features) {
  if (jaccard(a, b, features) <= 0) return 0;
  return rule_similarity(a, b, features);
}

Matching match_rules(const RuleSet& elicited, const RuleSet& truth, std::span<const FeatureDef> features) {
  const std::size_t nt = truth.size(), ne = elicited.size();
  std::vector<std::vector<double>> w(nt, std::vector<double>(ne));
  std::vector<std::vector<double>> ranked(nt, std::vector<double>(ne));
  for (std::size_t t = 0; t < nt; ++t)
    for (std::size_t e = 0; e < ne; ++e) {
      const ConstraintRule& tr = truth.rules[t];
      const ConstraintRule& er = elicited.rules[e];
      w[t][e] = match_weight(tr, er, features);
      bool exact = w[t][e] > 0 && tr.effect_class == er.effect_class && tr.direction == er.direction &&
                   atom_sets_equivalent(tr.relevance, er.relevance, features) &&
                   atom_sets_equivalent(tr.satisfaction, er.satisfaction, features);
      ranked[t][e] = w[t][e] + (exact ? kExactBonus : 0.0);
    }

  std::vector<char> row_open(nt, 1), col_open(ne, 1);
  const double optimum = best_total(ranked, row_open, col_open);
  Matching m;
  double ranked_total = 0;
  // Among optimal assignments prefer exact relations, then walk truth rules in
  // order and keep the earliest elicited partner that still admits the optimum.
  for (std::size_t t = 0; t < nt; ++t) {
    row_open[t] = 0;
    for (std::size_t e = 0; e < ne; ++e) {
      if (!col_open[e] || w[t][e] <= 0) continue;
      col_open[e] = 0;
      double candidate = ranked_total + ranked[t][e] + best_total(ranked, row_open, col_open);
      if (candidate >= optimum - kTieEpsilon) {
        m.pairs.push_back({e, t, w[t][e]});
        m.total += w[t][e];
        ranked_total += ranked[t][e];
        break;
      }
      col_open[e] = 1;
    }
  }
  return m;
}

std::string truth_fingerprint(const RuleSet& truth) {
  std::string buf;
  for (const auto& r : truth.rules) {
    buf += r.id + "|";
    for (const auto* clause : {&r.relevance, &r.satisfaction}) {
      for (const auto& a : *clause) {
        buf += std::to_string(a.feature) + ":" + std::to_string(static_cast<int>(a.form)) + ":" +
               std::to_string(a.index);
        for (auto m : a.members) buf += "," + std::to_string(m);
        buf += ";";
      }
      buf += "|";
    }
    buf += std::to_string(r.effect_class) + std::string(direction_text(r.direction)) + format_number(r.weight) + "\n";
  }
  return hex64(fnv1a64(buf));
}

CongruenceReport congruence_report(const RuleSet& elicited, const RuleSet& truth,
                                   std::span<const FeatureDef> features, const CompositeWeights& weights) {
  if (truth.empty()) throw Error(ErrorCode::kEmptyTruth, "cannot score against an empty truth rule set");
  CongruenceReport rep;
  rep.truth_fingerprint = truth_fingerprint(truth);
  rep.truth_rule_count = truth.size();

  auto truth_elements = canonical_elements(truth, features);
  auto elicited_elements = canonical_elements(elicited, features);
  rep.truth_element_count = truth_elements.size();
  rep.elicited_element_count = elicited_elements.size();
  for (const auto& a : truth_elements)
    (contains(elicited_elements, a, features) ? rep.matched_elements : rep.missing_elements).push_back(a);
  for (const auto& a : elicited_elements)
    if (!contains(truth_elements, a, features)) rep.extra_elements.push_back(a);

  const double hits = static_cast<double>(rep.matched_elements.size());
  rep.element_recall = truth_elements.empty() ? 1.0 : hits / static_cast<double>(truth_elements.size());
  rep.element_precision = elicited_elements.empty() ? 1.0 : hits / static_cast<double>(elicited_elements.size());

  Matching m = match_rules(elicited, truth, features);
  rep.matching = m.pairs;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    const ConstraintRule& tr = truth.rules[t];
    RelationError err{t, tr.id, {}};
    auto it = std::find_if(m.pairs.begin(), m.pairs.end(), [&](const RuleMatch& p) { return p.truth == t; });
    if (it == m.pairs.end()) {
      err.kinds.push_back(Mismatch::kUnmatched);
    } else {
      const ConstraintRule& er = elicited.rules[it->elicited];
      if (!atom_sets_equivalent(tr.relevance, er.relevance, features)) err.kinds.push_back(Mismatch::kRelevance);
      if (!atom_sets_equivalent(tr.satisfaction, er.satisfaction, features))
        err.kinds.push_back(Mismatch::kSatisfaction);
      if (tr.effect_class != er.effect_class) err.kinds.push_back(Mismatch::kClass);
      if (tr.direction != er.direction) err.kinds.push_back(Mismatch::kDirection);
    }
    if (err.kinds.empty()) ++rep.correct_relations;
    else rep.relation_errors.push_back(std::move(err));
  }
  rep.relation_accuracy = static_cast<double>(rep.correct_relations) / static_cast<double>(truth.size());
  if (weights.recall == weights.precision && weights.precision == weights.relation) {
    rep.composite = (rep.element_recall + rep.element_precision + rep.relation_accuracy) / 3.0;
  } else {
    double wsum = weights.recall + weights.precision + weights.relation;
    rep.composite = (weights.recall * rep.element_recall + weights.precision * rep.element_precision +
                     weights.relation * rep.relation_accuracy) /
                    wsum;
  }
  rep.composite = std::clamp(rep.composite, 0.0, 1.0);
  return rep;
}

CongruenceDelta congruence_delta(const CongruenceReport& before, const CongruenceReport& after,
                                 std::span<const FeatureDef> features) {
  if (before.truth_fingerprint != after.truth_fingerprint)
    throw Error(ErrorCode::kTruthMismatch, "reports were scored against different truth rule sets");
  CongruenceDelta d;
  d.element_recall = after.element_recall - before.element_recall;
  d.element_precision = after.element_precision - before.element_precision;
  d.relation_accuracy = after.relation_accuracy - before.relation_accuracy;
  d.composite = after.composite - before.composite;
  for (const auto& a : after.matched_elements)
    if (!contains(before.matched_elements, a, features)) d.acquired.push_back(a);
  for (const auto& a : before.matched_elements)
    if (!contains(after.matched_elements, a, features)) d.lost.push_back(a);
  return d;
}

}  // namespace mma
