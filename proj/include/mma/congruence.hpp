#pragma once

// Scoring of an elicited rule set against the ground truth.
//
// Elements are deduplicated canonical atoms, counted regardless of the clause
// they appear in. Relations are whole rules: relevance set, satisfaction set,
// class and direction. Missing elements, extra elements and relation errors
// are the three ways a participant's model can diverge from the truth.

#include <span>
#include <string>
#include <vector>

#include "mma/rule_core.hpp"

namespace mma {

enum class Mismatch { kRelevance, kSatisfaction, kClass, kDirection, kUnmatched };

std::string_view mismatch_text(Mismatch m);

struct RelationError {
  std::size_t truth_index = 0;
  std::string truth_rule_id;
  std::vector<Mismatch> kinds;
  bool operator==(const RelationError&) const = default;
};

struct RuleMatch {
  std::size_t elicited = 0;
  std::size_t truth = 0;
  double similarity = 0;
  bool operator==(const RuleMatch&) const = default;
};

struct Matching {
  std::vector<RuleMatch> pairs;  // in truth declaration order
  double total = 0;
};

/// Composite weights; the default is the unweighted mean.
struct CompositeWeights {
  double recall = 1.0 / 3.0;
  double precision = 1.0 / 3.0;
  double relation = 1.0 / 3.0;
};

struct CongruenceReport {
  std::vector<CanonicalAtom> missing_elements;  // truth elements not elicited
  std::vector<CanonicalAtom> extra_elements;    // elicited elements not in the truth
  std::vector<CanonicalAtom> matched_elements;  // truth elements also elicited
  std::vector<RelationError> relation_errors;
  double element_recall = 0;
  double element_precision = 0;
  double relation_accuracy = 0;
  double composite = 0;
  std::vector<RuleMatch> matching;
  std::size_t truth_element_count = 0;
  std::size_t elicited_element_count = 0;
  std::size_t truth_rule_count = 0;
  std::size_t correct_relations = 0;
  std::string truth_fingerprint;

  bool operator==(const CongruenceReport&) const = default;
};

struct CongruenceDelta {
  double element_recall = 0;
  double element_precision = 0;
  double relation_accuracy = 0;
  double composite = 0;
  std::vector<CanonicalAtom> acquired;  // truth elements gained
  std::vector<CanonicalAtom> lost;      // truth elements dropped
};

std::vector<CanonicalAtom> canonical_elements(const RuleSet& rules, std::span<const FeatureDef> features);

/// All atoms of a rule, deduplicated.
std::vector<CanonicalAtom> rule_atoms(const ConstraintRule& rule, std::span<const FeatureDef> features);

/// 0.5 * Jaccard(atoms) + 0.25 * [same class] + 0.25 * [same direction].
double rule_similarity(const ConstraintRule& a, const ConstraintRule& b, std::span<const FeatureDef> features);

/// Weight used for matching: the similarity when the rules share at least one
/// element, otherwise 0 (a rule with no common element is not a version of it).
double match_weight(const ConstraintRule& a, const ConstraintRule& b, std::span<const FeatureDef> features);

/// Optimal one-to-one assignment of elicited to truth rules by match_weight.
/// Among optimal assignments, exact relations are preferred; remaining ties go to
/// earlier truth rules, then earlier elicited rules.
Matching match_rules(const RuleSet& elicited, const RuleSet& truth, std::span<const FeatureDef> features);

std::string truth_fingerprint(const RuleSet& truth);

/// Throws EmptyTruth.
CongruenceReport congruence_report(const RuleSet& elicited, const RuleSet& truth,
                                   std::span<const FeatureDef> features, const CompositeWeights& weights = {});

/// after - before. Throws TruthMismatch if the reports score different truths.
CongruenceDelta congruence_delta(const CongruenceReport& before, const CongruenceReport& after,
                                 std::span<const FeatureDef> features);

}  // namespace mma
