#pragma once

// Atoms, constraint rules and the transparent rule-based classifier.
//
// Every feature has a finite domain. Profiles store one domain index per
// feature (grid index for numeric, 0/1 for boolean, value index for
// categorical), which keeps atom evaluation exact.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mma {

enum class FeatureKind { kNumeric, kBoolean, kCategorical };

struct FeatureDef {
  std::string name;
  FeatureKind kind = FeatureKind::kBoolean;
  // numeric
  double min = 0.0;
  double max = 0.0;
  double step = 1.0;
  std::string unit;
  // categorical, in declared order
  std::vector<std::string> categories;
  // display name for rendered explanations; falls back to name
  std::string label;

  static FeatureDef numeric(std::string name, double min, double max, double step,
                            std::string unit = {});
  static FeatureDef boolean(std::string name);
  static FeatureDef categorical(std::string name, std::vector<std::string> values);

  std::size_t domain_size() const;
  /// Grid value at index i (numeric only).
  double grid_value(std::size_t i) const;
  const std::string& display_name() const { return label.empty() ? name : label; }

  /// Empty when the invariants hold, otherwise a description of the first violation.
  std::optional<std::string> check() const;

  bool operator==(const FeatureDef&) const = default;
};

std::optional<std::size_t> find_feature(std::span<const FeatureDef> features,
                                        std::string_view name);

struct PatientProfile {
  std::vector<std::uint32_t> values;

  auto operator<=>(const PatientProfile&) const = default;
};

/// Throws InvalidValue if the profile is not total or has an off-domain value.
void check_profile(const PatientProfile& profile, std::span<const FeatureDef> features);

enum class Comparator { kGreater, kGreaterEqual, kLess, kLessEqual, kEqual, kNotEqual, kIn };

std::string_view comparator_text(Comparator cmp);
std::optional<Comparator> parse_comparator(std::string_view text);

/// A literal as written by a study author or sent by a client.
struct Literal {
  std::string text;
  std::optional<double> number;

  static Literal of_number(double v);
  static Literal of_word(std::string w);
};

struct RawAtom {
  std::string feature;
  Comparator cmp = Comparator::kEqual;
  std::vector<Literal> values;
};

enum class AtomForm : std::uint8_t {
  kAlways,     // tautology over the feature's domain
  kNever,      // contradiction
  kAtLeast,    // numeric: value >= grid[index]
  kBelow,      // numeric: value <  grid[index]
  kEquals,     // numeric or boolean: value == domain[index]
  kNotEquals,  // numeric: value != grid[index]
  kOneOf,      // categorical: value in members
};

/// Unique representative of a truth set over one feature's domain.
struct CanonicalAtom {
  std::size_t feature = 0;
  AtomForm form = AtomForm::kAlways;
  std::uint32_t index = 0;
  std::vector<std::uint32_t> members;  // sorted, kOneOf only

  auto operator<=>(const CanonicalAtom&) const = default;

  bool trivial() const { return form == AtomForm::kAlways || form == AtomForm::kNever; }
  /// Truth value for the given domain index of this atom's feature.
  bool holds(std::uint32_t value) const;
};

enum class Direction : std::uint8_t { kMore, kLess };

std::string_view direction_text(Direction d);
std::optional<Direction> parse_direction(std::string_view text);

struct ConstraintRule {
  std::string id;
  std::vector<CanonicalAtom> relevance;
  std::vector<CanonicalAtom> satisfaction;
  std::size_t effect_class = 0;
  Direction direction = Direction::kMore;
  double weight = 1.0;

  bool operator==(const ConstraintRule&) const = default;
};

struct RuleSet {
  std::vector<ConstraintRule> rules;

  bool operator==(const RuleSet&) const = default;
  bool empty() const { return rules.empty(); }
  std::size_t size() const { return rules.size(); }
};

enum class RuleStatus { kInapplicable, kTriggered, kFulfilled };

std::string_view rule_status_text(RuleStatus s);

struct Classification {
  std::vector<double> scores;
  std::vector<double> probabilities;
  std::size_t label = 0;
  std::vector<std::string> fulfilled_rule_ids;

  bool operator==(const Classification&) const = default;
};

inline constexpr std::size_t kMaxClauseAtoms = 3;

bool eval_atom(const CanonicalAtom& atom, const PatientProfile& profile);
RuleStatus rule_status(const ConstraintRule& rule, const PatientProfile& profile);

/// Additive log-odds scores over fulfilled rules, softmax probabilities,
/// argmax label with ties going to the earliest declared class.
Classification classify(const RuleSet& rules, std::span<const double> base_scores,
                        const PatientProfile& profile);

/// Throws IllegalComparator, InvalidValue or UnknownFeature.
CanonicalAtom canonicalize_atom(const RawAtom& raw, std::size_t feature_index,
                                const FeatureDef& feature);
CanonicalAtom canonicalize_atom(const RawAtom& raw, std::span<const FeatureDef> features);

/// Inverse of canonicalize_atom: a raw atom that canonicalizes back to `atom`.
RawAtom to_raw(const CanonicalAtom& atom, std::span<const FeatureDef> features);

/// Identical truth sets over the full profile domain.
bool atoms_equivalent(const CanonicalAtom& a, const CanonicalAtom& b,
                      std::span<const FeatureDef> features);

/// Removes atoms equivalent to an earlier one, keeping first occurrences.
std::vector<CanonicalAtom> dedupe_atoms(std::span<const CanonicalAtom> atoms,
                                        std::span<const FeatureDef> features);

/// Set equality under atoms_equivalent.
bool atom_sets_equivalent(std::span<const CanonicalAtom> a, std::span<const CanonicalAtom> b,
                          std::span<const FeatureDef> features);

/// All non-trivial canonical atoms over one feature, in a fixed order.
std::vector<CanonicalAtom> atom_space(std::size_t feature_index, const FeatureDef& feature);

/// DSL spelling, e.g. `glucose >= 130` or `time in {noon, evening}`.
std::string atom_source_text(const CanonicalAtom& atom, std::span<const FeatureDef> features);

/// Shortest decimal that round-trips, with a trailing ".0" for integral values
/// when `keep_point` is set.
std::string format_number(double v, bool keep_point = false);

}  // namespace mma
