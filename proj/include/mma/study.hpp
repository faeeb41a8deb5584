#pragma once

// Study definitions: the ground-truth rule set of the mock classifier plus
// generation and selection-list parameters, and the line-oriented text
// format they are written in.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mma/rule_core.hpp"

namespace mma {

struct ObservationParams {
  std::uint64_t count = 0;
  std::uint64_t demonstrate_each = 0;
  std::uint64_t seed = 0;
  bool operator==(const ObservationParams&) const = default;
};

struct PredictionParams {
  std::uint64_t count = 10;
  bool operator==(const PredictionParams&) const = default;
};

struct MenuParams {
  std::uint64_t distractors_per_feature = 2;
  std::uint64_t seed = 0;
  bool operator==(const MenuParams&) const = default;
};

struct Study {
  std::string name;
  std::vector<std::string> classes;
  std::vector<FeatureDef> features;
  std::vector<double> base_scores;  // one per class
  RuleSet truth;
  ObservationParams observation_params;
  PredictionParams prediction_params;
  MenuParams menu_params;

  bool operator==(const Study&) const = default;

  std::optional<std::size_t> class_index(std::string_view name) const;
};

enum class Severity { kError, kWarning };

struct ParseIssue {
  int line = 1;
  int column = 1;
  Severity severity = Severity::kError;
  std::string message;
};

std::string format_issue(const ParseIssue& issue);

struct ParseResult {
  std::optional<Study> study;  // set when there are no errors
  std::vector<ParseIssue> issues;

  bool ok() const { return study.has_value(); }
};

/// Never throws on malformed text; problems come back as positioned issues.
ParseResult parse_study(std::string_view source);

/// Canonical source text; parse_study(print_study(s)) reproduces s.
std::string print_study(const Study& study);

/// Hex digest of the canonical text.
std::string study_fingerprint(const Study& study);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 0xCBF29CE484222325ULL);
std::string hex64(std::uint64_t v);

struct ClassChoice {
  std::size_t cls = 0;
  Direction direction = Direction::kMore;
  bool operator==(const ClassChoice&) const = default;
};

/// Selection lists offered during elicitation. Both atom lists hold the same
/// atoms in independently shuffled order so neither reveals clause roles.
struct ClauseMenu {
  std::vector<CanonicalAtom> relevance_atoms;
  std::vector<CanonicalAtom> satisfaction_atoms;
  std::vector<ClassChoice> classifications;
  std::vector<std::string> warnings;

  bool operator==(const ClauseMenu& o) const {
    return relevance_atoms == o.relevance_atoms && satisfaction_atoms == o.satisfaction_atoms &&
           classifications == o.classifications;
  }

  bool offers(const CanonicalAtom& atom, std::span<const FeatureDef> features) const;
  bool offers(const ClassChoice& choice) const;
};

enum class MenuShortfall { kClamp, kThrow };

/// Throws MenuExhausted under kThrow when a feature cannot supply enough
/// distinct distractors; kClamp records a warning instead.
ClauseMenu build_menu(const Study& study, std::uint64_t seed,
                      MenuShortfall shortfall = MenuShortfall::kClamp);

/// Human-readable phrase for one atom, with units.
std::string render_atom(const CanonicalAtom& atom, std::span<const FeatureDef> features);

std::string render_rule_text(const ConstraintRule& rule, std::span<const FeatureDef> features,
                             std::span<const std::string> classes);

}  // namespace mma
