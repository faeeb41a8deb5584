#pragma once

// Simulated participants.
//
//   perfect            elicits the truth verbatim
//   forgetful:p=P      drops each truth rule with probability P
//   random             random rules from the selection lists, random predictions
//   frequency:...      mines (relevance, satisfaction, class) triples from what it observed

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mma/profile_gen.hpp"
#include "mma/random.hpp"
#include "mma/rule_core.hpp"
#include "mma/study.hpp"

namespace mma {

enum class BotKind { kPerfect, kForgetful, kRandom, kFrequency };

inline constexpr std::uint64_t kDefaultMinSupport = 3;
inline constexpr double kDefaultLift = 0.3;

struct BotSpec {
  BotKind kind = BotKind::kPerfect;
  double drop_probability = 0.5;  // forgetful
  std::uint64_t min_support = kDefaultMinSupport;  // frequency
  double lift_threshold = kDefaultLift;            // frequency
  std::uint64_t seed = 0;

  /// `perfect`, `random`, `forgetful:p=0.5`, `frequency:min_support=3,lift=0.3`.
  /// Throws InvalidValue.
  static BotSpec parse(std::string_view text);
  std::string text() const;
  /// Empty when parameters are within bounds.
  std::optional<std::string> check() const;
};

/// Rules with equivalent clauses, the same class and the same direction.
bool rules_equivalent(const ConstraintRule& a, const ConstraintRule& b, std::span<const FeatureDef> features);

class Bot {
 public:
  Bot(BotSpec spec, std::span<const FeatureDef> features, std::size_t n_classes, const ClauseMenu& menu);

  void observe(const Observation& observation);
  /// Only the perfect and forgetful kinds look at `truth`.
  RuleSet elicit(const RuleSet& truth);
  /// Explanations shown at the intervention; the random kind ignores them.
  void learn(std::span<const ConstraintRule> explanations);
  std::size_t predict(const PatientProfile& profile);

  const BotSpec& spec() const { return spec_; }
  /// Rule set used for predictions (the last elicitation plus anything learned).
  const RuleSet& model() const { return model_; }
  std::size_t observations_seen() const { return n_seen_; }

  /// Frequency bookkeeping: profiles seen with r and s both holding and label c.
  std::uint64_t support(const CanonicalAtom& r, const CanonicalAtom& s, std::size_t cls) const;

 private:
  RuleSet mine() const;
  void add_learned(const ConstraintRule& rule);
  std::size_t atom_slot(const CanonicalAtom& atom) const;
  std::size_t pair_slot(std::size_t r, std::size_t s, std::size_t c) const {
    return (r * atoms_.size() + s) * n_classes_ + c;
  }

  BotSpec spec_;
  std::vector<FeatureDef> features_;
  std::size_t n_classes_;
  std::vector<CanonicalAtom> atoms_;  // distinct menu atoms
  std::vector<ClassChoice> choices_;
  SplitMix64 rng_;
  RuleSet model_;
  std::vector<ConstraintRule> learned_;
  std::vector<bool> dropped_;  // forgetful, decided once
  bool drops_decided_ = false;
  // frequency counts, indexed by pair_slot
  std::vector<std::uint64_t> n_rs_;
  std::vector<std::uint64_t> n_r_not_s_;
  std::size_t n_seen_ = 0;
};

}  // namespace mma
