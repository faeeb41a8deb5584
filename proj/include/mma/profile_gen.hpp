#pragma once

// Seeded stimulus generation: the observation sequence shown to participants
// and the held-out prediction items.

#include <cstdint>
#include <span>
#include <vector>

#include "mma/random.hpp"
#include "mma/rule_core.hpp"
#include "mma/study.hpp"

namespace mma {

/// Product of per-feature domain sizes, saturating at UINT64_MAX.
std::uint64_t domain_size(std::span<const FeatureDef> features);

/// Mixed-radix position of a profile; the first feature varies slowest.
std::uint64_t profile_index(const PatientProfile& profile, std::span<const FeatureDef> features);
PatientProfile profile_at(std::uint64_t index, std::span<const FeatureDef> features);

/// Every profile of the domain in index order. Throws InvalidValue above `limit`.
std::vector<PatientProfile> enumerate_domain(std::span<const FeatureDef> features,
                                             std::uint64_t limit = 10'000'000);

PatientProfile random_profile(std::span<const FeatureDef> features, SplitMix64& rng);

/// Exact checks over per-feature truth masks.
bool can_fulfill(const ConstraintRule& rule, std::span<const FeatureDef> features);
bool can_trigger(const ConstraintRule& rule, std::span<const FeatureDef> features);

struct Observation {
  std::size_t index = 0;
  PatientProfile profile;
  Classification classification;
  bool operator==(const Observation&) const = default;
};

struct PredictionItem {
  std::size_t index = 0;
  PatientProfile profile;
  std::size_t truth_label = 0;
  bool operator==(const PredictionItem&) const = default;
};

struct PredictionSet {
  std::vector<PredictionItem> items;
  bool disjoint_from_observations = true;
  bool with_replacement = false;
  bool operator==(const PredictionSet&) const = default;
};

inline constexpr std::uint64_t kMaxRejectionDraws = 1'000'000;

/// Every truth rule is fulfilled at least demonstrate_each times and triggered
/// at least once (when triggerable); the rest is uniform; order is shuffled.
/// Throws CoverageUnsatisfiable.
std::vector<Observation> generate_observations(const Study& study);

PredictionSet generate_prediction_items(const Study& study, std::span<const Observation> observations);
PredictionSet generate_prediction_items(const Study& study, std::span<const Observation> observations,
                                        std::uint64_t count);

}  // namespace mma
