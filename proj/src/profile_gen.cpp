#include "mma/profile_gen.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "mma/error.hpp"

namespace mma {

namespace {

using Mask = std::vector<char>;

// Values of each feature allowed by every atom in `atoms`.
std::vector<Mask> allowed_values(std::span<const CanonicalAtom> atoms,
                                 std::span<const FeatureDef> features) {
  std::vector<Mask> masks;
  for (const auto& f : features) masks.emplace_back(f.domain_size(), 1);
  for (const auto& a : atoms) {
    Mask& m = masks.at(a.feature);
    for (std::uint32_t v = 0; v < m.size(); ++v)
      if (!a.holds(v)) m[v] = 0;
  }
  return masks;
}

bool any_set(const Mask& m) { return std::find(m.begin(), m.end(), 1) != m.end(); }

PatientProfile sample_with_status(const ConstraintRule& rule, RuleStatus want,
                                  std::span<const FeatureDef> features, SplitMix64& rng) {
  for (std::uint64_t draw = 0; draw < kMaxRejectionDraws; ++draw) {
    PatientProfile p = random_profile(features, rng);
    if (rule_status(rule, p) == want) return p;
  }
  throw Error(ErrorCode::kCoverageUnsatisfiable,
              "rule '" + rule.id + "': no " + std::string(rule_status_text(want)) + " profile within " +
                  std::to_string(kMaxRejectionDraws) + " draws");
}

}  // namespace

std::uint64_t domain_size(std::span<const FeatureDef> features) {
  std::uint64_t total = 1;
  for (const auto& f : features) {
    std::uint64_t n = f.domain_size();
    if (n != 0 && total > std::numeric_limits<std::uint64_t>::max() / n)
      return std::numeric_limits<std::uint64_t>::max();
    total *= n;
  }
  return total;
}

std::uint64_t profile_index(const PatientProfile& profile, std::span<const FeatureDef> features) {
  std::uint64_t idx = 0;
  for (std::size_t i = 0; i < features.size(); ++i) idx = idx * features[i].domain_size() + profile.values.at(i);
  return idx;
}

PatientProfile profile_at(std::uint64_t index, std::span<const FeatureDef> features) {
  PatientProfile p;
  p.values.resize(features.size());
  for (std::size_t i = features.size(); i-- > 0;) {
    std::uint64_t n = features[i].domain_size();
    p.values[i] = static_cast<std::uint32_t>(index % n);
    index /= n;
  }
  return p;
}

std::vector<PatientProfile> enumerate_domain(std::span<const FeatureDef> features, std::uint64_t limit) {
  std::uint64_t n = domain_size(features);
  if (n > limit)
    throw Error(ErrorCode::kInvalidValue, "profile domain of " + std::to_string(n) + " is too large to enumerate");
  std::vector<PatientProfile> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) out.push_back(profile_at(i, features));
  return out;
}

PatientProfile random_profile(std::span<const FeatureDef> features, SplitMix64& rng) {
  PatientProfile p;
  p.values.reserve(features.size());
  for (const auto& f : features) p.values.push_back(static_cast<std::uint32_t>(rng.below(f.domain_size())));
  return p;
}

bool can_fulfill(const ConstraintRule& rule, std::span<const FeatureDef> features) {
  std::vector<CanonicalAtom> all = rule.relevance;
  all.insert(all.end(), rule.satisfaction.begin(), rule.satisfaction.end());
  auto masks = allowed_values(all, features);
  return std::all_of(masks.begin(), masks.end(), any_set);
}

bool can_trigger(const ConstraintRule& rule, std::span<const FeatureDef> features) {
  auto masks = allowed_values(rule.relevance, features);
  if (!std::all_of(masks.begin(), masks.end(), any_set)) return false;
  // some satisfaction atom must be falsifiable inside the relevance region
  return std::any_of(rule.satisfaction.begin(), rule.satisfaction.end(), [&](const CanonicalAtom& a) {
    const Mask& m = masks.at(a.feature);
    for (std::uint32_t v = 0; v < m.size(); ++v)
      if (m[v] && !a.holds(v)) return true;
    return false;
  });
}

std::vector<Observation> generate_observations(const Study& study) {
  const auto& params = study.observation_params;
  if (params.count == 0) return {};
  const auto& rules = study.truth.rules;
  std::span<const FeatureDef> features = study.features;

  std::vector<std::uint64_t> need_fulfilled(rules.size(), params.demonstrate_each);
  std::vector<std::uint64_t> need_triggered(rules.size(), 0);
  for (std::size_t r = 0; r < rules.size(); ++r) {
    if (!can_fulfill(rules[r], features))
      throw Error(ErrorCode::kCoverageUnsatisfiable,
                  "rule '" + rules[r].id + "' can never be fulfilled on the declared domain");
    need_triggered[r] = can_trigger(rules[r], features) ? 1 : 0;
  }

  SplitMix64 rng = make_stream(params.seed, Stream::kObservations);
  std::vector<PatientProfile> profiles;
  // one profile may count towards several rules
  auto credit = [&](const PatientProfile& p) {
    for (std::size_t r = 0; r < rules.size(); ++r) {
      RuleStatus s = rule_status(rules[r], p);
      if (s == RuleStatus::kFulfilled && need_fulfilled[r] > 0) --need_fulfilled[r];
      if (s == RuleStatus::kTriggered && need_triggered[r] > 0) --need_triggered[r];
    }
    profiles.push_back(p);
  };
  for (std::size_t r = 0; r < rules.size(); ++r)
    while (need_fulfilled[r] > 0) credit(sample_with_status(rules[r], RuleStatus::kFulfilled, features, rng));
  for (std::size_t r = 0; r < rules.size(); ++r)
    while (need_triggered[r] > 0) credit(sample_with_status(rules[r], RuleStatus::kTriggered, features, rng));

  if (profiles.size() > params.count)
    throw Error(ErrorCode::kCoverageUnsatisfiable,
                "observation count " + std::to_string(params.count) + " is too small: rule coverage needs " +
                    std::to_string(profiles.size()) + " observations");
  while (profiles.size() < params.count) profiles.push_back(random_profile(features, rng));
  rng.shuffle(std::span<PatientProfile>(profiles));

  std::vector<Observation> out;
  out.reserve(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i)
    out.push_back({i, profiles[i], classify(study.truth, study.base_scores, profiles[i])});
  return out;
}

PredictionSet generate_prediction_items(const Study& study, std::span<const Observation> observations) {
  return generate_prediction_items(study, observations, study.prediction_params.count);
}

PredictionSet generate_prediction_items(const Study& study, std::span<const Observation> observations,
                                        std::uint64_t count) {
  std::span<const FeatureDef> features = study.features;
  SplitMix64 rng = make_stream(study.observation_params.seed, Stream::kPredictions);
  const std::uint64_t domain = domain_size(features);

  std::set<PatientProfile> seen;
  for (const auto& o : observations) seen.insert(o.profile);

  PredictionSet out;
  std::vector<PatientProfile> chosen;
  const std::uint64_t free_slots = domain - std::min<std::uint64_t>(domain, seen.size());
  if (count <= free_slots && (count + seen.size()) <= domain / 2) {
    // Sparse case: rejection against the excluded set.
    while (chosen.size() < count) {
      PatientProfile p = random_profile(features, rng);
      if (seen.insert(p).second) chosen.push_back(std::move(p));
    }
  } else if (count <= domain) {
    // Dense case: the domain is small enough to enumerate.
    std::vector<PatientProfile> pool;
    for (auto& p : enumerate_domain(features))
      if (count > free_slots || !seen.count(p)) pool.push_back(std::move(p));
    out.disjoint_from_observations = count <= free_slots;
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
      chosen.push_back(pool[i]);
    }
  } else {
    out.disjoint_from_observations = false;
    out.with_replacement = true;
    while (chosen.size() < count) chosen.push_back(random_profile(features, rng));
  }

  for (std::size_t i = 0; i < chosen.size(); ++i)
    out.items.push_back({i, chosen[i], classify(study.truth, study.base_scores, chosen[i]).label});
  return out;
}

}  // namespace mma
