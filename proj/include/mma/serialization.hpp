#pragma once

// JSON shapes shared by the event log, the HTTP API and the CLI.

#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "mma/congruence.hpp"
#include "mma/profile_gen.hpp"
#include "mma/rule_core.hpp"
#include "mma/study.hpp"

namespace mma {

using json = nlohmann::json;

json atom_to_json(const CanonicalAtom& atom, std::span<const FeatureDef> features);
/// Accepts any legal comparator and canonicalizes. Throws InvalidPayload.
CanonicalAtom atom_from_json(const json& j, std::span<const FeatureDef> features);

json rule_to_json(const ConstraintRule& rule, const Study& study);
json rules_to_json(const RuleSet& rules, const Study& study);
/// `{"rules":[...]}` or a bare array. Throws InvalidPayload.
RuleSet rules_from_json(const json& j, const Study& study);

json profile_to_json(const PatientProfile& profile, std::span<const FeatureDef> features);
PatientProfile profile_from_json(const json& j, std::span<const FeatureDef> features);

json feature_to_json(const FeatureDef& feature);
json classification_to_json(const Classification& c, const Study& study);
json menu_to_json(const ClauseMenu& menu, const Study& study);
json report_to_json(const CongruenceReport& report, const Study& study);
json delta_to_json(const CongruenceDelta& delta, const Study& study);
json issue_to_json(const ParseIssue& issue);

/// Parses a number or numeric string; the JSON library would otherwise throw on type mismatch.
std::optional<double> json_number(const json& j);

}  // namespace mma
