#include "mma/serialization.hpp"

#include <cstdlib>

#include "mma/error.hpp"

namespace mma {

namespace {

Error bad_payload(const std::string& msg) { return Error(ErrorCode::kInvalidPayload, msg); }

json literal_to_json(const Literal& lit, const FeatureDef& f) {
  if (f.kind == FeatureKind::kNumeric && lit.number) return *lit.number;
  if (f.kind == FeatureKind::kBoolean) return lit.text == "true";
  return lit.text;
}

Literal literal_from_json(const json& j) {
  if (j.is_boolean()) return Literal::of_word(j.get<bool>() ? "true" : "false");
  if (j.is_number()) return Literal{j.dump(), j.get<double>()};
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (!s.empty() && end == s.c_str() + s.size()) return Literal{s, v};
    return Literal::of_word(s);
  }
  throw bad_payload("atom values must be numbers, booleans or strings");
}

}  // namespace

std::optional<double> json_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (!s.empty() && end == s.c_str() + s.size()) return v;
  }
  return std::nullopt;
}

json atom_to_json(const CanonicalAtom& atom, std::span<const FeatureDef> features) {
  RawAtom raw = to_raw(atom, features);
  const FeatureDef& f = features[atom.feature];
  json j = {{"feature", raw.feature}, {"op", std::string(comparator_text(raw.cmp))}};
  if (raw.cmp == Comparator::kIn) {
    json values = json::array();
    for (const auto& v : raw.values) values.push_back(literal_to_json(v, f));
    j["values"] = std::move(values);
  } else {
    j["value"] = literal_to_json(raw.values.front(), f);
  }
  return j;
}

CanonicalAtom atom_from_json(const json& j, std::span<const FeatureDef> features) {
  if (!j.is_object() || !j.contains("feature") || !j["feature"].is_string() || !j.contains("op") ||
      !j["op"].is_string())
    throw bad_payload("an atom needs string fields 'feature' and 'op'");
  RawAtom raw;
  raw.feature = j["feature"].get<std::string>();
  auto cmp = parse_comparator(j["op"].get<std::string>());
  if (!cmp) throw bad_payload("unknown comparator '" + j["op"].get<std::string>() + "'");
  raw.cmp = *cmp;
  if (j.contains("values")) {
    if (!j["values"].is_array() || j["values"].empty()) throw bad_payload("'values' must be a non-empty array");
    for (const auto& v : j["values"]) raw.values.push_back(literal_from_json(v));
  } else if (j.contains("value")) {
    raw.values.push_back(literal_from_json(j["value"]));
  } else {
    throw bad_payload("an atom needs 'value' or 'values'");
  }
  try {
    return canonicalize_atom(raw, features);
  } catch (const Error& e) {
    throw bad_payload(e.what());
  }
}

json rule_to_json(const ConstraintRule& rule, const Study& study) {
  json rel = json::array(), sat = json::array();
  for (const auto& a : rule.relevance) rel.push_back(atom_to_json(a, study.features));
  for (const auto& a : rule.satisfaction) sat.push_back(atom_to_json(a, study.features));
  return {{"id", rule.id},
          {"relevance", std::move(rel)},
          {"satisfaction", std::move(sat)},
          {"class", study.classes.at(rule.effect_class)},
          {"direction", std::string(direction_text(rule.direction))},
          {"weight", rule.weight}};
}

json rules_to_json(const RuleSet& rules, const Study& study) {
  json arr = json::array();
  for (const auto& r : rules.rules) arr.push_back(rule_to_json(r, study));
  return {{"rules", std::move(arr)}};
}

RuleSet rules_from_json(const json& j, const Study& study) {
  const json* arr = &j;
  if (j.is_object()) {
    if (!j.contains("rules")) throw bad_payload("expected a 'rules' array");
    arr = &j["rules"];
  }
  if (!arr->is_array()) throw bad_payload("'rules' must be an array");
  RuleSet out;
  for (const auto& jr : *arr) {
    if (!jr.is_object()) throw bad_payload("each rule must be an object");
    ConstraintRule r;
    r.id = jr.contains("id") && jr["id"].is_string() ? jr["id"].get<std::string>()
                                                      : "E" + std::to_string(out.size() + 1);
    for (auto [key, clause] : {std::pair{"relevance", &r.relevance}, std::pair{"satisfaction", &r.satisfaction}}) {
      if (!jr.contains(key) || !jr[key].is_array()) throw bad_payload(std::string("rule needs a '") + key + "' array");
      for (const auto& ja : jr[key]) clause->push_back(atom_from_json(ja, study.features));
      *clause = dedupe_atoms(*clause, study.features);
      if (clause->empty() || clause->size() > kMaxClauseAtoms)
        throw bad_payload(std::string("'") + key + "' must hold 1 to 3 atoms");
    }
    if (!jr.contains("class") || !jr["class"].is_string()) throw bad_payload("rule needs a 'class' string");
    auto cls = study.class_index(jr["class"].get<std::string>());
    if (!cls) throw Error(ErrorCode::kMenuViolation, "class '" + jr["class"].get<std::string>() + "' is not offered");
    r.effect_class = *cls;
    if (!jr.contains("direction") || !jr["direction"].is_string()) throw bad_payload("rule needs a 'direction' string");
    auto dir = parse_direction(jr["direction"].get<std::string>());
    if (!dir) throw bad_payload("direction must be 'more' or 'less'");
    r.direction = *dir;
    if (jr.contains("weight")) {
      auto w = json_number(jr["weight"]);
      if (!w || !(*w > 0)) throw bad_payload("weight must be a positive number");
      r.weight = *w;
    }
    out.rules.push_back(std::move(r));
  }
  return out;
}

json profile_to_json(const PatientProfile& profile, std::span<const FeatureDef> features) {
  json j = json::object();
  for (std::size_t i = 0; i < features.size(); ++i) {
    const FeatureDef& f = features[i];
    std::uint32_t v = profile.values.at(i);
    switch (f.kind) {
      case FeatureKind::kNumeric: j[f.name] = f.grid_value(v); break;
      case FeatureKind::kBoolean: j[f.name] = v == 1; break;
      case FeatureKind::kCategorical: j[f.name] = f.categories.at(v); break;
    }
  }
  return j;
}

PatientProfile profile_from_json(const json& j, std::span<const FeatureDef> features) {
  if (!j.is_object()) throw bad_payload("a profile must be an object");
  PatientProfile p;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const FeatureDef& f = features[i];
    if (!j.contains(f.name)) throw bad_payload("profile lacks feature '" + f.name + "'");
    RawAtom raw{f.name, Comparator::kEqual, {literal_from_json(j[f.name])}};
    CanonicalAtom a;
    try {
      a = canonicalize_atom(raw, i, f);
    } catch (const Error& e) {
      throw bad_payload(e.what());
    }
    // an on-domain equality picks out exactly one value
    std::uint32_t hit = 0, count = 0;
    for (std::uint32_t v = 0; v < f.domain_size(); ++v)
      if (a.holds(v)) {
        hit = v;
        ++count;
      }
    if (count != 1) throw bad_payload("value for '" + f.name + "' is not on its domain");
    p.values.push_back(hit);
  }
  if (j.size() != features.size()) throw bad_payload("profile has undeclared features");
  return p;
}

json feature_to_json(const FeatureDef& f) {
  json j = {{"name", f.name}};
  if (!f.label.empty()) j["label"] = f.label;
  switch (f.kind) {
    case FeatureKind::kNumeric:
      j["kind"] = "numeric";
      j["min"] = f.min;
      j["max"] = f.max;
      j["step"] = f.step;
      j["unit"] = f.unit;
      break;
    case FeatureKind::kBoolean:
      j["kind"] = "boolean";
      break;
    case FeatureKind::kCategorical:
      j["kind"] = "categorical";
      j["values"] = f.categories;
      break;
  }
  return j;
}

json classification_to_json(const Classification& c, const Study& study) {
  json scores = json::object(), probs = json::object();
  for (std::size_t i = 0; i < c.scores.size(); ++i) {
    scores[study.classes.at(i)] = c.scores[i];
    probs[study.classes.at(i)] = c.probabilities[i];
  }
  return {{"label", study.classes.at(c.label)},
          {"scores", std::move(scores)},
          {"probabilities", std::move(probs)},
          {"fulfilled_rule_ids", c.fulfilled_rule_ids}};
}

json menu_to_json(const ClauseMenu& menu, const Study& study) {
  auto atoms = [&](const std::vector<CanonicalAtom>& list) {
    json arr = json::array();
    for (std::size_t i = 0; i < list.size(); ++i) {
      json a = atom_to_json(list[i], study.features);
      a["id"] = "a" + std::to_string(i);
      a["text"] = render_atom(list[i], study.features);
      arr.push_back(std::move(a));
    }
    return arr;
  };
  json classes = json::array();
  for (std::size_t i = 0; i < menu.classifications.size(); ++i) {
    const auto& c = menu.classifications[i];
    classes.push_back({{"id", "c" + std::to_string(i)},
                       {"class", study.classes.at(c.cls)},
                       {"direction", std::string(direction_text(c.direction))}});
  }
  return {{"relevance_atoms", atoms(menu.relevance_atoms)},
          {"satisfaction_atoms", atoms(menu.satisfaction_atoms)},
          {"classifications", std::move(classes)}};
}

json report_to_json(const CongruenceReport& r, const Study& study) {
  auto atoms = [&](const std::vector<CanonicalAtom>& list) {
    json arr = json::array();
    for (const auto& a : list) arr.push_back(atom_source_text(a, study.features));
    return arr;
  };
  json errors = json::array();
  for (const auto& e : r.relation_errors) {
    json kinds = json::array();
    for (auto k : e.kinds) kinds.push_back(std::string(mismatch_text(k)));
    errors.push_back({{"truth_rule_id", e.truth_rule_id}, {"kinds", std::move(kinds)}});
  }
  json matching = json::array();
  for (const auto& m : r.matching)
    matching.push_back({{"elicited_index", m.elicited},
                        {"truth_rule_id", study.truth.rules.at(m.truth).id},
                        {"similarity", m.similarity}});
  return {{"missing_elements", atoms(r.missing_elements)},
          {"extra_elements", atoms(r.extra_elements)},
          {"matched_elements", atoms(r.matched_elements)},
          {"relation_errors", std::move(errors)},
          {"element_recall", r.element_recall},
          {"element_precision", r.element_precision},
          {"relation_accuracy", r.relation_accuracy},
          {"composite", r.composite},
          {"matching", std::move(matching)},
          {"truth_fingerprint", r.truth_fingerprint}};
}

json delta_to_json(const CongruenceDelta& d, const Study& study) {
  auto atoms = [&](const std::vector<CanonicalAtom>& list) {
    json arr = json::array();
    for (const auto& a : list) arr.push_back(atom_source_text(a, study.features));
    return arr;
  };
  return {{"element_recall", d.element_recall},
          {"element_precision", d.element_precision},
          {"relation_accuracy", d.relation_accuracy},
          {"composite", d.composite},
          {"acquired", atoms(d.acquired)},
          {"lost", atoms(d.lost)}};
}

json issue_to_json(const ParseIssue& issue) {
  return {{"line", issue.line},
          {"col", issue.column},
          {"severity", issue.severity == Severity::kError ? "error" : "warning"},
          {"message", issue.message}};
}

}  // namespace mma
