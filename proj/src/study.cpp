#include <algorithm>
#include <cstdio>

#include "mma/error.hpp"
#include "mma/random.hpp"
#include "mma/study.hpp"

namespace mma {

namespace {

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string clause_source(const std::vector<CanonicalAtom>& atoms,
                          std::span<const FeatureDef> features) {
  std::vector<std::string> parts;
  for (const auto& a : atoms) parts.push_back(atom_source_text(a, features));
  return join(parts, " and ");
}

}  // namespace

std::optional<std::size_t> Study::class_index(std::string_view name) const {
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i] == name) return i;
  return std::nullopt;
}

std::string print_study(const Study& s) {
  std::string out = "study " + quote(s.name) + " {\n";
  out += "  classes { " + join(s.classes, ", ") + " }\n";
  for (const auto& f : s.features) {
    out += "  feature " + f.name + ": ";
    switch (f.kind) {
      case FeatureKind::kNumeric:
        out += "numeric(" + format_number(f.min) + ".." + format_number(f.max) + ", step " +
               format_number(f.step) + ")";
        if (!f.unit.empty()) out += " unit " + quote(f.unit);
        break;
      case FeatureKind::kBoolean:
        out += "boolean";
        break;
      case FeatureKind::kCategorical:
        out += "categorical { " + join(f.categories, ", ") + " }";
        break;
    }
    if (!f.label.empty()) out += " label " + quote(f.label);
    out += "\n";
  }
  for (std::size_t c = 0; c < s.base_scores.size() && c < s.classes.size(); ++c)
    if (s.base_scores[c] != 0) out += "  base " + s.classes[c] + " = " + format_number(s.base_scores[c]) + "\n";
  for (const auto& r : s.truth.rules) {
    out += "  rule " + r.id + " { when " + clause_source(r.relevance, s.features) + " check " +
           clause_source(r.satisfaction, s.features) + " then " + s.classes.at(r.effect_class) + " " +
           std::string(direction_text(r.direction)) + " by " + format_number(r.weight, true) + " }\n";
  }
  out += "  observations { count " + std::to_string(s.observation_params.count) +
         ", demonstrate_each " + std::to_string(s.observation_params.demonstrate_each) + ", seed " +
         std::to_string(s.observation_params.seed) + " }\n";
  out += "  predictions { count " + std::to_string(s.prediction_params.count) + " }\n";
  out += "  menu { distractors_per_feature " + std::to_string(s.menu_params.distractors_per_feature) +
         ", seed " + std::to_string(s.menu_params.seed) + " }\n";
  out += "}\n";
  return out;
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t h) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string study_fingerprint(const Study& study) { return hex64(fnv1a64(print_study(study))); }

bool ClauseMenu::offers(const CanonicalAtom& atom, std::span<const FeatureDef> features) const {
  auto eq = [&](const CanonicalAtom& m) { return atoms_equivalent(atom, m, features); };
  return std::any_of(relevance_atoms.begin(), relevance_atoms.end(), eq);
}

bool ClauseMenu::offers(const ClassChoice& choice) const {
  return std::find(classifications.begin(), classifications.end(), choice) != classifications.end();
}

ClauseMenu build_menu(const Study& study, std::uint64_t seed, MenuShortfall shortfall) {
  ClauseMenu menu;
  std::vector<CanonicalAtom> truth_atoms;
  for (const auto& r : study.truth.rules) {
    truth_atoms.insert(truth_atoms.end(), r.relevance.begin(), r.relevance.end());
    truth_atoms.insert(truth_atoms.end(), r.satisfaction.begin(), r.satisfaction.end());
  }
  std::vector<CanonicalAtom> atoms = dedupe_atoms(truth_atoms, study.features);
  const std::size_t n_truth = atoms.size();

  SplitMix64 distract = make_stream(seed, Stream::kDistractors);
  const std::size_t wanted = study.menu_params.distractors_per_feature;
  for (std::size_t fi = 0; fi < study.features.size(); ++fi) {
    std::vector<CanonicalAtom> pool;
    for (auto& a : atom_space(fi, study.features[fi])) {
      bool in_truth = std::any_of(atoms.begin(), atoms.begin() + static_cast<std::ptrdiff_t>(n_truth),
                                  [&](const CanonicalAtom& t) { return atoms_equivalent(a, t, study.features); });
      if (!in_truth) pool.push_back(std::move(a));
    }
    std::size_t take = wanted;
    if (pool.size() < wanted) {
      std::string msg = "feature '" + study.features[fi].name + "' supports only " +
                        std::to_string(pool.size()) + " distractor(s); requested " +
                        std::to_string(wanted);
      if (shortfall == MenuShortfall::kThrow) throw Error(ErrorCode::kMenuExhausted, msg);
      menu.warnings.push_back(msg + ", clamped");
      take = pool.size();
    }
    // partial Fisher-Yates: the first `take` slots end up uniformly sampled
    for (std::size_t i = 0; i < take; ++i) {
      std::size_t j = i + static_cast<std::size_t>(distract.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
      atoms.push_back(pool[i]);
    }
  }

  SplitMix64 shuffle = make_stream(seed, Stream::kMenuShuffle);
  menu.relevance_atoms = atoms;
  shuffle.shuffle(std::span<CanonicalAtom>(menu.relevance_atoms));
  menu.satisfaction_atoms = atoms;
  shuffle.shuffle(std::span<CanonicalAtom>(menu.satisfaction_atoms));

  for (std::size_t c = 0; c < study.classes.size(); ++c) {
    menu.classifications.push_back({c, Direction::kMore});
    menu.classifications.push_back({c, Direction::kLess});
  }
  return menu;
}

std::string render_atom(const CanonicalAtom& atom, std::span<const FeatureDef> features) {
  const FeatureDef& f = features[atom.feature];
  const std::string& who = f.display_name();
  auto with_unit = [&](std::uint32_t i) {
    std::string v = format_number(f.grid_value(i));
    return f.unit.empty() ? v : v + " " + f.unit;
  };
  switch (atom.form) {
    case AtomForm::kAlways: return who + " has any value";
    case AtomForm::kNever: return who + " has no possible value";
    case AtomForm::kAtLeast: return who + " ≥ " + with_unit(atom.index);
    case AtomForm::kBelow: return who + " < " + with_unit(atom.index);
    case AtomForm::kEquals:
      if (f.kind == FeatureKind::kBoolean) return who + (atom.index ? " is present" : " is absent");
      if (f.kind == FeatureKind::kCategorical) return who + " is " + f.categories.at(atom.index);
      return who + " = " + with_unit(atom.index);
    case AtomForm::kNotEquals: return who + " ≠ " + with_unit(atom.index);
    case AtomForm::kOneOf: {
      std::string out = who + " is ";
      for (std::size_t i = 0; i < atom.members.size(); ++i) {
        if (i) out += i + 1 == atom.members.size() ? " or " : ", ";
        out += f.categories.at(atom.members[i]);
      }
      return out;
    }
  }
  return who;
}

std::string render_rule_text(const ConstraintRule& rule, std::span<const FeatureDef> features,
                             std::span<const std::string> classes) {
  auto conj = [&](const std::vector<CanonicalAtom>& atoms) {
    std::vector<std::string> parts;
    for (const auto& a : atoms) parts.push_back(render_atom(a, features));
    return join(parts, " AND ");
  };
  return "IF " + conj(rule.relevance) + ", THE AI CHECKS " + conj(rule.satisfaction) + "; IF MET, '" +
         classes[rule.effect_class] + "' BECOMES " +
         (rule.direction == Direction::kMore ? "MORE" : "LESS") + " LIKELY (strength " +
         format_number(rule.weight, true) + ").";
}

}  // namespace mma
