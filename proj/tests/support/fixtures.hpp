#pragma once

// Shared test helpers: the demo fixture, a random study generator and
// brute-force oracles that do not go through the canonical forms.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "mma/error.hpp"
#include "mma/event_log.hpp"
#include "mma/profile_gen.hpp"
#include "mma/random.hpp"
#include "mma/rule_core.hpp"
#include "mma/study.hpp"

namespace mma::testing {

inline std::string fixture_path() { return std::string(MMA_STUDIES_DIR) + "/diabetes-demo.study"; }

inline std::string fixture_text() { return read_file(fixture_path()); }

inline Study parse_or_die(std::string_view text) {
  ParseResult r = parse_study(text);
  if (!r.ok()) {
    std::string msg = "fixture does not parse:";
    for (const auto& i : r.issues) msg += "\n  " + format_issue(i);
    throw std::runtime_error(msg);
  }
  return *r.study;
}

inline Study fixture() { return parse_or_die(fixture_text()); }

/// The fixture with a display label on glucose, as used by the explanation template.
inline Study labelled_fixture() {
  std::string text = fixture_text();
  const std::string unit = "unit \"mg/dL\"";
  text.replace(text.find(unit), unit.size(), unit + " label \"blood glucose\"");
  return parse_or_die(text);
}

inline PatientProfile demo_profile(const Study& s, int glucose, bool fatigue, bool heart, const std::string& time) {
  PatientProfile p;
  const FeatureDef& g = s.features[0];
  p.values.push_back(static_cast<std::uint32_t>(std::lround((glucose - g.min) / g.step)));
  p.values.push_back(fatigue ? 1 : 0);
  p.values.push_back(heart ? 1 : 0);
  const auto& cats = s.features[3].categories;
  p.values.push_back(static_cast<std::uint32_t>(std::find(cats.begin(), cats.end(), time) - cats.begin()));
  return p;
}

inline CanonicalAtom atom(const Study& s, const std::string& feature, Comparator cmp, std::vector<Literal> values) {
  return canonicalize_atom(RawAtom{feature, cmp, std::move(values)}, s.features);
}

inline CanonicalAtom atom_num(const Study& s, const std::string& feature, Comparator cmp, double v) {
  return atom(s, feature, cmp, {Literal::of_number(v)});
}

inline CanonicalAtom atom_word(const Study& s, const std::string& feature, Comparator cmp, const std::string& w) {
  return atom(s, feature, cmp, {Literal::of_word(w)});
}

inline ConstraintRule make_rule(std::string id, std::vector<CanonicalAtom> rel, std::vector<CanonicalAtom> sat,
                                std::size_t cls, Direction dir, double weight = 1.0) {
  ConstraintRule r;
  r.id = std::move(id);
  r.relevance = std::move(rel);
  r.satisfaction = std::move(sat);
  r.effect_class = cls;
  r.direction = dir;
  r.weight = weight;
  return r;
}

/// Truth set of an atom over the whole profile domain, evaluated value by value
/// from the raw comparator semantics rather than the canonical form.
inline std::vector<bool> brute_truth_set(const RawAtom& raw, std::span<const FeatureDef> features) {
  auto fi = *find_feature(features, raw.feature);
  const FeatureDef& f = features[fi];
  auto holds_value = [&](std::uint32_t v) {
    if (f.kind == FeatureKind::kNumeric) {
      double x = f.grid_value(v);
      double t = *raw.values.at(0).number;
      switch (raw.cmp) {
        case Comparator::kGreater: return x > t;
        case Comparator::kGreaterEqual: return x >= t;
        case Comparator::kLess: return x < t;
        case Comparator::kLessEqual: return x <= t;
        case Comparator::kEqual: return x == t;
        case Comparator::kNotEqual: return x != t;
        case Comparator::kIn: break;
      }
      return false;
    }
    auto word_of = [&](std::uint32_t i) -> std::string {
      if (f.kind == FeatureKind::kBoolean) return i ? "true" : "false";
      return f.categories[i];
    };
    auto in_values = [&](std::uint32_t i) {
      return std::any_of(raw.values.begin(), raw.values.end(), [&](const Literal& l) { return l.text == word_of(i); });
    };
    switch (raw.cmp) {
      case Comparator::kEqual:
      case Comparator::kIn: return in_values(v);
      case Comparator::kNotEqual: return !in_values(v);
      default: return false;
    }
  };
  std::vector<bool> out;
  for (const auto& p : enumerate_domain(features)) out.push_back(holds_value(p.values[fi]));
  return out;
}

/// Every raw atom a study author could write on `f`: each comparator against
/// every grid value, every half-step between them and two thresholds below the
/// range; each non-empty category subset.
inline std::vector<RawAtom> every_raw_atom(const FeatureDef& f) {
  std::vector<RawAtom> out;
  switch (f.kind) {
    case FeatureKind::kNumeric: {
      std::vector<double> thresholds;
      for (std::size_t i = 0; i < f.domain_size(); ++i) {
        thresholds.push_back(f.grid_value(i));
        thresholds.push_back(f.grid_value(i) + f.step / 2);
      }
      thresholds.push_back(f.min - f.step);
      thresholds.push_back(f.min - f.step / 2);
      for (double t : thresholds)
        for (auto cmp : {Comparator::kGreater, Comparator::kGreaterEqual, Comparator::kLess, Comparator::kLessEqual,
                         Comparator::kEqual, Comparator::kNotEqual})
          out.push_back({f.name, cmp, {Literal::of_number(t)}});
      break;
    }
    case FeatureKind::kBoolean:
      for (auto cmp : {Comparator::kEqual, Comparator::kNotEqual})
        for (const char* w : {"true", "false"}) out.push_back({f.name, cmp, {Literal::of_word(w)}});
      break;
    case FeatureKind::kCategorical: {
      const std::size_t m = f.categories.size();
      for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
        std::vector<Literal> vals;
        for (std::size_t k = 0; k < m; ++k)
          if (mask & (1u << k)) vals.push_back(Literal::of_word(f.categories[k]));
        out.push_back({f.name, Comparator::kIn, vals});
        if (vals.size() == 1) {
          out.push_back({f.name, Comparator::kEqual, vals});
          out.push_back({f.name, Comparator::kNotEqual, vals});
        }
      }
      break;
    }
  }
  return out;
}

/// Truth set of a canonical atom over the whole profile domain via eval_atom.
inline std::vector<bool> eval_truth_set(const CanonicalAtom& a, std::span<const FeatureDef> features) {
  std::vector<bool> out;
  for (const auto& p : enumerate_domain(features)) out.push_back(eval_atom(a, p));
  return out;
}

/// Best total weight over all partial one-to-one assignments (exhaustive).
inline double brute_force_best(const std::vector<std::vector<double>>& w) {
  const std::size_t rows = w.size();
  const std::size_t cols = rows ? w[0].size() : 0;
  std::vector<char> used(cols, 0);
  std::function<double(std::size_t)> go = [&](std::size_t r) -> double {
    if (r == rows) return 0.0;
    double best = go(r + 1);  // row left unmatched
    for (std::size_t c = 0; c < cols; ++c) {
      if (used[c] || w[r][c] <= 0) continue;
      used[c] = 1;
      best = std::max(best, w[r][c] + go(r + 1));
      used[c] = 0;
    }
    return best;
  };
  return go(0);
}

struct StudyShape {
  std::size_t min_classes = 2, max_classes = 4;
  std::size_t min_features = 3, max_features = 6;
  std::size_t min_rules = 2, max_rules = 5;
};

inline std::size_t pick(SplitMix64& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

inline FeatureDef random_feature(SplitMix64& rng, std::size_t i) {
  std::string name = "f" + std::to_string(i);
  switch (rng.below(3)) {
    case 0: {
      double step = std::vector<double>{1, 2, 5, 0.5}[rng.below(4)];
      double min = static_cast<double>(rng.below(20)) * step;
      auto n = pick(rng, 3, 12);
      FeatureDef f = FeatureDef::numeric(name, min, min + static_cast<double>(n - 1) * step, step,
                                         rng.below(2) ? "u" : "");
      return f;
    }
    case 1: return FeatureDef::boolean(name);
    default: {
      std::vector<std::string> cats;
      auto n = pick(rng, 2, 4);
      for (std::size_t k = 0; k < n; ++k) cats.push_back("v" + std::to_string(i) + "_" + std::to_string(k));
      return FeatureDef::categorical(name, cats);
    }
  }
}

/// A valid study whose every rule is fulfillable and whose stimuli generate.
/// Goes through print/parse so the result is exactly what a study file yields.
inline Study random_study(SplitMix64& rng, const StudyShape& shape = {}) {
  for (;;) {
    Study s;
    s.name = "random-" + std::to_string(rng.next() % 100000);
    auto nc = pick(rng, shape.min_classes, shape.max_classes);
    for (std::size_t c = 0; c < nc; ++c) s.classes.push_back("c" + std::to_string(c));
    s.base_scores.assign(nc, 0.0);
    auto nf = pick(rng, shape.min_features, shape.max_features);
    for (std::size_t i = 0; i < nf; ++i) s.features.push_back(random_feature(rng, i));

    auto nr = pick(rng, shape.min_rules, shape.max_rules);
    for (std::size_t r = 0; r < nr; ++r) {
      auto clause = [&] {
        std::vector<CanonicalAtom> atoms;
        auto k = pick(rng, 1, 2);
        for (std::size_t j = 0; j < k; ++j) {
          auto fi = static_cast<std::size_t>(rng.below(nf));
          auto space = atom_space(fi, s.features[fi]);
          atoms.push_back(space[rng.below(space.size())]);
        }
        return dedupe_atoms(atoms, s.features);
      };
      ConstraintRule rule = make_rule("R" + std::to_string(r + 1), clause(), clause(), rng.below(nc),
                                      rng.below(2) ? Direction::kMore : Direction::kLess,
                                      std::vector<double>{0.5, 1.0, 1.5, 2.0}[rng.below(4)]);
      if (!can_fulfill(rule, s.features)) {
        --r;
        continue;
      }
      s.truth.rules.push_back(std::move(rule));
    }
    s.observation_params = {40, 2, rng.next()};
    s.prediction_params = {5};
    s.menu_params = {2, rng.next()};
    try {
      Study parsed = parse_or_die(print_study(s));
      generate_observations(parsed);
      return parsed;
    } catch (const Error&) {
      continue;  // coverage did not fit the count; draw again
    }
  }
}

}  // namespace mma::testing
