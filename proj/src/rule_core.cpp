#include "mma/rule_core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>

#include "mma/error.hpp"

namespace mma {

namespace {

// Numeric grids are handled as scaled integers so thresholds compare exactly.
struct Grid {
  std::int64_t lo = 0;
  std::int64_t step = 1;
  std::size_t n = 0;
  long double scale = 1;
};

int decimals_of(double x) {
  long double scaled = std::fabs(static_cast<long double>(x));
  for (int d = 0; d < 9; ++d) {
    long double r = std::round(scaled);
    if (std::fabs(scaled - r) <= 1e-9L * std::max<long double>(1, scaled)) return d;
    scaled *= 10;
  }
  return 9;
}

Grid grid_of(const FeatureDef& f) {
  int digits = std::max({decimals_of(f.min), decimals_of(f.max), decimals_of(f.step)});
  Grid g;
  g.scale = std::pow(10.0L, digits);
  g.lo = std::llround(static_cast<long double>(f.min) * g.scale);
  g.step = std::llround(static_cast<long double>(f.step) * g.scale);
  std::int64_t hi = std::llround(static_cast<long double>(f.max) * g.scale);
  if (g.step <= 0 || hi <= g.lo) return g;
  g.n = static_cast<std::size_t>((hi - g.lo) / g.step) + 1;
  return g;
}

// Number of grid points strictly below t, and at or below t.
std::pair<std::size_t, std::size_t> count_below(const Grid& g, double t) {
  long double ts = static_cast<long double>(t) * g.scale;
  long double rel = (ts - static_cast<long double>(g.lo)) / static_cast<long double>(g.step);
  auto clamp_count = [&](long double c) -> std::size_t {
    if (c <= 0) return 0;
    if (c >= static_cast<long double>(g.n)) return g.n;
    return static_cast<std::size_t>(c);
  };
  long double nearest = std::round(ts);
  if (std::fabs(ts - nearest) < 1e-6L) {
    long double exact = (nearest - static_cast<long double>(g.lo)) / static_cast<long double>(g.step);
    std::size_t below = clamp_count(std::ceil(exact));
    std::size_t at_most = clamp_count(std::floor(exact) + 1);
    return {below, at_most};
  }
  std::size_t c = clamp_count(std::floor(rel) + 1);
  return {c, c};
}

Error invalid_value(const FeatureDef& f, const std::string& what) {
  return Error(ErrorCode::kInvalidValue,
               "invalid value '" + what + "' for feature '" + f.name + "'");
}

Error illegal_comparator(const FeatureDef& f, Comparator cmp) {
  std::string kind = f.kind == FeatureKind::kNumeric   ? "numeric"
                     : f.kind == FeatureKind::kBoolean ? "boolean"
                                                       : "categorical";
  return Error(ErrorCode::kIllegalComparator, "comparator '" + std::string(comparator_text(cmp)) +
                                                  "' is not allowed for " + kind + " feature '" +
                                                  f.name + "'");
}

CanonicalAtom make(std::size_t feature, AtomForm form, std::uint32_t index = 0) {
  CanonicalAtom a;
  a.feature = feature;
  a.form = form;
  a.index = index;
  return a;
}

// Truth set shapes over a numeric grid of n >= 2 points, mapped to their
// unique representative: suffix, then prefix, then singleton, then complement.
CanonicalAtom suffix(std::size_t fi, std::size_t k, std::size_t n) {
  if (k == 0) return make(fi, AtomForm::kAlways);
  if (k >= n) return make(fi, AtomForm::kNever);
  return make(fi, AtomForm::kAtLeast, static_cast<std::uint32_t>(k));
}

CanonicalAtom prefix(std::size_t fi, std::size_t k, std::size_t n) {
  if (k == 0) return make(fi, AtomForm::kNever);
  if (k >= n) return make(fi, AtomForm::kAlways);
  return make(fi, AtomForm::kBelow, static_cast<std::uint32_t>(k));
}

CanonicalAtom singleton(std::size_t fi, std::size_t i, std::size_t n) {
  if (i + 1 == n) return suffix(fi, i, n);
  if (i == 0) return prefix(fi, 1, n);
  return make(fi, AtomForm::kEquals, static_cast<std::uint32_t>(i));
}

CanonicalAtom all_but(std::size_t fi, std::size_t i, std::size_t n) {
  if (i == 0) return suffix(fi, 1, n);
  if (i + 1 == n) return prefix(fi, n - 1, n);
  return make(fi, AtomForm::kNotEquals, static_cast<std::uint32_t>(i));
}

CanonicalAtom one_of(std::size_t fi, std::vector<std::uint32_t> members, std::size_t n) {
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  if (members.empty()) return make(fi, AtomForm::kNever);
  if (members.size() >= n) return make(fi, AtomForm::kAlways);
  CanonicalAtom a = make(fi, AtomForm::kOneOf);
  a.members = std::move(members);
  return a;
}

// Maps any atom (possibly hand-built) onto its canonical representative.
CanonicalAtom normalize(const CanonicalAtom& atom, const FeatureDef& f) {
  std::size_t n = f.domain_size();
  std::size_t fi = atom.feature;
  switch (atom.form) {
    case AtomForm::kAlways:
    case AtomForm::kNever:
      return make(fi, atom.form);
    case AtomForm::kAtLeast:
      return suffix(fi, atom.index, n);
    case AtomForm::kBelow:
      return prefix(fi, atom.index, n);
    case AtomForm::kEquals:
      if (atom.index >= n) return make(fi, AtomForm::kNever);
      if (f.kind == FeatureKind::kNumeric) return singleton(fi, atom.index, n);
      if (f.kind == FeatureKind::kBoolean) return make(fi, AtomForm::kEquals, atom.index);
      return one_of(fi, {atom.index}, n);
    case AtomForm::kNotEquals:
      if (atom.index >= n) return make(fi, AtomForm::kAlways);
      if (f.kind == FeatureKind::kNumeric) return all_but(fi, atom.index, n);
      if (f.kind == FeatureKind::kBoolean) return make(fi, AtomForm::kEquals, 1 - atom.index);
      {
        std::vector<std::uint32_t> rest;
        for (std::uint32_t v = 0; v < n; ++v)
          if (v != atom.index) rest.push_back(v);
        return one_of(fi, std::move(rest), n);
      }
    case AtomForm::kOneOf: {
      std::vector<std::uint32_t> inside;
      for (auto m : atom.members)
        if (m < n) inside.push_back(m);
      if (f.kind == FeatureKind::kBoolean) {
        CanonicalAtom o = one_of(fi, inside, n);
        if (o.form == AtomForm::kOneOf) return make(fi, AtomForm::kEquals, o.members.front());
        return o;
      }
      return one_of(fi, std::move(inside), n);
    }
  }
  return atom;
}

}  // namespace

FeatureDef FeatureDef::numeric(std::string name, double min, double max, double step,
                               std::string unit) {
  FeatureDef f;
  f.name = std::move(name);
  f.kind = FeatureKind::kNumeric;
  f.min = min;
  f.max = max;
  f.step = step;
  f.unit = std::move(unit);
  return f;
}

FeatureDef FeatureDef::boolean(std::string name) {
  FeatureDef f;
  f.name = std::move(name);
  f.kind = FeatureKind::kBoolean;
  return f;
}

FeatureDef FeatureDef::categorical(std::string name, std::vector<std::string> values) {
  FeatureDef f;
  f.name = std::move(name);
  f.kind = FeatureKind::kCategorical;
  f.categories = std::move(values);
  return f;
}

std::size_t FeatureDef::domain_size() const {
  switch (kind) {
    case FeatureKind::kNumeric:
      return grid_of(*this).n;
    case FeatureKind::kBoolean:
      return 2;
    case FeatureKind::kCategorical:
      return categories.size();
  }
  return 0;
}

double FeatureDef::grid_value(std::size_t i) const {
  Grid g = grid_of(*this);
  return static_cast<double>(static_cast<long double>(g.lo + static_cast<std::int64_t>(i) * g.step) /
                             g.scale);
}

std::optional<std::string> FeatureDef::check() const {
  if (name.empty()) return "feature name is empty";
  switch (kind) {
    case FeatureKind::kNumeric: {
      if (!(min < max)) return "numeric range needs min < max";
      if (!(step > 0)) return "numeric step must be positive";
      Grid g = grid_of(*this);
      long double span = (static_cast<long double>(max) - min) * g.scale;
      if (g.step <= 0 || std::llround(span) % g.step != 0)
        return "numeric range is not divisible by its step";
      return std::nullopt;
    }
    case FeatureKind::kBoolean:
      return std::nullopt;
    case FeatureKind::kCategorical: {
      std::set<std::string> distinct(categories.begin(), categories.end());
      if (distinct.size() != categories.size()) return "categorical values must be distinct";
      if (distinct.size() < 2) return "categorical feature needs at least two values";
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::optional<std::size_t> find_feature(std::span<const FeatureDef> features,
                                        std::string_view name) {
  for (std::size_t i = 0; i < features.size(); ++i)
    if (features[i].name == name) return i;
  return std::nullopt;
}

void check_profile(const PatientProfile& profile, std::span<const FeatureDef> features) {
  if (profile.values.size() != features.size())
    throw Error(ErrorCode::kInvalidValue, "profile must assign exactly one value per feature");
  for (std::size_t i = 0; i < features.size(); ++i)
    if (profile.values[i] >= features[i].domain_size())
      throw Error(ErrorCode::kInvalidValue,
                  "value out of domain for feature '" + features[i].name + "'");
}

std::string_view comparator_text(Comparator cmp) {
  switch (cmp) {
    case Comparator::kGreater: return ">";
    case Comparator::kGreaterEqual: return ">=";
    case Comparator::kLess: return "<";
    case Comparator::kLessEqual: return "<=";
    case Comparator::kEqual: return "==";
    case Comparator::kNotEqual: return "!=";
    case Comparator::kIn: return "in";
  }
  return "?";
}

std::optional<Comparator> parse_comparator(std::string_view text) {
  if (text == ">") return Comparator::kGreater;
  if (text == ">=" || text == "≥") return Comparator::kGreaterEqual;
  if (text == "<") return Comparator::kLess;
  if (text == "<=" || text == "≤") return Comparator::kLessEqual;
  if (text == "==") return Comparator::kEqual;
  if (text == "!=" || text == "≠") return Comparator::kNotEqual;
  if (text == "in") return Comparator::kIn;
  return std::nullopt;
}

Literal Literal::of_number(double v) { return Literal{format_number(v), v}; }
Literal Literal::of_word(std::string w) { return Literal{std::move(w), std::nullopt}; }

bool CanonicalAtom::holds(std::uint32_t value) const {
  switch (form) {
    case AtomForm::kAlways: return true;
    case AtomForm::kNever: return false;
    case AtomForm::kAtLeast: return value >= index;
    case AtomForm::kBelow: return value < index;
    case AtomForm::kEquals: return value == index;
    case AtomForm::kNotEquals: return value != index;
    case AtomForm::kOneOf: return std::binary_search(members.begin(), members.end(), value);
  }
  return false;
}

std::string_view direction_text(Direction d) { return d == Direction::kMore ? "more" : "less"; }

std::optional<Direction> parse_direction(std::string_view text) {
  if (text == "more") return Direction::kMore;
  if (text == "less") return Direction::kLess;
  return std::nullopt;
}

std::string_view rule_status_text(RuleStatus s) {
  switch (s) {
    case RuleStatus::kInapplicable: return "inapplicable";
    case RuleStatus::kTriggered: return "triggered";
    case RuleStatus::kFulfilled: return "fulfilled";
  }
  return "?";
}

bool eval_atom(const CanonicalAtom& atom, const PatientProfile& profile) {
  if (atom.feature >= profile.values.size())
    throw Error(ErrorCode::kUnknownFeature,
                "atom references feature #" + std::to_string(atom.feature) +
                    " which the profile does not declare");
  return atom.holds(profile.values[atom.feature]);
}

RuleStatus rule_status(const ConstraintRule& rule, const PatientProfile& profile) {
  for (const auto& a : rule.relevance)
    if (!eval_atom(a, profile)) return RuleStatus::kInapplicable;
  for (const auto& a : rule.satisfaction)
    if (!eval_atom(a, profile)) return RuleStatus::kTriggered;
  return RuleStatus::kFulfilled;
}

Classification classify(const RuleSet& rules, std::span<const double> base_scores,
                        const PatientProfile& profile) {
  Classification out;
  out.scores.assign(base_scores.begin(), base_scores.end());
  for (const auto& rule : rules.rules) {
    if (rule.effect_class >= out.scores.size())
      throw Error(ErrorCode::kInvalidValue, "rule '" + rule.id + "' targets an undeclared class");
    if (rule_status(rule, profile) != RuleStatus::kFulfilled) continue;
    out.scores[rule.effect_class] += rule.direction == Direction::kMore ? rule.weight : -rule.weight;
    out.fulfilled_rule_ids.push_back(rule.id);
  }
  if (out.scores.empty()) return out;

  double top = *std::max_element(out.scores.begin(), out.scores.end());
  double total = 0.0;
  out.probabilities.resize(out.scores.size());
  for (std::size_t c = 0; c < out.scores.size(); ++c) {
    out.probabilities[c] = std::exp(out.scores[c] - top);
    total += out.probabilities[c];
  }
  for (auto& p : out.probabilities) p /= total;

  out.label = 0;
  for (std::size_t c = 1; c < out.probabilities.size(); ++c)
    if (out.probabilities[c] > out.probabilities[out.label]) out.label = c;
  return out;
}

CanonicalAtom canonicalize_atom(const RawAtom& raw, std::size_t fi, const FeatureDef& f) {
  const std::size_t n = f.domain_size();
  auto single = [&]() -> const Literal& {
    if (raw.values.size() != 1)
      throw Error(ErrorCode::kInvalidValue,
                  "comparator '" + std::string(comparator_text(raw.cmp)) + "' takes one value");
    return raw.values.front();
  };

  switch (f.kind) {
    case FeatureKind::kNumeric: {
      if (raw.cmp == Comparator::kIn) throw illegal_comparator(f, raw.cmp);
      const Literal& lit = single();
      if (!lit.number || !std::isfinite(*lit.number)) throw invalid_value(f, lit.text);
      auto [below, at_most] = count_below(grid_of(f), *lit.number);
      switch (raw.cmp) {
        case Comparator::kGreater: return suffix(fi, at_most, n);
        case Comparator::kGreaterEqual: return suffix(fi, below, n);
        case Comparator::kLess: return prefix(fi, below, n);
        case Comparator::kLessEqual: return prefix(fi, at_most, n);
        case Comparator::kEqual:
          return at_most > below ? singleton(fi, below, n) : make(fi, AtomForm::kNever);
        case Comparator::kNotEqual:
          return at_most > below ? all_but(fi, below, n) : make(fi, AtomForm::kAlways);
        case Comparator::kIn: break;
      }
      throw illegal_comparator(f, raw.cmp);
    }
    case FeatureKind::kBoolean: {
      if (raw.cmp != Comparator::kEqual && raw.cmp != Comparator::kNotEqual)
        throw illegal_comparator(f, raw.cmp);
      const Literal& lit = single();
      std::uint32_t v;
      if (lit.text == "true") v = 1;
      else if (lit.text == "false") v = 0;
      else throw invalid_value(f, lit.text);
      if (raw.cmp == Comparator::kNotEqual) v = 1 - v;
      return make(fi, AtomForm::kEquals, v);
    }
    case FeatureKind::kCategorical: {
      if (raw.cmp != Comparator::kEqual && raw.cmp != Comparator::kNotEqual &&
          raw.cmp != Comparator::kIn)
        throw illegal_comparator(f, raw.cmp);
      std::vector<std::uint32_t> chosen;
      if (raw.cmp != Comparator::kIn) single();
      if (raw.values.empty()) throw invalid_value(f, "{}");
      for (const auto& lit : raw.values) {
        auto it = std::find(f.categories.begin(), f.categories.end(), lit.text);
        if (it == f.categories.end()) throw invalid_value(f, lit.text);
        chosen.push_back(static_cast<std::uint32_t>(it - f.categories.begin()));
      }
      if (raw.cmp == Comparator::kNotEqual) {
        std::vector<std::uint32_t> rest;
        for (std::uint32_t v = 0; v < n; ++v)
          if (v != chosen.front()) rest.push_back(v);
        chosen = std::move(rest);
      }
      return one_of(fi, std::move(chosen), n);
    }
  }
  throw illegal_comparator(f, raw.cmp);
}

CanonicalAtom canonicalize_atom(const RawAtom& raw, std::span<const FeatureDef> features) {
  auto fi = find_feature(features, raw.feature);
  if (!fi) throw Error(ErrorCode::kUnknownFeature, "unknown feature '" + raw.feature + "'");
  return canonicalize_atom(raw, *fi, features[*fi]);
}

RawAtom to_raw(const CanonicalAtom& atom, std::span<const FeatureDef> features) {
  if (atom.feature >= features.size())
    throw Error(ErrorCode::kUnknownFeature, "atom references an undeclared feature");
  const FeatureDef& f = features[atom.feature];
  CanonicalAtom a = normalize(atom, f);
  RawAtom raw;
  raw.feature = f.name;
  if (f.kind == FeatureKind::kNumeric) {
    auto at = [&](std::uint32_t i) { return Literal::of_number(f.grid_value(i)); };
    switch (a.form) {
      case AtomForm::kAlways: raw.cmp = Comparator::kGreaterEqual; raw.values = {at(0)}; break;
      case AtomForm::kNever: raw.cmp = Comparator::kLess; raw.values = {at(0)}; break;
      case AtomForm::kAtLeast: raw.cmp = Comparator::kGreaterEqual; raw.values = {at(a.index)}; break;
      case AtomForm::kBelow: raw.cmp = Comparator::kLess; raw.values = {at(a.index)}; break;
      case AtomForm::kEquals: raw.cmp = Comparator::kEqual; raw.values = {at(a.index)}; break;
      case AtomForm::kNotEquals: raw.cmp = Comparator::kNotEqual; raw.values = {at(a.index)}; break;
      case AtomForm::kOneOf: break;
    }
    return raw;
  }
  if (f.kind == FeatureKind::kBoolean) {
    if (a.form != AtomForm::kEquals)
      throw Error(ErrorCode::kInvalidValue,
                  "trivial boolean atom on '" + f.name + "' has no source form");
    raw.cmp = Comparator::kEqual;
    raw.values = {Literal::of_word(a.index ? "true" : "false")};
    return raw;
  }
  if (a.form == AtomForm::kNever)
    throw Error(ErrorCode::kInvalidValue,
                "contradictory categorical atom on '" + f.name + "' has no source form");
  raw.cmp = Comparator::kIn;
  if (a.form == AtomForm::kAlways) {
    for (const auto& c : f.categories) raw.values.push_back(Literal::of_word(c));
  } else {
    for (auto m : a.members) raw.values.push_back(Literal::of_word(f.categories[m]));
  }
  return raw;
}

bool atoms_equivalent(const CanonicalAtom& a, const CanonicalAtom& b,
                      std::span<const FeatureDef> features) {
  if (a.feature >= features.size() || b.feature >= features.size())
    throw Error(ErrorCode::kUnknownFeature, "atom references an undeclared feature");
  CanonicalAtom na = normalize(a, features[a.feature]);
  CanonicalAtom nb = normalize(b, features[b.feature]);
  if (na.trivial() || nb.trivial()) return na.form == nb.form;
  return na == nb;
}

std::vector<CanonicalAtom> dedupe_atoms(std::span<const CanonicalAtom> atoms,
                                        std::span<const FeatureDef> features) {
  std::vector<CanonicalAtom> out;
  for (const auto& a : atoms) {
    bool seen = std::any_of(out.begin(), out.end(),
                            [&](const CanonicalAtom& o) { return atoms_equivalent(a, o, features); });
    if (!seen) out.push_back(a);
  }
  return out;
}

bool atom_sets_equivalent(std::span<const CanonicalAtom> a, std::span<const CanonicalAtom> b,
                          std::span<const FeatureDef> features) {
  auto covered = [&](std::span<const CanonicalAtom> xs, std::span<const CanonicalAtom> ys) {
    return std::all_of(xs.begin(), xs.end(), [&](const CanonicalAtom& x) {
      return std::any_of(ys.begin(), ys.end(),
                         [&](const CanonicalAtom& y) { return atoms_equivalent(x, y, features); });
    });
  };
  return covered(a, b) && covered(b, a);
}

std::vector<CanonicalAtom> atom_space(std::size_t fi, const FeatureDef& f) {
  std::vector<CanonicalAtom> out;
  const std::size_t n = f.domain_size();
  switch (f.kind) {
    case FeatureKind::kNumeric:
      for (std::size_t k = 1; k < n; ++k) out.push_back(suffix(fi, k, n));
      for (std::size_t k = 1; k < n; ++k) out.push_back(prefix(fi, k, n));
      for (std::size_t i = 1; i + 1 < n; ++i) out.push_back(singleton(fi, i, n));
      for (std::size_t i = 1; i + 1 < n; ++i) out.push_back(all_but(fi, i, n));
      break;
    case FeatureKind::kBoolean:
      out.push_back(make(fi, AtomForm::kEquals, 0));
      out.push_back(make(fi, AtomForm::kEquals, 1));
      break;
    case FeatureKind::kCategorical:
      // Full subset lattice for small value lists; singletons and their
      // complements beyond that.
      if (n <= 12) {
        for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
          std::vector<std::uint32_t> members;
          for (std::uint32_t v = 0; v < n; ++v)
            if (mask & (1u << v)) members.push_back(v);
          out.push_back(one_of(fi, std::move(members), n));
        }
      } else {
        for (std::uint32_t v = 0; v < n; ++v) out.push_back(one_of(fi, {v}, n));
        for (std::uint32_t v = 0; v < n; ++v) {
          std::vector<std::uint32_t> rest;
          for (std::uint32_t w = 0; w < n; ++w)
            if (w != v) rest.push_back(w);
          out.push_back(one_of(fi, std::move(rest), n));
        }
      }
      break;
  }
  return out;
}

std::string atom_source_text(const CanonicalAtom& atom, std::span<const FeatureDef> features) {
  RawAtom raw = to_raw(atom, features);
  std::string out = raw.feature + " " + std::string(comparator_text(raw.cmp)) + " ";
  if (raw.cmp == Comparator::kIn) {
    out += "{";
    for (std::size_t i = 0; i < raw.values.size(); ++i) {
      if (i) out += ", ";
      out += raw.values[i].text;
    }
    out += "}";
  } else {
    out += raw.values.front().text;
  }
  return out;
}

std::string format_number(double v, bool keep_point) {
  if (v == 0) v = 0;  // drop the sign of negative zero
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (keep_point && std::isfinite(v) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

}  // namespace mma
