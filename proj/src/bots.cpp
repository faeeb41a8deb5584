#include "mma/bots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "mma/error.hpp"

namespace mma {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return s;
}

double parse_real(std::string_view key, std::string_view v) {
  std::string buf(v);
  char* end = nullptr;
  double d = std::strtod(buf.c_str(), &end);
  if (buf.empty() || end != buf.c_str() + buf.size() || !std::isfinite(d))
    throw Error(ErrorCode::kInvalidValue, "bot parameter '" + std::string(key) + "' needs a number, got '" + buf + "'");
  return d;
}

std::uint64_t parse_count(std::string_view key, std::string_view v) {
  double d = parse_real(key, v);
  if (d < 0 || d != std::floor(d))
    throw Error(ErrorCode::kInvalidValue, "bot parameter '" + std::string(key) + "' needs a whole number");
  return static_cast<std::uint64_t>(d);
}

std::string_view kind_name(BotKind k) {
  switch (k) {
    case BotKind::kPerfect: return "perfect";
    case BotKind::kForgetful: return "forgetful";
    case BotKind::kRandom: return "random";
    case BotKind::kFrequency: return "frequency";
  }
  return "?";
}

}  // namespace

BotSpec BotSpec::parse(std::string_view text) {
  text = trim(text);
  auto colon = text.find(':');
  std::string_view name = trim(text.substr(0, colon));
  std::string_view params = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);

  BotSpec spec;
  if (name == "perfect") spec.kind = BotKind::kPerfect;
  else if (name == "forgetful") spec.kind = BotKind::kForgetful;
  else if (name == "random") spec.kind = BotKind::kRandom;
  else if (name == "frequency") spec.kind = BotKind::kFrequency;
  else
    throw Error(ErrorCode::kInvalidValue,
                "unknown bot '" + std::string(name) + "' (expected perfect, forgetful, random or frequency)");

  while (!params.empty()) {
    auto comma = params.find(',');
    std::string_view item = trim(params.substr(0, comma));
    params = comma == std::string_view::npos ? std::string_view{} : params.substr(comma + 1);
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::kInvalidValue, "bot parameter '" + std::string(item) + "' needs key=value");
    std::string_view key = trim(item.substr(0, eq));
    std::string_view value = trim(item.substr(eq + 1));
    if (spec.kind == BotKind::kForgetful && key == "p") {
      spec.drop_probability = parse_real(key, value);
    } else if (spec.kind == BotKind::kFrequency && key == "min_support") {
      spec.min_support = parse_count(key, value);
    } else if (spec.kind == BotKind::kFrequency && (key == "lift" || key == "lift_threshold")) {
      spec.lift_threshold = parse_real(key, value);
    } else {
      throw Error(ErrorCode::kInvalidValue,
                  "bot '" + std::string(name) + "' has no parameter '" + std::string(key) + "'");
    }
  }
  if (auto problem = spec.check()) throw Error(ErrorCode::kInvalidValue, *problem);
  return spec;
}

std::string BotSpec::text() const {
  std::string out(kind_name(kind));
  if (kind == BotKind::kForgetful) out += ":p=" + format_number(drop_probability);
  if (kind == BotKind::kFrequency)
    out += ":min_support=" + std::to_string(min_support) + ",lift=" + format_number(lift_threshold);
  return out;
}

std::optional<std::string> BotSpec::check() const {
  if (kind == BotKind::kForgetful && !(drop_probability >= 0 && drop_probability <= 1))
    return "forgetful p must lie in [0, 1]";
  if (kind == BotKind::kFrequency) {
    if (min_support < 1) return "frequency min_support must be at least 1";
    if (!(lift_threshold > 0 && lift_threshold < 1)) return "frequency lift must lie in (0, 1)";
  }
  return std::nullopt;
}

bool rules_equivalent(const ConstraintRule& a, const ConstraintRule& b, std::span<const FeatureDef> features) {
  return a.effect_class == b.effect_class && a.direction == b.direction &&
         atom_sets_equivalent(a.relevance, b.relevance, features) &&
         atom_sets_equivalent(a.satisfaction, b.satisfaction, features);
}

Bot::Bot(BotSpec spec, std::span<const FeatureDef> features, std::size_t n_classes, const ClauseMenu& menu)
    : spec_(spec),
      features_(features.begin(), features.end()),
      n_classes_(n_classes),
      choices_(menu.classifications),
      rng_(spec.seed) {
  std::vector<CanonicalAtom> all = menu.relevance_atoms;
  all.insert(all.end(), menu.satisfaction_atoms.begin(), menu.satisfaction_atoms.end());
  atoms_ = dedupe_atoms(all, features_);
  if (spec_.kind == BotKind::kFrequency) {
    n_rs_.assign(atoms_.size() * atoms_.size() * n_classes_, 0);
    n_r_not_s_.assign(n_rs_.size(), 0);
  }
}

void Bot::observe(const Observation& obs) {
  ++n_seen_;
  if (spec_.kind != BotKind::kFrequency) return;
  const std::size_t c = obs.classification.label;
  std::vector<bool> holds(atoms_.size());
  for (std::size_t i = 0; i < atoms_.size(); ++i) holds[i] = eval_atom(atoms_[i], obs.profile);
  for (std::size_t r = 0; r < atoms_.size(); ++r) {
    if (!holds[r]) continue;
    for (std::size_t s = 0; s < atoms_.size(); ++s) {
      if (s == r) continue;
      (holds[s] ? n_rs_ : n_r_not_s_)[pair_slot(r, s, c)]++;
    }
  }
}

std::size_t Bot::atom_slot(const CanonicalAtom& atom) const {
  for (std::size_t i = 0; i < atoms_.size(); ++i)
    if (atoms_equivalent(atoms_[i], atom, features_)) return i;
  return atoms_.size();
}

std::uint64_t Bot::support(const CanonicalAtom& r, const CanonicalAtom& s, std::size_t cls) const {
  if (spec_.kind != BotKind::kFrequency) return 0;
  std::size_t ri = atom_slot(r), si = atom_slot(s);
  if (ri == atoms_.size() || si == atoms_.size() || ri == si || cls >= n_classes_) return 0;
  return n_rs_[pair_slot(ri, si, cls)];
}

RuleSet Bot::mine() const {
  RuleSet out;
  for (std::size_t r = 0; r < atoms_.size(); ++r) {
    for (std::size_t s = 0; s < atoms_.size(); ++s) {
      if (s == r) continue;
      std::uint64_t tot_rs = 0, tot_rns = 0;
      for (std::size_t c = 0; c < n_classes_; ++c) {
        tot_rs += n_rs_[pair_slot(r, s, c)];
        tot_rns += n_r_not_s_[pair_slot(r, s, c)];
      }
      if (tot_rs == 0 || tot_rns == 0) continue;
      for (std::size_t c = 0; c < n_classes_; ++c) {
        std::uint64_t support = n_rs_[pair_slot(r, s, c)];
        if (support < spec_.min_support) continue;
        double diff = static_cast<double>(support) / static_cast<double>(tot_rs) -
                      static_cast<double>(n_r_not_s_[pair_slot(r, s, c)]) / static_cast<double>(tot_rns);
        if (std::fabs(diff) < spec_.lift_threshold) continue;
        ConstraintRule rule;
        rule.relevance = {atoms_[r]};
        rule.satisfaction = {atoms_[s]};
        rule.effect_class = c;
        rule.direction = diff > 0 ? Direction::kMore : Direction::kLess;
        rule.weight = 1.0;
        out.rules.push_back(std::move(rule));
      }
    }
  }
  return out;
}

void Bot::add_learned(const ConstraintRule& rule) {
  for (const auto& l : learned_)
    if (rules_equivalent(l, rule, features_)) return;
  learned_.push_back(rule);
}

RuleSet Bot::elicit(const RuleSet& truth) {
  RuleSet base;
  switch (spec_.kind) {
    case BotKind::kPerfect:
      base = truth;
      break;
    case BotKind::kForgetful:
      if (!drops_decided_) {
        dropped_.clear();
        for (std::size_t i = 0; i < truth.size(); ++i) dropped_.push_back(rng_.unit() < spec_.drop_probability);
        drops_decided_ = true;
      }
      for (std::size_t i = 0; i < truth.size(); ++i)
        if (i >= dropped_.size() || !dropped_[i]) base.rules.push_back(truth.rules[i]);
      break;
    case BotKind::kRandom: {
      if (atoms_.empty() || choices_.empty()) break;
      auto n = rng_.below(atoms_.size() + 1);
      for (std::uint64_t i = 0; i < n; ++i) {
        ConstraintRule rule;
        rule.relevance = {atoms_[rng_.below(atoms_.size())]};
        rule.satisfaction = {atoms_[rng_.below(atoms_.size())]};
        const ClassChoice& choice = choices_[rng_.below(choices_.size())];
        rule.effect_class = choice.cls;
        rule.direction = choice.direction;
        base.rules.push_back(std::move(rule));
      }
      break;
    }
    case BotKind::kFrequency:
      base = mine();
      break;
  }

  RuleSet out;
  auto add = [&](const ConstraintRule& rule) {
    for (const auto& r : out.rules)
      if (rules_equivalent(r, rule, features_)) return;
    out.rules.push_back(rule);
  };
  for (const auto& r : base.rules) add(r);
  if (spec_.kind != BotKind::kRandom)
    for (const auto& r : learned_) add(r);
  for (std::size_t i = 0; i < out.rules.size(); ++i) out.rules[i].id = "E" + std::to_string(i + 1);
  model_ = out;
  return out;
}

void Bot::learn(std::span<const ConstraintRule> explanations) {
  if (spec_.kind == BotKind::kRandom) return;
  for (const auto& r : explanations) add_learned(r);
}

std::size_t Bot::predict(const PatientProfile& profile) {
  if (spec_.kind == BotKind::kRandom) return static_cast<std::size_t>(rng_.below(std::max<std::size_t>(n_classes_, 1)));
  std::vector<double> zero(n_classes_, 0.0);
  return classify(model_, zero, profile).label;
}

}  // namespace mma
