#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "mma/bots.hpp"
#include "mma/congruence.hpp"
#include "mma/simulation.hpp"

using namespace mma;
using namespace mma::testing;

namespace {

Bot make_bot(const Study& s, const std::string& spec, std::uint64_t seed = 1) {
  BotSpec b = BotSpec::parse(spec);
  b.seed = seed;
  return Bot(b, s.features, s.classes.size(), build_menu(s, s.menu_params.seed));
}

double composite(const Study& s, const RuleSet& e) { return congruence_report(e, s.truth, s.features).composite; }

}  // namespace

TEST_CASE("bot spec parsing") {
  CHECK(BotSpec::parse("perfect").kind == BotKind::kPerfect);
  CHECK(BotSpec::parse("random").kind == BotKind::kRandom);
  BotSpec f = BotSpec::parse("forgetful:p=0.25");
  CHECK(f.kind == BotKind::kForgetful);
  CHECK(f.drop_probability == 0.25);
  BotSpec q = BotSpec::parse("frequency:min_support=5,lift=0.4");
  CHECK(q.min_support == 5);
  CHECK(q.lift_threshold == 0.4);
  BotSpec d = BotSpec::parse("frequency");
  CHECK(d.min_support == kDefaultMinSupport);
  CHECK(d.lift_threshold == kDefaultLift);
  CHECK(BotSpec::parse(q.text()).min_support == 5);
  for (const char* bad : {"", "genius", "forgetful:p=1.5", "forgetful:p=-0.1", "frequency:min_support=0",
                          "frequency:lift=1", "frequency:lift=0", "frequency:bogus=1", "forgetful:p=abc",
                          "perfect:p=0.5"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(BotSpec::parse(bad), Error);
  }
}

TEST_CASE("perfect bot") {
  Study s = fixture();
  Bot bot = make_bot(s, "perfect");
  RuleSet before = bot.elicit(s.truth);
  for (const auto& o : generate_observations(s)) bot.observe(o);
  RuleSet e = bot.elicit(s.truth);
  CHECK(e == before);
  CHECK(composite(s, e) == doctest::Approx(1.0));
  for (const auto& p : enumerate_domain(s.features))
    CHECK(bot.predict(p) == classify(s.truth, s.base_scores, p).label);
}

TEST_CASE("perfect bot is perfect on random studies") {
  SplitMix64 rng(41);
  for (int k = 0; k < 60; ++k) {
    Study s = random_study(rng);
    Bot bot = make_bot(s, "perfect");
    CHECK(composite(s, bot.elicit(s.truth)) == doctest::Approx(1.0));
  }
}

TEST_CASE("forgetful endpoints") {
  Study s = fixture();
  Bot none = make_bot(s, "forgetful:p=0");
  CHECK(congruence_report(none.elicit(s.truth), s.truth, s.features).element_recall == 1.0);
  Bot all = make_bot(s, "forgetful:p=1");
  RuleSet e = all.elicit(s.truth);
  CHECK(e.empty());
  CongruenceReport r = congruence_report(e, s.truth, s.features);
  CHECK(r.element_recall == 0.0);
  CHECK(r.element_precision == 1.0);
  CHECK(r.relation_accuracy == 0.0);
  CHECK(r.composite == doctest::Approx(0.3333).epsilon(1e-4));
  for (const auto& p : enumerate_domain(s.features)) CHECK(all.predict(p) == 0);
}

TEST_CASE("forgetful recall falls with the drop probability") {
  Study s = fixture();
  double last = 2.0;
  for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    double sum = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      Bot bot = make_bot(s, "forgetful:p=" + std::to_string(p), seed);
      sum += congruence_report(bot.elicit(s.truth), s.truth, s.features).element_recall;
    }
    double mean = sum / 200;
    CHECK(mean <= last + 0.05);
    last = mean;
  }
  CHECK(last == 0.0);
}

TEST_CASE("forgetful drops are decided once") {
  Study s = fixture();
  Bot bot = make_bot(s, "forgetful:p=0.5", 3);
  RuleSet a = bot.elicit(s.truth);
  CHECK(bot.elicit(s.truth) == a);
}

TEST_CASE("frequency bot counting") {
  Study s = fixture();
  Bot bot = make_bot(s, "frequency");
  CHECK(bot.elicit(s.truth).empty());
  CanonicalAtom g = atom_num(s, "glucose", Comparator::kGreaterEqual, 130);
  CanonicalAtom f = atom_word(s, "fatigue", Comparator::kEqual, "true");
  PatientProfile p = demo_profile(s, 150, true, false, "noon");
  Observation o{0, p, classify(s.truth, s.base_scores, p)};
  REQUIRE(o.classification.label == 1);
  CHECK(bot.support(g, f, 1) == 0);
  bot.observe(o);
  CHECK(bot.support(g, f, 1) == 1);
  CHECK(bot.support(f, g, 1) == 1);
  CHECK(bot.support(g, f, 0) == 0);
  CHECK(bot.observations_seen() == 1);
}

TEST_CASE("frequency bot recovers the truth elements from a long run") {
  Study s = fixture();
  s.observation_params.count = 200;
  s.observation_params.demonstrate_each = 20;
  int full = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SimulatedSession run = run_bot_session(s, BotSpec::parse("frequency:min_support=5,lift=0.3"), Condition::kNone,
                                           session_seed(seed, 0));
    if (run.report.pre.element_recall == 1.0) ++full;
  }
  CHECK(full == 10);
}

TEST_CASE("frequency rules come from the menu with unit weight") {
  Study s = fixture();
  s.observation_params.count = 100;
  SimulatedSession run = run_bot_session(s, BotSpec::parse("frequency"), Condition::kNone, 77);
  const ClauseMenu& menu = run.state.stimuli->menu;
  const RuleSet& e = run.state.elicitations.at(0);
  CHECK_FALSE(e.empty());
  for (std::size_t i = 0; i < e.size(); ++i) {
    const auto& r = e.rules[i];
    CHECK(r.weight == 1.0);
    CHECK(r.relevance.size() == 1);
    CHECK(r.satisfaction.size() == 1);
    CHECK(menu.offers(r.relevance[0], s.features));
    CHECK(menu.offers(r.satisfaction[0], s.features));
    for (std::size_t j = 0; j < i; ++j) CHECK_FALSE(rules_equivalent(r, e.rules[j], s.features));
  }
}

TEST_CASE("random bot") {
  Study s = fixture();
  Bot bot = make_bot(s, "random", 9);
  ClauseMenu menu = build_menu(s, s.menu_params.seed);
  RuleSet e = bot.elicit(s.truth);
  CHECK(e.size() <= menu.relevance_atoms.size());
  for (const auto& r : e.rules)
    for (const auto& a : r.relevance) CHECK(menu.offers(a, s.features));

  // label base rate over the whole domain, by hand from the rule texts
  auto domain = enumerate_domain(s.features);
  std::size_t diabetes = 0;
  for (const auto& p : domain) {
    double g = s.features[0].grid_value(p.values[0]);
    bool r1 = g > 125 && p.values[1] == 1;
    bool r2 = p.values[2] == 1 && g > 180;
    if (r1 || r2) ++diabetes;
  }
  double base = static_cast<double>(diabetes) / static_cast<double>(domain.size());
  // uniform guessing agrees with the label with probability 1/2 whatever the base rate
  double expected = 0.5 * base + 0.5 * (1 - base);
  std::size_t hits = 0;
  for (const auto& p : domain)
    if (bot.predict(p) == classify(s.truth, s.base_scores, p).label) ++hits;
  double acc = static_cast<double>(hits) / static_cast<double>(domain.size());
  double sd = std::sqrt(expected * (1 - expected) / static_cast<double>(domain.size()));
  CHECK(std::abs(acc - expected) < 4 * sd);
}

TEST_CASE("learning from explanations") {
  Study s = fixture();
  Bot bot = make_bot(s, "forgetful:p=1");
  bot.elicit(s.truth);
  bot.learn(s.truth.rules);
  RuleSet again = bot.elicit(s.truth);
  CHECK(composite(s, again) == doctest::Approx(1.0));
  CHECK(bot.model() == again);
  for (const auto& p : enumerate_domain(s.features))
    CHECK(bot.predict(p) == classify(s.truth, s.base_scores, p).label);
}
