#include <doctest.h>

#include <set>

#include "fixtures.hpp"
#include "mma/profile_gen.hpp"

using namespace mma;
using namespace mma::testing;

namespace {

std::size_t count_status(const Study& s, std::span<const Observation> obs, std::size_t rule, RuleStatus status) {
  std::size_t n = 0;
  for (const auto& o : obs)
    if (rule_status(s.truth.rules[rule], o.profile) == status) ++n;
  return n;
}

}  // namespace

TEST_CASE("domain sizes") {
  Study s = fixture();
  CHECK(domain_size(std::span(s.features).first(1)) == 49);
  CHECK(domain_size(s.features) == 588);
  CHECK(domain_size({}) == 1);
  CHECK(enumerate_domain(s.features).size() == 588);
  CHECK(enumerate_domain({}).size() == 1);
}

TEST_CASE("profile index round trip") {
  Study s = fixture();
  auto all = enumerate_domain(s.features);
  for (std::uint64_t i = 0; i < all.size(); ++i) {
    CHECK(profile_index(all[i], s.features) == i);
    CHECK(profile_at(i, s.features) == all[i]);
  }
  CHECK(std::set<PatientProfile>(all.begin(), all.end()).size() == all.size());
}

TEST_CASE("fixture observations meet coverage") {
  Study s = fixture();
  auto obs = generate_observations(s);
  REQUIRE(obs.size() == 12);
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(count_status(s, obs, r, RuleStatus::kFulfilled) >= 3);
    CHECK(count_status(s, obs, r, RuleStatus::kTriggered) >= 1);
  }
  for (std::size_t i = 0; i < obs.size(); ++i) {
    CHECK(obs[i].index == i);
    CHECK(obs[i].classification == classify(s.truth, s.base_scores, obs[i].profile));
  }
  CHECK(generate_observations(s) == obs);
}

TEST_CASE("classification matches a hand computation") {
  Study s = fixture();
  // R1 fulfilled only: diabetes +1.0
  auto c1 = classify(s.truth, s.base_scores, demo_profile(s, 140, true, false, "noon"));
  CHECK(c1.label == 1);
  CHECK(c1.scores == std::vector<double>{0.0, 1.0});
  CHECK(c1.probabilities[1] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK(c1.fulfilled_rule_ids == std::vector<std::string>{"R1"});
  // R2 fulfilled only: diabetes +0.5
  auto c2 = classify(s.truth, s.base_scores, demo_profile(s, 200, false, true, "morning"));
  CHECK(c2.scores == std::vector<double>{0.0, 0.5});
  CHECK(c2.label == 1);
  // nothing fires: tie goes to the first class
  auto c0 = classify(s.truth, s.base_scores, demo_profile(s, 100, false, false, "morning"));
  CHECK(c0.label == 0);
  CHECK(c0.probabilities[0] == doctest::Approx(0.5));
}

TEST_CASE("zero count gives no observations") {
  Study s = fixture();
  s.observation_params.count = 0;
  s.observation_params.demonstrate_each = 0;
  CHECK(generate_observations(s).empty());
}

TEST_CASE("unfulfillable rule is reported") {
  Study s = parse_or_die([] {
    std::string t = fixture_text();
    const std::string from = "when glucose > 125";
    return t.replace(t.find(from), from.size(), "when glucose > 300");
  }());
  try {
    generate_observations(s);
    FAIL("expected CoverageUnsatisfiable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCoverageUnsatisfiable);
  }
}

TEST_CASE("coverage that does not fit the count is reported") {
  Study s = fixture();
  s.observation_params.count = 3;
  CHECK_THROWS_AS(generate_observations(s), Error);
}

TEST_CASE("prediction items are disjoint from observations") {
  Study s = fixture();
  auto obs = generate_observations(s);
  auto pred = generate_prediction_items(s, obs);
  REQUIRE(pred.items.size() == 6);
  CHECK(pred.disjoint_from_observations);
  std::set<PatientProfile> seen;
  for (const auto& o : obs) seen.insert(o.profile);
  for (const auto& p : pred.items) {
    CHECK(seen.insert(p.profile).second);
    CHECK(p.truth_label == classify(s.truth, s.base_scores, p.profile).label);
  }
  CHECK(generate_prediction_items(s, obs) == pred);
}

TEST_CASE("a count equal to the domain takes every profile") {
  Study s = fixture();
  auto pred = generate_prediction_items(s, {}, 588);
  std::set<PatientProfile> all;
  for (const auto& p : pred.items) all.insert(p.profile);
  CHECK(all.size() == 588);
  CHECK_FALSE(pred.with_replacement);
  auto over = generate_prediction_items(s, {}, 600);
  CHECK(over.items.size() == 600);
  CHECK(over.with_replacement);
}

TEST_CASE("random studies always meet coverage") {
  SplitMix64 rng(99);
  for (int k = 0; k < 40; ++k) {
    Study s = random_study(rng);
    auto obs = generate_observations(s);
    CHECK(obs.size() == s.observation_params.count);
    for (std::size_t r = 0; r < s.truth.size(); ++r) {
      CHECK(count_status(s, obs, r, RuleStatus::kFulfilled) >= s.observation_params.demonstrate_each);
      if (can_trigger(s.truth.rules[r], s.features)) CHECK(count_status(s, obs, r, RuleStatus::kTriggered) >= 1);
    }
  }
}

TEST_CASE("fulfil and trigger checks agree with enumeration") {
  SplitMix64 rng(5);
  for (int k = 0; k < 40; ++k) {
    Study s = random_study(rng);
    auto all = enumerate_domain(s.features);
    for (const auto& r : s.truth.rules) {
      bool fulfil = false, trigger = false;
      for (const auto& p : all) {
        RuleStatus st = rule_status(r, p);
        fulfil |= st == RuleStatus::kFulfilled;
        trigger |= st == RuleStatus::kTriggered;
      }
      CHECK(can_fulfill(r, s.features) == fulfil);
      CHECK(can_trigger(r, s.features) == trigger);
    }
  }
}
