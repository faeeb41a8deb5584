#include <doctest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "mma/study.hpp"

using namespace mma;
using namespace mma::testing;

namespace {

std::string replace(std::string text, const std::string& from, const std::string& to) {
  auto at = text.find(from);
  REQUIRE(at != std::string::npos);
  return text.replace(at, from.size(), to);
}

const ParseIssue* first_error(const ParseResult& r) {
  for (const auto& i : r.issues)
    if (i.severity == Severity::kError) return &i;
  return nullptr;
}

std::size_t error_count(const ParseResult& r) {
  return static_cast<std::size_t>(std::count_if(r.issues.begin(), r.issues.end(),
                                                [](const ParseIssue& i) { return i.severity == Severity::kError; }));
}

}  // namespace

TEST_CASE("fixture parses into 2 classes, 4 features, 2 rules") {
  ParseResult r = parse_study(fixture_text());
  REQUIRE(r.ok());
  const Study& s = *r.study;
  CHECK(s.name == "diabetes-demo");
  CHECK(s.classes == std::vector<std::string>{"healthy", "diabetes"});
  CHECK(s.features.size() == 4);
  CHECK(s.truth.size() == 2);
  CHECK(s.base_scores == std::vector<double>{0.0, 0.0});
  CHECK(s.observation_params == ObservationParams{12, 3, 42});
  CHECK(s.prediction_params.count == 6);
  CHECK(s.menu_params == MenuParams{1, 7});
  CHECK(s.features[0].unit == "mg/dL");
  CHECK(atom_source_text(s.truth.rules[0].relevance[0], s.features) == "glucose >= 130");
  CHECK(atom_source_text(s.truth.rules[1].satisfaction[0], s.features) == "glucose >= 185");
  CHECK(s.truth.rules[1].weight == 0.5);
  CHECK(r.issues.empty());
}

TEST_CASE("unknown feature is reported at its position") {
  std::string text = replace(fixture_text(), "when glucose > 125", "when pulse > 10");
  ParseResult r = parse_study(text);
  CHECK_FALSE(r.ok());
  const ParseIssue* e = first_error(r);
  REQUIRE(e);
  CHECK(e->message == "unknown feature 'pulse'");
  CHECK(e->line == 7);
  CHECK(e->column == 18);
  CHECK(error_count(r) == 1);
}

TEST_CASE("duplicate rule id") {
  std::string text = replace(fixture_text(), "rule R2", "rule R1");
  ParseResult r = parse_study(text);
  CHECK_FALSE(r.ok());
  REQUIRE(first_error(r));
  CHECK(first_error(r)->message.find("duplicate rule id") == 0);
  CHECK(first_error(r)->line == 8);
}

TEST_CASE("semantic errors") {
  struct Case {
    std::string from, to, message;
  };
  std::vector<Case> cases = {
      {"feature time:", "feature glucose:", "duplicate feature 'glucose'"},
      {"then diabetes more by 1.0", "then sick more by 1.0", "undeclared class 'sick'"},
      {"by 0.5", "by 0", "rule weight must be positive"},
      {"fatigue == true", "fatigue > true", "is not allowed for boolean feature"},
      {"numeric(60..300, step 5)", "numeric(60..301, step 5)", "range"},
  };
  for (const auto& c : cases) {
    CAPTURE(c.to);
    ParseResult r = parse_study(replace(fixture_text(), c.from, c.to));
    CHECK_FALSE(r.ok());
    REQUIRE(first_error(r));
    CHECK(first_error(r)->message.find(c.message) != std::string::npos);
  }
}

TEST_CASE("empty rule set") {
  std::string text = fixture_text();
  for (const char* id : {"  rule R1", "  rule R2"}) {
    auto at = text.find(id);
    text.erase(at, text.find('\n', at) - at + 1);
  }
  ParseResult r = parse_study(text);
  CHECK_FALSE(r.ok());
  REQUIRE(first_error(r));
  CHECK(first_error(r)->message.find("empty rule set") == 0);
}

TEST_CASE("syntax errors carry positions and parsing never throws") {
  ParseResult r = parse_study("study \"x\" {\n  classes { a, b \n  feature f: boolean\n}");
  CHECK_FALSE(r.ok());
  CHECK(std::any_of(r.issues.begin(), r.issues.end(), [](const ParseIssue& i) {
    return i.severity == Severity::kError && i.line == 3 && i.column == 3;
  }));
  for (const auto& i : r.issues) {
    CHECK(i.line >= 1);
    CHECK(i.column >= 1);
  }
  // truncations and garbage of the fixture never crash
  std::string text = fixture_text();
  for (std::size_t cut = 0; cut < text.size(); cut += 7) CHECK_NOTHROW(parse_study(text.substr(0, cut)));
  SplitMix64 rng(17);
  for (int k = 0; k < 300; ++k) {
    std::string noisy = text;
    for (int n = 0; n < 5; ++n) noisy[rng.below(noisy.size())] = static_cast<char>(rng.below(128));
    CHECK_NOTHROW(parse_study(noisy));
  }
  CHECK_NOTHROW(parse_study(""));
  CHECK_NOTHROW(parse_study("study \"x\" { rule R1 { when 1e999999 > 3 } }"));
}

TEST_CASE("one error per position") {
  ParseResult r = parse_study("study \"x\" { classes { a, b } feature f: boolean @@@ }");
  std::vector<std::pair<int, int>> positions;
  for (const auto& i : r.issues)
    if (i.severity == Severity::kError) positions.emplace_back(i.line, i.column);
  auto sorted = positions;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
}

TEST_CASE("warnings for trivial and duplicate atoms") {
  std::string text = replace(fixture_text(), "check fatigue == true", "check fatigue == true and fatigue != false");
  ParseResult r = parse_study(text);
  REQUIRE(r.ok());
  CHECK(r.study->truth.rules[0].satisfaction.size() == 1);
  CHECK(std::any_of(r.issues.begin(), r.issues.end(), [](const ParseIssue& i) {
    return i.severity == Severity::kWarning && i.message.find("equivalent") != std::string::npos;
  }));
  ParseResult t = parse_study(replace(fixture_text(), "when glucose > 125", "when glucose > 300"));
  REQUIRE(t.ok());
  CHECK(t.study->truth.rules[0].relevance[0].form == AtomForm::kNever);
  CHECK(std::any_of(t.issues.begin(), t.issues.end(), [](const ParseIssue& i) { return i.severity == Severity::kWarning; }));
}

TEST_CASE("a clause holds at most three atoms") {
  std::string text = replace(fixture_text(), "check fatigue == true",
                             "check fatigue == true and heart_disease == true and time == noon and glucose < 200");
  ParseResult r = parse_study(text);
  CHECK_FALSE(r.ok());
}

TEST_CASE("optional blocks take their defaults") {
  std::string text = fixture_text();
  for (const char* block : {"  predictions {", "  menu {"}) {
    auto at = text.find(block);
    text.erase(at, text.find('\n', at) - at + 1);
  }
  ParseResult r = parse_study(text);
  REQUIRE(r.ok());
  CHECK(r.study->prediction_params.count == 10);
  CHECK(r.study->menu_params.distractors_per_feature == 2);
  CHECK(r.study->menu_params.seed == 42);
}

TEST_CASE("unicode comparators, comments, base scores and categorical atoms") {
  std::string text = replace(fixture_text(), "when glucose > 125", "when glucose ≥ 130 and time in {noon, evening}");
  text = replace(text, "  rule R1", "  # a comment line\n  base healthy = 0.25\n  rule R1");
  ParseResult r = parse_study(text);
  REQUIRE(r.ok());
  CHECK(r.study->base_scores == std::vector<double>{0.25, 0.0});
  CHECK(r.study->truth.rules[0].relevance.size() == 2);
  CHECK(atom_source_text(r.study->truth.rules[0].relevance[1], r.study->features) == "time in {noon, evening}");
}

TEST_CASE("print/parse round trip") {
  Study demo = fixture();
  CHECK(parse_or_die(print_study(demo)) == demo);
  CHECK(print_study(parse_or_die(print_study(demo))) == print_study(demo));
  Study labelled = labelled_fixture();
  CHECK(parse_or_die(print_study(labelled)) == labelled);
  SplitMix64 rng(2024);
  for (int k = 0; k < 50; ++k) {
    Study s = random_study(rng);
    CHECK(parse_or_die(print_study(s)) == s);
  }
}

TEST_CASE("fingerprint follows the canonical text") {
  Study a = fixture();
  Study b = parse_or_die(replace(fixture_text(), "glucose > 125", "glucose >= 130"));
  CHECK(study_fingerprint(a) == study_fingerprint(b));
  b.truth.rules[0].weight = 2.0;
  CHECK(study_fingerprint(a) != study_fingerprint(b));
  CHECK(study_fingerprint(a).size() == 16);
}

TEST_CASE("menu without distractors holds exactly the truth atoms") {
  Study s = fixture();
  s.menu_params.distractors_per_feature = 0;
  ClauseMenu m = build_menu(s, s.menu_params.seed);
  CHECK(m.relevance_atoms.size() == 4);
  CHECK(m.satisfaction_atoms.size() == 4);
  std::vector<CanonicalAtom> truth = {s.truth.rules[0].relevance[0], s.truth.rules[0].satisfaction[0],
                                      s.truth.rules[1].relevance[0], s.truth.rules[1].satisfaction[0]};
  CHECK(atom_sets_equivalent(m.relevance_atoms, truth, s.features));
  CHECK(atom_sets_equivalent(m.satisfaction_atoms, truth, s.features));
  CHECK(m.classifications.size() == 4);
  CHECK(m.warnings.empty());
}

TEST_CASE("boolean features cannot supply two distractors") {
  Study s = fixture();
  s.menu_params.distractors_per_feature = 2;
  ClauseMenu m = build_menu(s, 7);
  CHECK(m.warnings.size() == 2);  // fatigue and heart_disease
  CHECK(std::any_of(m.relevance_atoms.begin(), m.relevance_atoms.end(), [&](const CanonicalAtom& a) {
    return atom_source_text(a, s.features) == "fatigue == false";
  }));
  try {
    build_menu(s, 7, MenuShortfall::kThrow);
    FAIL("expected MenuExhausted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMenuExhausted);
  }
}

TEST_CASE("menu invariants") {
  SplitMix64 rng(8);
  for (int k = 0; k < 30; ++k) {
    Study s = random_study(rng);
    ClauseMenu m = build_menu(s, s.menu_params.seed);
    CHECK(m == build_menu(s, s.menu_params.seed));
    // every truth atom is offered
    for (const auto& r : s.truth.rules) {
      for (const auto& a : r.relevance) CHECK(m.offers(a, s.features));
      for (const auto& a : r.satisfaction) CHECK(m.offers(a, s.features));
    }
    // both lists hold the same pairwise distinct atoms
    CHECK(atom_sets_equivalent(m.relevance_atoms, m.satisfaction_atoms, s.features));
    CHECK(dedupe_atoms(m.relevance_atoms, s.features).size() == m.relevance_atoms.size());
    CHECK(m.classifications.size() == 2 * s.classes.size());
  }
}

TEST_CASE("menu order depends on the seed") {
  Study s = fixture();
  s.menu_params.distractors_per_feature = 2;
  int differing = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    if (build_menu(s, seed).relevance_atoms != build_menu(s, seed + 100).relevance_atoms) ++differing;
  CHECK(differing > 5);
}

TEST_CASE("explanation template") {
  Study s = labelled_fixture();
  CHECK(render_rule_text(s.truth.rules[0], s.features, s.classes) ==
        "IF blood glucose ≥ 130 mg/dL, THE AI CHECKS fatigue is present; IF MET, 'diabetes' BECOMES MORE LIKELY "
        "(strength 1.0).");
  ConstraintRule two = s.truth.rules[0];
  two.relevance.push_back(atom_word(s, "heart_disease", Comparator::kEqual, "false"));
  two.direction = Direction::kLess;
  std::string text = render_rule_text(two, s.features, s.classes);
  CHECK(text.find("IF blood glucose ≥ 130 mg/dL AND heart_disease is absent,") == 0);
  CHECK(text.find("BECOMES LESS LIKELY") != std::string::npos);
  CHECK(render_atom(atom(s, "time", Comparator::kIn, {Literal::of_word("noon"), Literal::of_word("evening")}),
                    s.features) == "time is noon or evening");
}
