#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <set>
#include <string>
#include <vector>

#include "mma/error.hpp"
#include "mma/study.hpp"

namespace mma {

namespace {

enum class Tok {
  kIdent,
  kNumber,
  kString,
  kLBrace,
  kRBrace,
  kLParen,
  kRParen,
  kComma,
  kColon,
  kAssign,
  kDotDot,
  kCompare,
  kEnd,
};

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;
  int line = 1;
  int column = 1;
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::kEnd: return "end of input";
    case Tok::kString: return "string \"" + t.text + "\"";
    default: return "'" + t.text + "'";
  }
}

class Lexer {
 public:
  Lexer(std::string_view src, std::vector<ParseIssue>& issues) : src_(src), issues_(issues) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.line = line_;
      t.column = col_;
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      char c = src_[pos_];
      if (is_ident_start(c)) {
        std::size_t start = pos_;
        while (pos_ < src_.size() && is_ident_char(src_[pos_])) advance();
        t.kind = Tok::kIdent;
        t.text = std::string(src_.substr(start, pos_ - start));
      } else if (is_digit(c) || (c == '-' && pos_ + 1 < src_.size() && is_digit(src_[pos_ + 1]))) {
        std::size_t start = pos_;
        advance();
        while (pos_ < src_.size() && is_digit(src_[pos_])) advance();
        if (pos_ + 1 < src_.size() && src_[pos_] == '.' && is_digit(src_[pos_ + 1])) {
          advance();
          while (pos_ < src_.size() && is_digit(src_[pos_])) advance();
        }
        t.kind = Tok::kNumber;
        t.text = std::string(src_.substr(start, pos_ - start));
      } else if (c == '"') {
        if (!lex_string(t)) continue;
      } else if (!lex_punct(t)) {
        std::size_t start = pos_;
        advance();
        while (pos_ < src_.size() && (static_cast<unsigned char>(src_[pos_]) & 0xC0) == 0x80) advance();
        issues_.push_back({t.line, t.column, Severity::kError,
                           "unexpected character '" + std::string(src_.substr(start, pos_ - start)) + "'"});
        continue;
      }
      out.push_back(std::move(t));
    }
  }

 private:
  static bool is_digit(char c) { return c >= '0' && c <= '9'; }
  static bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  }
  static bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }

  // Columns count code points, not bytes.
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else if ((static_cast<unsigned char>(src_[pos_]) & 0xC0) != 0x80) {
      ++col_;
    }
    ++pos_;
    while (pos_ < src_.size() && (static_cast<unsigned char>(src_[pos_]) & 0xC0) == 0x80) ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else {
        return;
      }
    }
  }

  bool lex_string(Token& t) {
    advance();  // opening quote
    std::string value;
    while (pos_ < src_.size() && src_[pos_] != '"' && src_[pos_] != '\n') {
      if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) {
        char e = src_[pos_ + 1];
        value += e == 'n' ? '\n' : e == 't' ? '\t' : e;
        pos_ += 2;
        col_ += 2;
        continue;
      }
      std::size_t start = pos_;
      advance();
      value.append(src_.substr(start, pos_ - start));
    }
    if (pos_ >= src_.size() || src_[pos_] != '"') {
      issues_.push_back({t.line, t.column, Severity::kError, "unterminated string"});
      return false;
    }
    advance();
    t.kind = Tok::kString;
    t.text = std::move(value);
    return true;
  }

  bool lex_punct(Token& t) {
    auto rest = src_.substr(pos_);
    auto take = [&](Tok kind, std::string_view text, std::string canonical = {}) {
      t.kind = kind;
      t.text = canonical.empty() ? std::string(text) : std::move(canonical);
      for (std::size_t i = 0; i < text.size() && pos_ < src_.size();) {
        std::size_t before = pos_;
        advance();
        i += pos_ - before;
      }
      return true;
    };
    for (std::string_view op : {">=", "<=", "==", "!="})
      if (rest.starts_with(op)) return take(Tok::kCompare, op);
    if (rest.starts_with("≥")) return take(Tok::kCompare, "≥", ">=");
    if (rest.starts_with("≤")) return take(Tok::kCompare, "≤", "<=");
    if (rest.starts_with("≠")) return take(Tok::kCompare, "≠", "!=");
    if (rest.starts_with("..")) return take(Tok::kDotDot, "..");
    switch (rest.front()) {
      case '>': return take(Tok::kCompare, ">");
      case '<': return take(Tok::kCompare, "<");
      case '{': return take(Tok::kLBrace, "{");
      case '}': return take(Tok::kRBrace, "}");
      case '(': return take(Tok::kLParen, "(");
      case ')': return take(Tok::kRParen, ")");
      case ',': return take(Tok::kComma, ",");
      case ':': return take(Tok::kColon, ":");
      case '=': return take(Tok::kAssign, "=");
      default: return false;
    }
  }

  std::string_view src_;
  std::vector<ParseIssue>& issues_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

struct Pos {
  int line = 1;
  int column = 1;
};

Pos pos_of(const Token& t) { return {t.line, t.column}; }

double to_double(const std::string& text) { return std::strtod(text.c_str(), nullptr); }

struct AtomDecl {
  RawAtom atom;
  Pos pos;
};

struct RuleDecl {
  std::string id;
  Pos id_pos;
  std::vector<AtomDecl> when;
  std::vector<AtomDecl> check;
  std::string cls;
  Pos cls_pos;
  Direction direction = Direction::kMore;
  double weight = 1.0;
  Pos weight_pos;
};

struct FeatureDecl {
  FeatureDef def;
  Pos pos;
};

struct BaseDecl {
  std::string cls;
  Pos pos;
  double value = 0;
};

struct SyntaxError {};

const std::set<std::string, std::less<>> kStatementKeywords = {
    "classes", "feature", "base", "rule", "observations", "predictions", "menu"};

const std::set<std::string, std::less<>> kReserved = {
    "study", "classes", "feature", "base", "rule", "when", "check", "then", "and", "in",
    "more", "less", "by", "observations", "predictions", "menu", "unit", "label"};

class Parser {
 public:
  Parser(std::vector<Token> tokens, std::vector<ParseIssue>& issues)
      : toks_(std::move(tokens)), issues_(issues) {}

  std::optional<Study> run() {
    try {
      study_pos_ = pos_of(peek());
      expect_word("study");
      study_.name = expect(Tok::kString, "study name string").text;
      expect(Tok::kLBrace, "'{'");
    } catch (const SyntaxError&) {
      return std::nullopt;
    }
    bool closed = false;
    while (peek().kind != Tok::kEnd) {
      if (peek().kind == Tok::kRBrace) {
        ++i_;
        closed = true;
        break;
      }
      std::size_t start = i_;
      try {
        statement();
      } catch (const SyntaxError&) {
        synchronize(start);
      }
    }
    if (!closed) error(pos_of(peek()), "expected '}' to close the study");
    else if (peek().kind != Tok::kEnd) error(pos_of(peek()), "unexpected " + describe(peek()) + " after the study");
    return validate();
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(i_ + ahead, toks_.size() - 1)];
  }

  const Token& next() {
    const Token& t = peek();
    if (i_ < toks_.size() - 1) ++i_;
    return t;
  }

  void error(Pos p, std::string message) {
    for (const auto& e : issues_)
      if (e.line == p.line && e.column == p.column && e.severity == Severity::kError) return;
    issues_.push_back({p.line, p.column, Severity::kError, std::move(message)});
  }

  void warn(Pos p, std::string message) {
    issues_.push_back({p.line, p.column, Severity::kWarning, std::move(message)});
  }

  [[noreturn]] void fail(const Token& t, const std::string& expected) {
    error(pos_of(t), "expected " + expected + ", found " + describe(t));
    throw SyntaxError{};
  }

  const Token& expect(Tok kind, const std::string& what) {
    if (peek().kind != kind) fail(peek(), what);
    return next();
  }

  const Token& expect_word(std::string_view word) {
    if (peek().kind != Tok::kIdent || peek().text != word) fail(peek(), "'" + std::string(word) + "'");
    return next();
  }

  bool accept_word(std::string_view word) {
    if (peek().kind == Tok::kIdent && peek().text == word) {
      next();
      return true;
    }
    return false;
  }

  const Token& expect_name(const std::string& what) {
    const Token& t = expect(Tok::kIdent, what);
    if (kReserved.count(t.text)) {
      error(pos_of(t), "'" + t.text + "' is a reserved word and cannot be used as " + what);
      throw SyntaxError{};
    }
    return t;
  }

  double expect_number(const std::string& what) {
    const Token& t = expect(Tok::kNumber, what);
    return to_double(t.text);
  }

  std::uint64_t expect_uint(const std::string& what) {
    const Token& t = peek();
    if (t.kind != Tok::kNumber || t.text.front() == '-' || t.text.find('.') != std::string::npos)
      fail(t, what + " (a non-negative integer)");
    std::uint64_t v = 0;
    auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (res.ec != std::errc{}) {
      error(pos_of(t), "integer '" + t.text + "' is out of range");
      throw SyntaxError{};
    }
    next();
    return v;
  }

  // Skips to the next statement keyword (or the study's closing brace) at the
  // brace depth where the failed statement began.
  void synchronize(std::size_t start) {
    i_ = start;
    int depth = 0;
    next();
    while (peek().kind != Tok::kEnd) {
      const Token& t = peek();
      if (t.kind == Tok::kLBrace) ++depth;
      if (t.kind == Tok::kRBrace) {
        if (depth == 0) return;
        --depth;
        next();
        if (depth == 0 && kStatementKeywords.count(peek().text)) return;
        continue;
      }
      if (depth == 0 && t.kind == Tok::kIdent && kStatementKeywords.count(t.text)) return;
      next();
    }
  }

  void once(bool& seen, const Token& t) {
    if (seen) error(pos_of(t), "duplicate '" + t.text + "' block");
    seen = true;
  }

  void statement() {
    const Token& head = peek();
    if (head.kind != Tok::kIdent || !kStatementKeywords.count(head.text))
      fail(head, "a statement (classes, feature, base, rule, observations, predictions or menu)");
    std::string kw = head.text;
    Token head_copy = next();
    if (kw == "classes") {
      once(seen_classes_, head_copy);
      classes_pos_ = pos_of(head_copy);
      expect(Tok::kLBrace, "'{'");
      do {
        const Token& c = expect_name("a class name");
        class_decls_.push_back({c.text, pos_of(c)});
      } while (peek().kind == Tok::kComma && (next(), true));
      expect(Tok::kRBrace, "',' or '}'");
    } else if (kw == "feature") {
      feature();
    } else if (kw == "base") {
      BaseDecl b;
      const Token& c = expect(Tok::kIdent, "a class name");
      b.cls = c.text;
      b.pos = pos_of(c);
      expect(Tok::kAssign, "'='");
      b.value = expect_number("a number");
      bases_.push_back(b);
    } else if (kw == "rule") {
      rule();
    } else if (kw == "observations") {
      once(seen_observations_, head_copy);
      observations_pos_ = pos_of(head_copy);
      expect(Tok::kLBrace, "'{'");
      expect_word("count");
      obs_count_tok_ = pos_of(peek());
      study_.observation_params.count = expect_uint("observation count");
      expect(Tok::kComma, "','");
      expect_word("demonstrate_each");
      study_.observation_params.demonstrate_each = expect_uint("demonstrate_each value");
      expect(Tok::kComma, "','");
      expect_word("seed");
      study_.observation_params.seed = expect_uint("seed");
      expect(Tok::kRBrace, "'}'");
    } else if (kw == "predictions") {
      once(seen_predictions_, head_copy);
      expect(Tok::kLBrace, "'{'");
      expect_word("count");
      pred_count_tok_ = pos_of(peek());
      study_.prediction_params.count = expect_uint("prediction count");
      expect(Tok::kRBrace, "'}'");
    } else if (kw == "menu") {
      once(seen_menu_, head_copy);
      expect(Tok::kLBrace, "'{'");
      expect_word("distractors_per_feature");
      study_.menu_params.distractors_per_feature = expect_uint("distractor count");
      expect(Tok::kComma, "','");
      expect_word("seed");
      study_.menu_params.seed = expect_uint("seed");
      expect(Tok::kRBrace, "'}'");
    }
  }

  void feature() {
    FeatureDecl d;
    const Token& name = expect_name("a feature name");
    d.def.name = name.text;
    d.pos = pos_of(name);
    expect(Tok::kColon, "':'");
    const Token& kind = expect(Tok::kIdent, "a feature kind (numeric, boolean or categorical)");
    if (kind.text == "numeric") {
      d.def.kind = FeatureKind::kNumeric;
      expect(Tok::kLParen, "'('");
      d.def.min = expect_number("the range minimum");
      expect(Tok::kDotDot, "'..'");
      d.def.max = expect_number("the range maximum");
      expect(Tok::kComma, "','");
      expect_word("step");
      d.def.step = expect_number("the step");
      expect(Tok::kRParen, "')'");
    } else if (kind.text == "boolean") {
      d.def.kind = FeatureKind::kBoolean;
    } else if (kind.text == "categorical") {
      d.def.kind = FeatureKind::kCategorical;
      expect(Tok::kLBrace, "'{'");
      do {
        d.def.categories.push_back(expect(Tok::kIdent, "a category value").text);
      } while (peek().kind == Tok::kComma && (next(), true));
      expect(Tok::kRBrace, "',' or '}'");
    } else {
      fail(kind, "a feature kind (numeric, boolean or categorical)");
    }
    for (;;) {
      if (peek().kind == Tok::kIdent && peek().text == "unit") {
        const Token& u = next();
        if (d.def.kind != FeatureKind::kNumeric) warn(pos_of(u), "unit is only shown for numeric features");
        d.def.unit = expect(Tok::kString, "unit string").text;
      } else if (accept_word("label")) {
        d.def.label = expect(Tok::kString, "label string").text;
      } else {
        break;
      }
    }
    features_.push_back(std::move(d));
  }

  std::vector<AtomDecl> conjunction() {
    std::vector<AtomDecl> atoms;
    atoms.push_back(atom());
    while (accept_word("and")) {
      if (atoms.size() == kMaxClauseAtoms) {
        error(pos_of(peek()), "a clause holds at most 3 atoms");
        throw SyntaxError{};
      }
      atoms.push_back(atom());
    }
    return atoms;
  }

  Literal value() {
    const Token& t = peek();
    if (t.kind == Tok::kNumber) {
      next();
      return Literal{t.text, to_double(t.text)};
    }
    if (t.kind == Tok::kIdent) {
      next();
      return Literal::of_word(t.text);
    }
    fail(t, "a value");
  }

  AtomDecl atom() {
    AtomDecl d;
    const Token& f = expect(Tok::kIdent, "a feature name");
    d.atom.feature = f.text;
    d.pos = pos_of(f);
    if (accept_word("in")) {
      d.atom.cmp = Comparator::kIn;
      expect(Tok::kLBrace, "'{'");
      do {
        d.atom.values.push_back(value());
      } while (peek().kind == Tok::kComma && (next(), true));
      expect(Tok::kRBrace, "',' or '}'");
      return d;
    }
    const Token& c = expect(Tok::kCompare, "a comparator (>, >=, <, <=, ==, != or in)");
    d.atom.cmp = *parse_comparator(c.text);
    d.atom.values.push_back(value());
    return d;
  }

  void rule() {
    RuleDecl r;
    const Token& id = expect_name("a rule id");
    r.id = id.text;
    r.id_pos = pos_of(id);
    expect(Tok::kLBrace, "'{'");
    expect_word("when");
    r.when = conjunction();
    expect_word("check");
    r.check = conjunction();
    expect_word("then");
    const Token& cls = expect(Tok::kIdent, "a class name");
    r.cls = cls.text;
    r.cls_pos = pos_of(cls);
    const Token& dir = expect(Tok::kIdent, "'more' or 'less'");
    auto d = parse_direction(dir.text);
    if (!d) fail(dir, "'more' or 'less'");
    r.direction = *d;
    expect_word("by");
    r.weight_pos = pos_of(peek());
    r.weight = expect_number("a weight");
    expect(Tok::kRBrace, "'}'");
    rules_.push_back(std::move(r));
  }

  bool has_errors() const {
    return std::any_of(issues_.begin(), issues_.end(),
                       [](const ParseIssue& i) { return i.severity == Severity::kError; });
  }

  std::vector<CanonicalAtom> clause(const std::vector<AtomDecl>& decls) {
    std::vector<CanonicalAtom> atoms;
    for (const auto& d : decls) {
      if (broken_features_.count(d.atom.feature)) continue;
      try {
        CanonicalAtom a = canonicalize_atom(d.atom, study_.features);
        if (a.trivial())
          warn(d.pos, std::string("atom on '") + d.atom.feature + "' is always " +
                          (a.form == AtomForm::kAlways ? "true" : "false"));
        bool dup = std::any_of(atoms.begin(), atoms.end(), [&](const CanonicalAtom& o) {
          return atoms_equivalent(a, o, study_.features);
        });
        if (dup) warn(d.pos, "atom repeats an equivalent atom in the same clause");
        else atoms.push_back(std::move(a));
      } catch (const Error& e) {
        error(d.pos, e.what());
      }
    }
    return atoms;
  }

  std::optional<Study> validate() {
    // classes
    if (!seen_classes_) {
      error(study_pos_, "missing 'classes' block");
    } else {
      std::set<std::string> seen;
      for (const auto& [name, p] : class_decls_) {
        if (!seen.insert(name).second) error({p.line, p.column}, "duplicate class '" + name + "'");
        else study_.classes.push_back(name);
      }
      if (study_.classes.size() < 2) error(classes_pos_, "a study needs at least two classes");
    }
    study_.base_scores.assign(study_.classes.size(), 0.0);

    // features
    std::set<std::string> feature_names;
    for (auto& d : features_) {
      if (auto problem = d.def.check()) {
        error(d.pos, *problem + " (feature '" + d.def.name + "')");
        broken_features_.insert(d.def.name);
        continue;
      }
      if (!feature_names.insert(d.def.name).second) {
        error(d.pos, "duplicate feature '" + d.def.name + "'");
        continue;
      }
      study_.features.push_back(d.def);
    }

    std::set<std::string> based;
    for (const auto& b : bases_) {
      auto c = study_.class_index(b.cls);
      if (!c) error(b.pos, "undeclared class '" + b.cls + "'");
      else if (!based.insert(b.cls).second) error(b.pos, "duplicate base score for class '" + b.cls + "'");
      else study_.base_scores[*c] = b.value;
    }

    std::set<std::string> rule_ids;
    for (const auto& r : rules_) {
      ConstraintRule rule;
      rule.id = r.id;
      if (!rule_ids.insert(r.id).second) error(r.id_pos, "duplicate rule id '" + r.id + "'");
      rule.relevance = clause(r.when);
      rule.satisfaction = clause(r.check);
      auto c = study_.class_index(r.cls);
      if (!c) error(r.cls_pos, "undeclared class '" + r.cls + "'");
      else rule.effect_class = *c;
      rule.direction = r.direction;
      rule.weight = r.weight;
      if (!(r.weight > 0)) error(r.weight_pos, "rule weight must be positive");
      study_.truth.rules.push_back(std::move(rule));
    }
    if (rules_.empty()) error(study_pos_, "empty rule set: a study needs at least one rule");

    if (!seen_observations_) error(study_pos_, "missing 'observations' block");
    else if (study_.observation_params.count == 0)
      error(obs_count_tok_, "observation count must be positive");
    if (seen_predictions_ && study_.prediction_params.count == 0)
      error(pred_count_tok_, "prediction count must be positive");
    if (!seen_menu_) study_.menu_params.seed = study_.observation_params.seed;

    if (has_errors()) return std::nullopt;
    return std::move(study_);
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
  std::vector<ParseIssue>& issues_;

  Study study_;
  Pos study_pos_;
  Pos classes_pos_;
  Pos observations_pos_;
  Pos obs_count_tok_;
  Pos pred_count_tok_;
  bool seen_classes_ = false;
  bool seen_observations_ = false;
  bool seen_predictions_ = false;
  bool seen_menu_ = false;
  std::vector<std::pair<std::string, Pos>> class_decls_;
  std::vector<FeatureDecl> features_;
  std::vector<BaseDecl> bases_;
  std::vector<RuleDecl> rules_;
  std::set<std::string> broken_features_;
};

}  // namespace

std::string format_issue(const ParseIssue& issue) {
  return std::to_string(issue.line) + ":" + std::to_string(issue.column) + ": " +
         (issue.severity == Severity::kError ? "error" : "warning") + ": " + issue.message;
}

ParseResult parse_study(std::string_view source) {
  ParseResult result;
  std::vector<Token> tokens = Lexer(source, result.issues).run();
  Parser parser(std::move(tokens), result.issues);
  std::optional<Study> study = parser.run();
  bool errors = std::any_of(result.issues.begin(), result.issues.end(),
                            [](const ParseIssue& i) { return i.severity == Severity::kError; });
  if (!errors) result.study = std::move(study);
  std::stable_sort(result.issues.begin(), result.issues.end(), [](const auto& a, const auto& b) {
    return std::tie(a.line, a.column) < std::tie(b.line, b.column);
  });
  return result;
}

}  // namespace mma
