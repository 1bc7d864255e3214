#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "egm/error.hpp"
#include "egm/ingest/record.hpp"
#include "egm/textprep/tokenize.hpp"

namespace egm::ingest {

enum class Field { Any, Title, Abstract };

inline std::string_view to_string(Field f) {
  switch (f) {
    case Field::Title: return "title";
    case Field::Abstract: return "abstract";
    case Field::Any: break;
  }
  return "any";
}

// Boolean query AST. Term and Phrase are leaves; And/Or hold two children,
// Not holds one.
struct QueryExpr {
  enum class Kind { Term, Phrase, And, Or, Not };

  Kind kind = Kind::Term;
  Field field = Field::Any;
  std::string text;                 // Term
  std::vector<std::string> tokens;  // Phrase
  std::vector<QueryExpr> children;

  static QueryExpr term(Field f, std::string t) {
    QueryExpr q;
    q.kind = Kind::Term;
    q.field = f;
    q.text = std::move(t);
    return q;
  }
  static QueryExpr phrase(Field f, std::vector<std::string> toks) {
    QueryExpr q;
    q.kind = Kind::Phrase;
    q.field = f;
    q.tokens = std::move(toks);
    return q;
  }
  static QueryExpr conj(QueryExpr l, QueryExpr r) { return binary(Kind::And, std::move(l), std::move(r)); }
  static QueryExpr disj(QueryExpr l, QueryExpr r) { return binary(Kind::Or, std::move(l), std::move(r)); }
  static QueryExpr negate(QueryExpr c) {
    QueryExpr q;
    q.kind = Kind::Not;
    q.children.push_back(std::move(c));
    return q;
  }

  const QueryExpr& left() const { return children.at(0); }
  const QueryExpr& right() const { return children.at(1); }
  const QueryExpr& child() const { return children.at(0); }

  bool operator==(const QueryExpr&) const = default;

 private:
  static QueryExpr binary(Kind k, QueryExpr l, QueryExpr r) {
    QueryExpr q;
    q.kind = k;
    q.children.push_back(std::move(l));
    q.children.push_back(std::move(r));
    return q;
  }
};

// Debug form, e.g. And(Phrase(any,[cash,transfer]),Term(title,school)).
inline std::string describe(const QueryExpr& q) {
  using K = QueryExpr::Kind;
  switch (q.kind) {
    case K::Term: return "Term(" + std::string(to_string(q.field)) + "," + q.text + ")";
    case K::Phrase: {
      std::string s = "Phrase(" + std::string(to_string(q.field)) + ",[";
      for (std::size_t i = 0; i < q.tokens.size(); ++i) s += (i ? "," : "") + q.tokens[i];
      return s + "])";
    }
    case K::And: return "And(" + describe(q.left()) + "," + describe(q.right()) + ")";
    case K::Or: return "Or(" + describe(q.left()) + "," + describe(q.right()) + ")";
    case K::Not: return "Not(" + describe(q.child()) + ")";
  }
  return {};
}

namespace detail {

struct Lexeme {
  enum class Type { LParen, RParen, And, Or, Not, Word, Phrase, End };
  Type type;
  std::size_t offset;
  Field field = Field::Any;
  std::string text;
};

class QueryLexer {
 public:
  explicit QueryLexer(std::string_view src) : src_(src) {}

  std::vector<Lexeme> run() {
    std::vector<Lexeme> out;
    while (true) {
      skip_space();
      if (pos_ >= src_.size()) {
        out.push_back({Lexeme::Type::End, pos_, Field::Any, {}});
        return out;
      }
      char c = src_[pos_];
      if (c == '(') {
        out.push_back({Lexeme::Type::LParen, pos_++, Field::Any, {}});
      } else if (c == ')') {
        out.push_back({Lexeme::Type::RParen, pos_++, Field::Any, {}});
      } else if (c == '"') {
        out.push_back(read_phrase(pos_, Field::Any));
      } else {
        out.push_back(read_word());
      }
    }
  }

 private:
  void skip_space() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
      ++pos_;
  }

  static bool is_delim(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '(' || c == ')' || c == '"';
  }

  Lexeme read_phrase(std::size_t start, Field field) {
    std::size_t open = pos_;
    auto close = src_.find('"', open + 1);
    if (close == std::string_view::npos) throw SyntaxError(open, "closing '\"'");
    pos_ = close + 1;
    return {Lexeme::Type::Phrase, start, field, std::string(src_.substr(open + 1, close - open - 1))};
  }

  Lexeme read_word() {
    std::size_t start = pos_;
    while (pos_ < src_.size() && !is_delim(src_[pos_])) ++pos_;
    std::string_view word = src_.substr(start, pos_ - start);
    if (word == "AND") return {Lexeme::Type::And, start, Field::Any, {}};
    if (word == "OR") return {Lexeme::Type::Or, start, Field::Any, {}};
    if (word == "NOT") return {Lexeme::Type::Not, start, Field::Any, {}};
    Field field = Field::Any;
    for (auto [prefix, f] : {std::pair{std::string_view("title:"), Field::Title},
                             std::pair{std::string_view("abstract:"), Field::Abstract},
                             std::pair{std::string_view("any:"), Field::Any}}) {
      if (word.substr(0, prefix.size()) == prefix) {
        field = f;
        word.remove_prefix(prefix.size());
        if (word.empty()) {
          if (pos_ < src_.size() && src_[pos_] == '"') return read_phrase(start, field);
          throw SyntaxError(pos_, "term or phrase after field prefix");
        }
        break;
      }
    }
    return {Lexeme::Type::Word, start, field, std::string(word)};
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

class QueryParser {
 public:
  explicit QueryParser(std::vector<Lexeme> lexemes) : lex_(std::move(lexemes)) {}

  QueryExpr parse() {
    QueryExpr q = parse_or();
    if (peek().type != Lexeme::Type::End) {
      throw SyntaxError(peek().offset, peek().type == Lexeme::Type::RParen ? "matching '(' before ')'"
                                                                          : "AND, OR or end of query");
    }
    return q;
  }

 private:
  const Lexeme& peek() const { return lex_[pos_]; }
  const Lexeme& next() { return lex_[pos_++]; }

  QueryExpr parse_or() {
    QueryExpr left = parse_and();
    while (peek().type == Lexeme::Type::Or) {
      next();
      left = QueryExpr::disj(std::move(left), parse_and());
    }
    return left;
  }

  QueryExpr parse_and() {
    QueryExpr left = parse_unary();
    while (peek().type == Lexeme::Type::And) {
      next();
      left = QueryExpr::conj(std::move(left), parse_unary());
    }
    return left;
  }

  QueryExpr parse_unary() {
    if (peek().type == Lexeme::Type::Not) {
      next();
      return QueryExpr::negate(parse_unary());
    }
    return parse_primary();
  }

  QueryExpr parse_primary() {
    const Lexeme& lx = peek();
    switch (lx.type) {
      case Lexeme::Type::LParen: {
        next();
        QueryExpr inner = parse_or();
        if (peek().type != Lexeme::Type::RParen) throw SyntaxError(peek().offset, "')'");
        next();
        return inner;
      }
      case Lexeme::Type::Word: {
        next();
        return QueryExpr::term(lx.field, lx.text);
      }
      case Lexeme::Type::Phrase: {
        next();
        auto toks = textprep::tokenize(lx.text, textprep::TokenizeOptions::without_stopwords());
        if (toks.empty()) throw SyntaxError(lx.offset, "non-empty phrase");
        return QueryExpr::phrase(lx.field, std::move(toks));
      }
      default:
        throw SyntaxError(lx.offset, "term, phrase, '(' or NOT");
    }
  }

  std::vector<Lexeme> lex_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Grammar, loosest first: OR, AND, unary NOT. Operators are upper-case only;
// juxtaposed terms without an operator are rejected.
inline QueryExpr parse_query(std::string_view source) {
  if (trim(source).empty()) throw Error(ErrorCode::EmptyQuery, "query text is empty");
  QueryExpr q = detail::QueryParser(detail::QueryLexer(source).run()).parse();
  if (q.kind == QueryExpr::Kind::Not) {
    // A pure exclusion matches nothing retrievable.
    throw SyntaxError(source.find_first_not_of(" \t\r\n"), "a positive term; NOT cannot stand alone");
  }
  return q;
}

// Record text tokenized once for repeated query evaluation (stopwords kept).
struct RecordTokens {
  std::vector<std::string> title;
  std::vector<std::string> abstract;

  explicit RecordTokens(const StudyRecord& r)
      : title(textprep::tokenize(r.title, textprep::TokenizeOptions::without_stopwords())),
        abstract(textprep::tokenize(r.abstract, textprep::TokenizeOptions::without_stopwords())) {}
};

namespace detail {

inline bool contains_sequence(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < needle.size() && ok; ++j) ok = hay[i + j] == needle[j];
    if (ok) return true;
  }
  return false;
}

inline bool match_in_field(const RecordTokens& rt, Field field, const std::vector<std::string>& seq) {
  switch (field) {
    case Field::Title: return contains_sequence(rt.title, seq);
    case Field::Abstract: return contains_sequence(rt.abstract, seq);
    case Field::Any: break;
  }
  return contains_sequence(rt.title, seq) || contains_sequence(rt.abstract, seq);
}

}  // namespace detail

inline bool eval_query(const QueryExpr& q, const RecordTokens& rt) {
  using K = QueryExpr::Kind;
  switch (q.kind) {
    case K::Term:
      // A term that splits into several tokens (e.g. "cash-transfer") must match them consecutively.
      return detail::match_in_field(rt, q.field,
                                    textprep::tokenize(q.text, textprep::TokenizeOptions::without_stopwords()));
    case K::Phrase: return detail::match_in_field(rt, q.field, q.tokens);
    case K::And: return eval_query(q.left(), rt) && eval_query(q.right(), rt);
    case K::Or: return eval_query(q.left(), rt) || eval_query(q.right(), rt);
    case K::Not: return !eval_query(q.child(), rt);
  }
  return false;
}

inline bool eval_query(const QueryExpr& q, const StudyRecord& r) { return eval_query(q, RecordTokens(r)); }

// Per-provider templates. Placeholders: {L} {R} for and/or, {X} for not,
// group and field_*; {TEXT} for term; {TOKENS} (space-joined) for phrase.
using BooleanSyntax = std::map<std::string, std::string>;

inline BooleanSyntax identity_syntax() {
  return {{"and", "{L} AND {R}"},     {"or", "{L} OR {R}"},       {"not", "NOT {X}"},
          {"term", "{TEXT}"},         {"phrase", "\"{TOKENS}\""}, {"group", "({X})"},
          {"field_any", "{X}"},       {"field_title", "title:{X}"}, {"field_abstract", "abstract:{X}"}};
}

namespace detail {

inline const std::string& require_template(const BooleanSyntax& syntax, const std::string& key) {
  auto it = syntax.find(key);
  if (it == syntax.end()) throw Error(ErrorCode::UnsupportedConstruct, "no '" + key + "' template configured");
  return it->second;
}

// Single pass, so placeholder-like text inside substituted values is left alone.
inline std::string expand(const std::string& tpl, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      auto close = tpl.find('}', i + 1);
      if (close != std::string::npos) {
        auto it = values.find(tpl.substr(i + 1, close - i - 1));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tpl[i++]);
  }
  return out;
}

inline int precedence(const QueryExpr& q) {
  using K = QueryExpr::Kind;
  switch (q.kind) {
    case K::Or: return 1;
    case K::And: return 2;
    case K::Not: return 3;
    default: return 4;
  }
}

inline std::string render_node(const QueryExpr& q, const BooleanSyntax& syntax);

inline std::string render_child(const QueryExpr& parent, const QueryExpr& child, bool right,
                                const BooleanSyntax& syntax) {
  std::string s = render_node(child, syntax);
  int pp = precedence(parent), cp = precedence(child);
  bool wrap = cp < pp || (right && cp == pp && parent.kind != QueryExpr::Kind::Not);
  if (!wrap) return s;
  return expand(require_template(syntax, "group"), {{"X", s}});
}

inline std::string render_node(const QueryExpr& q, const BooleanSyntax& syntax) {
  using K = QueryExpr::Kind;
  auto field_wrap = [&](const std::string& inner) {
    return expand(require_template(syntax, "field_" + std::string(to_string(q.field))), {{"X", inner}});
  };
  switch (q.kind) {
    case K::Term: return field_wrap(expand(require_template(syntax, "term"), {{"TEXT", q.text}}));
    case K::Phrase: {
      std::string joined;
      for (std::size_t i = 0; i < q.tokens.size(); ++i) joined += (i ? " " : "") + q.tokens[i];
      return field_wrap(expand(require_template(syntax, "phrase"), {{"TOKENS", joined}}));
    }
    case K::And:
    case K::Or: {
      const std::string& tpl = require_template(syntax, q.kind == K::And ? "and" : "or");
      std::string l = render_child(q, q.left(), false, syntax);
      std::string r = render_child(q, q.right(), true, syntax);
      return expand(tpl, {{"L", l}, {"R", r}});
    }
    case K::Not:
      return expand(require_template(syntax, "not"), {{"X", render_child(q, q.child(), false, syntax)}});
  }
  return {};
}

}  // namespace detail

// Structural recursion over the AST; a child is wrapped with the "group"
// template whenever its precedence would otherwise be lost. An empty template
// drops its node (free-text providers), leaving local filtering to enforce it.
inline std::string render_query(const QueryExpr& q, const BooleanSyntax& syntax) {
  return trim(detail::render_node(q, syntax));
}

}  // namespace egm::ingest
