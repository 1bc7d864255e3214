#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "egm/error.hpp"
#include "egm/ingest/query.hpp"

using namespace egm;
using namespace egm::ingest;
using Q = QueryExpr;

namespace {

StudyRecord record(std::string title, std::string abstract = "") {
  StudyRecord r;
  r.title = std::move(title);
  r.abstract = std::move(abstract);
  return r;
}

std::size_t syntax_offset(const std::string& src) {
  try {
    parse_query(src);
  } catch (const SyntaxError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "no SyntaxError for: " << src;
  return std::string::npos;
}

const std::vector<std::string> kWords = {"cash", "school", "meals", "credit", "girls", "nutrition"};

Q random_leaf(std::mt19937& rng) {
  Field f = static_cast<Field>(rng() % 3);
  if (rng() % 3 == 0) {
    std::vector<std::string> toks;
    int n = 1 + static_cast<int>(rng() % 3);
    for (int i = 0; i < n; ++i) toks.push_back(kWords[rng() % kWords.size()]);
    return Q::phrase(f, toks);
  }
  return Q::term(f, kWords[rng() % kWords.size()]);
}

Q random_tree(std::mt19937& rng, int depth) {
  if (depth == 0 || rng() % 4 == 0) return random_leaf(rng);
  switch (rng() % 3) {
    case 0: return Q::conj(random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    case 1: return Q::disj(random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    default: return Q::negate(random_tree(rng, depth - 1));
  }
}

// Independent evaluator: plain substring search over space-padded lowercase text.
bool naive_eval(const Q& q, const std::string& title, const std::string& abstract) {
  auto has = [](const std::string& text, const std::string& needle) {
    return (" " + text + " ").find(" " + needle + " ") != std::string::npos;
  };
  auto leaf = [&](const std::string& needle) {
    switch (q.field) {
      case Field::Title: return has(title, needle);
      case Field::Abstract: return has(abstract, needle);
      case Field::Any: return has(title, needle) || has(abstract, needle);
    }
    return false;
  };
  switch (q.kind) {
    case Q::Kind::Term: return leaf(q.text);
    case Q::Kind::Phrase: {
      std::string joined;
      for (const auto& t : q.tokens) joined += (joined.empty() ? "" : " ") + t;
      return leaf(joined);
    }
    case Q::Kind::And: return naive_eval(q.left(), title, abstract) && naive_eval(q.right(), title, abstract);
    case Q::Kind::Or: return naive_eval(q.left(), title, abstract) || naive_eval(q.right(), title, abstract);
    case Q::Kind::Not: return !naive_eval(q.child(), title, abstract);
  }
  return false;
}

}  // namespace

TEST(ParseQuery, PhraseAndGroupedDisjunction) {
  auto q = parse_query(R"("cash transfer" AND (school OR attendance))");
  EXPECT_EQ(q, Q::conj(Q::phrase(Field::Any, {"cash", "transfer"}),
                       Q::disj(Q::term(Field::Any, "school"), Q::term(Field::Any, "attendance"))));
  EXPECT_EQ(describe(q), "And(Phrase(any,[cash,transfer]),Or(Term(any,school),Term(any,attendance)))");
}

TEST(ParseQuery, FieldPrefixAndNot) {
  EXPECT_EQ(parse_query("title:nutrition AND NOT pilot"),
            Q::conj(Q::term(Field::Title, "nutrition"), Q::negate(Q::term(Field::Any, "pilot"))));
}

TEST(ParseQuery, LeadingOperatorIsSyntaxErrorAtZero) { EXPECT_EQ(syntax_offset("AND school"), 0u); }

TEST(ParseQuery, PrecedenceNotAndOr) {
  EXPECT_EQ(parse_query("a OR b AND NOT c"),
            Q::disj(Q::term(Field::Any, "a"), Q::conj(Q::term(Field::Any, "b"), Q::negate(Q::term(Field::Any, "c")))));
  EXPECT_EQ(parse_query("a AND b OR c"),
            Q::disj(Q::conj(Q::term(Field::Any, "a"), Q::term(Field::Any, "b")), Q::term(Field::Any, "c")));
}

TEST(ParseQuery, LowercaseOperatorsAreTerms) {
  EXPECT_EQ(parse_query("cash AND and"), Q::conj(Q::term(Field::Any, "cash"), Q::term(Field::Any, "and")));
}

TEST(ParseQuery, FieldPrefixedPhrase) {
  EXPECT_EQ(parse_query(R"(abstract:"School Meals")"), Q::phrase(Field::Abstract, {"school", "meals"}));
}

TEST(ParseQuery, Errors) {
  EXPECT_EQ(syntax_offset("school OR"), 9u);
  EXPECT_EQ(syntax_offset("(school"), 7u);
  EXPECT_EQ(syntax_offset("school)"), 6u);
  EXPECT_EQ(syntax_offset("cash school"), 5u);
  EXPECT_EQ(syntax_offset("\"open phrase"), 0u);
  EXPECT_EQ(syntax_offset("  NOT pilot"), 2u);
  EXPECT_EQ(syntax_offset("\"   \""), 0u);
  EXPECT_EQ(syntax_offset("title: x"), 6u);
  try {
    parse_query("   ");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyQuery);
  }
}

TEST(EvalQuery, Examples) {
  EXPECT_TRUE(eval_query(Q::term(Field::Any, "school"), record("School feeding works")));
  EXPECT_FALSE(eval_query(Q::phrase(Field::Any, {"cash", "transfer"}), record("", "the transfer of cash to mothers")));
  EXPECT_FALSE(eval_query(Q::negate(Q::term(Field::Title, "pilot")), record("Pilot study")));
}

TEST(EvalQuery, WholeTokensAndFields) {
  auto r = record("Schooling outcomes", "A cash-transfer pilot");
  EXPECT_FALSE(eval_query(parse_query("school"), r));
  EXPECT_TRUE(eval_query(parse_query("\"cash transfer\""), r));
  EXPECT_TRUE(eval_query(parse_query("cash-transfer"), r));
  EXPECT_FALSE(eval_query(parse_query("title:pilot"), r));
  EXPECT_TRUE(eval_query(parse_query("abstract:pilot"), r));
  EXPECT_TRUE(eval_query(parse_query("abstract:A"), r));
}

TEST(RenderQuery, Templates) {
  BooleanSyntax s = identity_syntax();
  s["and"] = "({L} AND {R})";
  EXPECT_EQ(render_query(Q::conj(Q::term(Field::Any, "a"), Q::term(Field::Any, "b")), s), "(a AND b)");
  EXPECT_EQ(render_query(Q::phrase(Field::Any, {"cash", "transfer"}), identity_syntax()), "\"cash transfer\"");
}

TEST(RenderQuery, MissingNotTemplateIsUnsupported) {
  BooleanSyntax s = identity_syntax();
  s.erase("not");
  try {
    render_query(Q::conj(Q::term(Field::Any, "a"), Q::negate(Q::term(Field::Any, "x"))), s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedConstruct);
  }
}

TEST(RenderQuery, SubstitutedTextIsNotReexpanded) {
  BooleanSyntax s = identity_syntax();
  EXPECT_EQ(render_query(Q::term(Field::Any, "{R}"), s), "{R}");
}

TEST(RenderQuery, ParenthesizesOnlyWhereNeeded) {
  auto s = identity_syntax();
  EXPECT_EQ(render_query(parse_query("(a OR b) AND NOT (c AND d)"), s), "(a OR b) AND NOT (c AND d)");
  EXPECT_EQ(render_query(parse_query("a OR b AND c"), s), "a OR b AND c");
  EXPECT_EQ(render_query(parse_query("a AND (b AND c)"), s), "a AND (b AND c)");
  EXPECT_EQ(render_query(parse_query("(a AND b) AND c"), s), "a AND b AND c");
}

TEST(QueryProperty, IdentityRenderRoundTrips) {
  std::mt19937 rng(1234);
  for (int i = 0; i < 2000; ++i) {
    Q q = random_tree(rng, 5);
    if (q.kind == Q::Kind::Not) q = Q::conj(random_leaf(rng), q);
    std::string text = render_query(q, identity_syntax());
    EXPECT_EQ(parse_query(text), q) << text;
  }
}

TEST(QueryProperty, EvalMatchesNaiveSemantics) {
  std::mt19937 rng(99);
  for (int i = 0; i < 3000; ++i) {
    Q q = random_tree(rng, 4);
    std::string title, abstract;
    for (int w = 0; w < 4; ++w) title += (w ? " " : "") + kWords[rng() % kWords.size()];
    for (int w = 0; w < 6; ++w) abstract += (w ? " " : "") + kWords[rng() % kWords.size()];
    StudyRecord r = record(title, abstract);
    RecordTokens rt(r);
    ASSERT_EQ(eval_query(q, rt), naive_eval(q, title, abstract)) << describe(q) << " | " << title << " | " << abstract;
    if (q.kind == Q::Kind::And) {
      EXPECT_EQ(eval_query(q, rt), eval_query(q.left(), rt) && eval_query(q.right(), rt));
    }
    if (q.kind == Q::Kind::Or) {
      EXPECT_EQ(eval_query(q, rt), eval_query(q.left(), rt) || eval_query(q.right(), rt));
    }
    if (q.kind == Q::Kind::Not) {
      EXPECT_EQ(eval_query(q, rt), !eval_query(q.child(), rt));
    }
  }
}
