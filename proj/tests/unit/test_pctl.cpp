#include <gtest/gtest.h>

#include "npv/common.hpp"
#include "npv/pctl.hpp"

using namespace npv;

TEST(Pctl, BoundedUntil) {
  const auto q = parse_query("!O U<=3 D");
  EXPECT_FALSE(q.threshold);
  EXPECT_EQ(q.path, PathFormula::bounded_until(StateFormula::negate(StateFormula::atom("O")), StateFormula::atom("D"), 3));
}

TEST(Pctl, ThresholdsAndSugar) {
  const auto q = parse_query("P>=0.9 [ F<=5 goal ]");
  ASSERT_TRUE(q.threshold);
  EXPECT_EQ(q.threshold->op, CompareOp::ge);
  EXPECT_DOUBLE_EQ(q.threshold->p, 0.9);
  EXPECT_EQ(q.path, PathFormula::bounded_until(StateFormula::top(), StateFormula::atom("goal"), 5));
  EXPECT_EQ(parse_query("P<0.1 [X bad]").threshold->op, CompareOp::lt);
  EXPECT_EQ(parse_query("P>0 [X bad]").threshold->op, CompareOp::gt);
  EXPECT_EQ(parse_query("P<=1 [X bad]").threshold->op, CompareOp::le);
  EXPECT_FALSE(parse_query("P=? [F D]").threshold);
  EXPECT_EQ(parse_path("F D"), PathFormula::until(StateFormula::top(), StateFormula::atom("D")));
  EXPECT_EQ(parse_path("X (a & b)").kind, PathFormula::Kind::next);
}

TEST(Pctl, StatePrecedence) {
  // & binds tighter than |, | is sugar over ! and &
  const auto f = parse_state("a | b & !c");
  const auto want = StateFormula::either(StateFormula::atom("a"),
                                         StateFormula::both(StateFormula::atom("b"), StateFormula::negate(StateFormula::atom("c"))));
  EXPECT_EQ(f, want);
  EXPECT_EQ(parse_state("false"), StateFormula::negate(StateFormula::top()));
  const std::vector<std::string> labels{"a"};
  EXPECT_TRUE(f.holds(labels));
  EXPECT_FALSE(parse_state("!a").holds(labels));
  EXPECT_TRUE(parse_state("b | !c").holds(labels));
  std::vector<std::string> props;
  f.collect_propositions(props);
  EXPECT_EQ(props.size(), 3u);
}

TEST(Pctl, PrintParseRoundTrip) {
  for (const char* text : {"!O U<=3 D", "P>=0.5 [ F<=2 (a | b) ]", "P=? [ X !a ]", "a & b U c", "F true"}) {
    const auto q = parse_query(text);
    EXPECT_EQ(parse_query(q.to_string()), q) << text << " -> " << q.to_string();
  }
}

TEST(Pctl, Rejections) {
  for (const char* text : {"P>=0.5 [ F P>=0.1 [ X a ] ]", "", "a U", "F<=-1 a", "F<=1.5 a", "P>=2 [F a]", "X", "(a",
                           "a b", "U U a", "P>=0.5 F a"}) {
    EXPECT_THROW(parse_query(text), ValidationError) << text;
  }
}
