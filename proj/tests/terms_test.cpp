#include <gtest/gtest.h>

#include "psf/process.hpp"
#include "psf/terms.hpp"

using namespace psf;

TEST(Terms, HashConsistentWithEquality) {
  auto a = make_app("f", {make_app("c", {}, "S")}, "S");
  auto b = make_app("f", {make_app("c", {}, "S")}, "S");
  EXPECT_TRUE(equal(a, b));
  EXPECT_EQ(a->hash, b->hash);
  EXPECT_FALSE(equal(a, make_app("f", {make_app("d", {}, "S")}, "S")));
}

TEST(Terms, Printing) {
  auto ch = make_app(kChannelOp, {make_app("a", {}, "ID"), make_app("b", {}, "ID")}, "CHANNEL");
  EXPECT_EQ(to_string(ch), "a >> b");
  EXPECT_EQ(to_string(make_app("succ", {make_lit(3, kNatSort)}, "S")), "succ(3)");
  EXPECT_EQ(ActionLabel::silent().to_string(), "tau");
  EXPECT_EQ(ActionLabel::act("snd", {make_lit(1, kNatSort)}).to_string(), "snd(1)");
}

TEST(Terms, SubstituteAndSortCheck) {
  auto x = make_var("x", "S");
  auto t = make_app("f", {x}, "S");
  auto r = substitute(t, {{"x", make_app("c", {}, "S")}});
  EXPECT_EQ(to_string(r), "f(c)");
  EXPECT_TRUE(r->ground);
  EXPECT_THROW(substitute(t, {{"x", make_app("c", {}, "T")}}), Error);
}

TEST(Terms, MatchActionBindsPatternVariables) {
  AtomPattern p{"s-call", {make_var("n", "ID"), make_var("s", "SERVICE")}};
  auto label = ActionLabel::act("s-call", {make_app("operator", {}, "ID"), make_app("add", {}, "SERVICE")});
  auto b = match_action(p, {{"n", "ID"}, {"s", "SERVICE"}}, label);
  ASSERT_TRUE(b);
  EXPECT_EQ(to_string(b->at("n")), "operator");
  EXPECT_FALSE(match_action(p, {}, ActionLabel::act("s-call", {make_app("operator", {}, "ID")})));
}

TEST(Terms, MatchRepeatedVariableRequiresEqualArguments) {
  AtomPattern p{"eq", {make_var("x", "S"), make_var("x", "S")}};
  auto c = make_app("c", {}, "S");
  auto d = make_app("d", {}, "S");
  EXPECT_TRUE(match_action(p, {}, ActionLabel::act("eq", {c, c})));
  EXPECT_FALSE(match_action(p, {}, ActionLabel::act("eq", {c, d})));
}

TEST(Terms, Unify) {
  auto x = make_var("x", "S");
  auto y = make_var("y", "S");
  auto c = make_app("c", {}, "S");
  auto th = unify({{make_app("f", {x, c}, "S"), make_app("f", {y, y}, "S")}});
  ASSERT_TRUE(th);
  EXPECT_EQ(to_string(resolve(x, *th)), "c");
  EXPECT_FALSE(unify({{x, make_app("f", {x}, "S")}}));  // occurs check
  EXPECT_FALSE(unify({{x, make_app("c", {}, "T")}}));   // sort clash
}

TEST(Process, StructuralEqualityAndHash) {
  auto a = p_seq(p_atom("a"), p_alt(p_atom("b"), p_atom("c")));
  auto b = p_seq(p_atom("a"), p_alt(p_atom("b"), p_atom("c")));
  EXPECT_TRUE(equal(a, b));
  EXPECT_EQ(a->hash, b->hash);
  EXPECT_EQ(to_string(a), "a . (b + c)");
}

TEST(Process, CanonicalizeOrdersAndDedupesChoice) {
  auto p = p_alt(p_alt(p_atom("c"), p_atom("a")), p_alt(p_atom("b"), p_atom("a")));
  EXPECT_EQ(to_string(canonicalize(p)), "a + b + c");
}

TEST(Process, SubstituteRespectsSumBinder) {
  auto body = p_alt(p_atom("r", {make_var("d", "B")}), p_atom("s", {make_var("e", "B")}));
  auto s = p_sum("d", "B", body);
  auto r = substitute(s, {{"d", make_app("t", {}, "B")}, {"e", make_app("t", {}, "B")}});
  EXPECT_EQ(to_string(r), "sum(d in B, r(d) + s(t))");
}

TEST(Process, PrinterPrecedence) {
  auto p = p_par(p_seq(p_atom("a"), p_atom("b")), p_star(p_alt(p_atom("c"), p_atom("d")), p_atom("e")));
  EXPECT_EQ(to_string(p), "a . b || (c + d) * e");
  EXPECT_EQ(to_string(p_seq(p_seq(p_atom("a"), p_atom("b")), p_atom("c"))), "(a . b) . c");
}
