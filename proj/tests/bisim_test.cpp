#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"
#include "psf/bisim.hpp"

using namespace psf;
using psf::test::expr;
using psf::test::link_text;

namespace {

const FlatSpec& spec() {
  static const FlatSpec s = link_text(R"(
process module Acts
begin
  exports
  begin
    atoms
      a, b, c
  end
end Acts
)",
                                      "Acts");
  return s;
}

Lts lts(const std::string& text) { return build_lts(spec(), expr(spec(), text)); }

void expect_distinguished(const Lts& x, const Lts& y, BisimKind kind) {
  auto r = check_bisim(x, y, kind);
  ASSERT_FALSE(r.equivalent);
  ASSERT_TRUE(r.witness);
  EXPECT_TRUE(replay_witness(x, y, *r.witness, kind)) << format_witness(*r.witness);
}

}  // namespace

TEST(Bisim, ChoiceIdempotent) { EXPECT_TRUE(strong_bisim(lts("a + a"), lts("a")).equivalent); }

TEST(Bisim, DistributivityFails) {
  auto x = lts("a . (b + c)");
  auto y = lts("a . b + a . c");
  expect_distinguished(x, y, BisimKind::strong);
  expect_distinguished(y, x, BisimKind::strong);
  auto w = *strong_bisim(x, y).witness;
  ASSERT_GE(w.size(), 2u);
  EXPECT_EQ(w[0].label.to_string(), "a");
  EXPECT_FALSE(w.back().matched);
}

TEST(Bisim, TerminationMatters) { expect_distinguished(lts("a"), lts("a . delta"), BisimKind::strong); }

TEST(Bisim, RootedWeakAbsorbsTrailingSilentStep) {
  EXPECT_TRUE(rooted_weak_bisim(lts("a . skip"), lts("a")).equivalent);
  EXPECT_FALSE(strong_bisim(lts("a . skip"), lts("a")).equivalent);
}

TEST(Bisim, RootConditionSeparatesLeadingSilentStep) {
  expect_distinguished(lts("skip . a"), lts("a"), BisimKind::rooted_weak);
  expect_distinguished(lts("a"), lts("skip . a"), BisimKind::rooted_weak);
}

TEST(Bisim, WeakButNotRooted) {
  // skip.a + b and a + b differ even as plain weak bisimulation.
  expect_distinguished(lts("skip . a + b"), lts("a + b"), BisimKind::rooted_weak);
}

TEST(Bisim, RejectsTruncated) {
  Lts t = lts("a");
  t.truncated = true;
  EXPECT_THROW(strong_bisim(t, t), Error);
}

TEST(TauSaturate, AddsDirectStep) {
  auto s = tau_saturate(lts("skip . a"));
  bool direct = false;
  for (const auto& t : s.transitions)
    if (t.from == s.initial && t.label.to_string() == "a") direct = true;
  EXPECT_TRUE(direct);
}

TEST(TauSaturate, NoTauOnlyReflexive) {
  auto l = lts("a . b");
  auto s = tau_saturate(l);
  EXPECT_EQ(s.num_states, l.num_states);
  EXPECT_EQ(s.transitions.size(), l.transitions.size() + l.num_states);
}

TEST(Minimize, Basics) {
  auto m = minimize(lts("a + a"), MinimizeKind::strong);
  EXPECT_EQ(m.num_states, 2u);
  EXPECT_EQ(m.transitions.size(), 1u);
  auto star = lts("a * delta");
  auto ms = minimize(star, MinimizeKind::strong);
  EXPECT_EQ(ms.num_states, star.num_states);
  EXPECT_EQ(ms.transitions.size(), star.transitions.size());
}

TEST(Minimize, IdempotentAndEquivalent) {
  for (auto kind : {MinimizeKind::strong, MinimizeKind::weak}) {
    auto x = lts("a . (skip . b + c) + a . (b + c) . skip");
    auto m1 = minimize(x, kind);
    auto m2 = minimize(m1, kind);
    EXPECT_EQ(m1.num_states, m2.num_states);
    EXPECT_EQ(m1.transitions.size(), m2.transitions.size());
    if (kind == MinimizeKind::strong) EXPECT_TRUE(strong_bisim(x, m1).equivalent);
  }
}

TEST(Bisim, RandomizedLaws) {
  std::mt19937_64 rng(7);
  std::vector<ActionLabel> labels{ActionLabel::silent(), ActionLabel::act("a"), ActionLabel::act("b")};
  auto random_lts = [&] {
    Lts l;
    std::size_t n = 1 + rng() % 8;
    for (std::size_t i = 0; i < n; ++i) l.add_state(rng() % 5 == 0);
    std::size_t m = rng() % (2 * n + 1);
    for (std::size_t i = 0; i < m; ++i) l.add_transition(rng() % n, labels[rng() % 3], rng() % n);
    return l;
  };
  std::vector<Lts> corpus;
  for (int i = 0; i < 60; ++i) corpus.push_back(random_lts());
  for (auto kind : {BisimKind::strong, BisimKind::rooted_weak}) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      EXPECT_TRUE(check_bisim(corpus[i], corpus[i], kind).equivalent);
      for (std::size_t j = 0; j < corpus.size(); ++j) {
        auto r = check_bisim(corpus[i], corpus[j], kind);
        EXPECT_EQ(r.equivalent, check_bisim(corpus[j], corpus[i], kind).equivalent);
        if (!r.equivalent) EXPECT_TRUE(replay_witness(corpus[i], corpus[j], *r.witness, kind));
        if (kind == BisimKind::rooted_weak && strong_bisim(corpus[i], corpus[j]).equivalent) EXPECT_TRUE(r.equivalent);
      }
    }
  }
}
