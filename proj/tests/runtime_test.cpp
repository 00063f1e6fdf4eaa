#include <gtest/gtest.h>

#include <stdexcept>

#include "helpers.hpp"
#include "psf/runtime.hpp"

using namespace psf;
using psf::test::source_dir;

namespace {

const CalculatorDemo& demo() {
  static const CalculatorDemo d = calculator_demo();
  return d;
}

Session calculator(HandlerTable h = demo().handlers, std::uint64_t seed = 0) {
  return Session(demo().spec, demo().root, seed, std::move(h));
}

std::vector<std::string> labels(const Session& s) {
  std::vector<std::string> out;
  for (const auto& d : s.enabled()) out.push_back(d.label.to_string());
  return out;
}

bool offers(const Session& s, const std::string& label) {
  for (const auto& l : labels(s))
    if (l == label) return true;
  return false;
}

/// Fires communications one at a time until `label` has been fired.
void internal_until(Session& s, const std::string& label) {
  for (int i = 0; i < 1000; ++i) {
    if (!s.trace().empty() && s.trace().back().label.to_string() == label) return;
    ASSERT_EQ(s.run_internal(1), 1u) << "stuck before " << label;
  }
  FAIL() << "never fired " << label;
}

long long compute(const std::string& op, long long x, long long y = 0) {
  Session s = calculator();
  run_auto(s, ScriptPolicy{calculator_script(op, x, y), true});
  auto r = last_result(s);
  return r ? *r : -1;
}

std::shared_ptr<const FlatSpec> tiny_spec() {
  return std::make_shared<const FlatSpec>(test::link_text(
      "process module T\nbegin\n  exports\n  begin\n    atoms\n      a\n      b\n  end\nend T\n", "T"));
}

}  // namespace

TEST(Session, PairApplicationOffersOperatorChoices) {
  auto spec = std::make_shared<const FlatSpec>(
      load_spec({source_dir() + "/specs/cs/pair.psf", source_dir() + "/specs/cs/pair_system.psf"}).spec);
  Session s(spec, "Application");
  EXPECT_TRUE(offers(s, "input-data"));
  EXPECT_TRUE(offers(s, "primitive-operation"));
  EXPECT_TRUE(offers(s, "stop"));
  s.fire_label("primitive-operation");
  EXPECT_TRUE(offers(s, "c-call(operator, primitive, primitive-operation)"));
  s.reset();
  s.fire_label("input-data");
  EXPECT_TRUE(offers(s, "input-data"));
  EXPECT_TRUE(offers(s, "stop"));
}

TEST(Session, DeltaAndSkip) {
  auto spec = tiny_spec();
  Session d(spec, test::expr(*spec, "delta"));
  EXPECT_TRUE(d.enabled().empty());
  EXPECT_FALSE(d.terminated());
  Session k(spec, test::expr(*spec, "skip"));
  ASSERT_EQ(k.enabled().size(), 1u);
  EXPECT_TRUE(k.enabled()[0].label.tau);
  k.fire(0);
  EXPECT_TRUE(k.terminated());
  EXPECT_TRUE(k.enabled().empty());
  EXPECT_THROW(k.fire(0), Error);
}

TEST(Session, UndoRestoresStateAndTrace) {
  auto spec = tiny_spec();
  Session s(spec, test::expr(*spec, "a . b + b"));
  std::string before = to_string(s.current());
  s.fire(0);
  EXPECT_EQ(s.trace().size(), 1u);
  ASSERT_TRUE(s.undo());
  EXPECT_EQ(to_string(s.current()), before);
  EXPECT_TRUE(s.trace().empty());
  ASSERT_TRUE(s.redo());
  EXPECT_EQ(s.trace().size(), 1u);
  EXPECT_FALSE(s.redo());
  EXPECT_EQ(s.trace_text(), "0\ta\n");
}

TEST(Session, UndoRedoEqualsReplayOfNetTrace) {
  Session s = calculator({}, 1);
  std::mt19937_64 rng(7);
  // Placeholder names depend on each session's derivation history, so
  // values are recorded in placeholder order.
  struct Op {
    std::size_t index;
    std::vector<TermPtr> values;
  };
  auto bind = [](const Session& x, std::size_t idx, const std::vector<TermPtr>& vs) {
    Binding b;
    auto names = placeholders(x.enabled()[idx].label);
    for (std::size_t k = 0; k < names.size(); ++k) b[names[k]] = vs[k];
    return b;
  };
  std::vector<Op> net;
  for (int i = 0; i < 200; ++i) {
    if (!net.empty() && rng() % 4 == 0) {
      ASSERT_TRUE(s.undo());
      net.pop_back();
      continue;
    }
    if (s.enabled().empty()) break;
    std::size_t idx = rng() % s.enabled().size();
    std::vector<TermPtr> v;
    for (std::size_t k = 0; k < placeholders(s.enabled()[idx].label).size(); ++k)
      v.push_back(make_lit(static_cast<long long>(rng() % 5)));
    s.fire(idx, bind(s, idx, v));
    net.push_back({idx, v});
  }
  Session replay = calculator({}, 1);
  for (const auto& op : net) replay.fire(op.index, bind(replay, op.index, op.values));
  EXPECT_EQ(to_string(replay.current()), to_string(s.current()));
  EXPECT_EQ(replay.trace_text(), s.trace_text());
}

TEST(Session, HandlerInstantiatesTheReturnedResult) {
  Session s = calculator();
  s.fire_label("enter(3)");
  s.run_internal();
  s.fire_label("op-succ");
  internal_until(s, "cs-request(operator, primitive, succ(3))");
  // Only the server call can happen now.
  ASSERT_EQ(labels(s), (std::vector<std::string>{"s-call(primitive, succ(3))"}));
  s.fire(0);
  ASSERT_EQ(labels(s), (std::vector<std::string>{"s-return(primitive, 4)"}));
  EXPECT_TRUE(s.enabled()[0].handler_result);
  s.run_internal();
  EXPECT_EQ(last_result(s), 4);
}

TEST(Session, WithoutHandlerTheResultStaysOpen) {
  Session s = calculator({});
  s.fire_label("enter(3)");
  s.run_internal();
  s.fire_label("op-succ");
  s.run_internal();
  ASSERT_EQ(s.enabled().size(), 1u);
  EXPECT_TRUE(s.enabled()[0].symbolic);
  EXPECT_EQ(s.enabled()[0].label.atom, "s-return");
  // The algebra admits any value; a handler would have chosen 4.
  s.fire_label("s-return(primitive, 4)");
  s.run_internal();
  EXPECT_EQ(last_result(s), 4);
}

TEST(Session, QuitShutsDown) {
  Session s = calculator();
  s.fire_label("stop");
  EXPECT_EQ(labels(s), (std::vector<std::string>{"quit"}));
  s.fire(0);
  EXPECT_TRUE(offers(s, "shutdown"));
  s.fire_label("shutdown");
  EXPECT_TRUE(s.terminated());
  EXPECT_EQ(s.count("quit"), 1u);
  EXPECT_LE(s.trace().size(), demo().components.size() + 2);
}

TEST(Session, ShutdownFromAnyVisitedState) {
  // From states reached by random runs, stop/quit/shutdown terminates within
  // component count + 2 steps of the quit.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Session s = calculator(demo().handlers, seed);
    run_auto(s, RandomPolicy{seed, 9}, 10);
    if (s.terminated()) continue;
    s.run_internal();
    if (!offers(s, "stop")) {
      s.run_internal();
      continue;
    }
    s.fire_label("stop");
    s.fire_label("quit");
    std::size_t steps = 1;
    while (!s.terminated() && steps <= demo().components.size() + 2) {
      ASSERT_FALSE(s.enabled().empty());
      if (offers(s, "shutdown"))
        s.fire_label("shutdown");
      else
        s.fire(0);
      ++steps;
    }
    EXPECT_TRUE(s.terminated()) << "seed " << seed;
  }
}

TEST(Session, HandlerFailureIsAnUndoableError) {
  HandlerTable h = demo().handlers;
  h.bind("primitive", "succ", [](const TermPtr&, Stub&) -> TermPtr { throw std::runtime_error("boom"); });
  Session s = calculator(std::move(h));
  s.fire_label("enter(1)");
  s.run_internal();
  s.fire_label("op-succ");
  internal_until(s, "cs-request(operator, primitive, succ(1))");
  std::size_t n = s.trace().size();
  s.fire(0);
  ASSERT_TRUE(s.error().has_value());
  EXPECT_NE(s.error()->message.find("boom"), std::string::npos);
  EXPECT_THROW(s.fire(0), Error);
  ASSERT_TRUE(s.undo());
  EXPECT_FALSE(s.error().has_value());
  EXPECT_EQ(s.trace().size(), n);
}

TEST(Session, CountMatchesWildcards) {
  Session s = calculator();
  EXPECT_EQ(s.count("s-call(primitive, succ(_))"), 0u);
  run_auto(s, ScriptPolicy{calculator_script("add", 2, 3), true});
  EXPECT_EQ(s.count("s-call(primitive, succ(_))"), 3u);
  EXPECT_EQ(s.count("s-call(basic, add(2, 3))"), 1u);
  EXPECT_EQ(s.count("push(_)"), 3u);
}

TEST(Session, SameSeedSameTrace) {
  Session a = calculator(demo().handlers, 42), b = calculator(demo().handlers, 42);
  run_auto(a, RandomPolicy{42, 9}, 150);
  run_auto(b, RandomPolicy{42, 9}, 150);
  EXPECT_EQ(a.trace_text(), b.trace_text());
  EXPECT_FALSE(a.trace().empty());
}

TEST(Script, ParsesAndReportsTheFailingStep) {
  auto lines = parse_script("-- multiply\nenter(3)\n\n  enter(4)  -- second\nop-multiply\n");
  EXPECT_EQ(lines, (std::vector<std::string>{"enter(3)", "enter(4)", "op-multiply"}));
  Session s = calculator();
  try {
    run_auto(s, ScriptPolicy{{"enter(1)", "quit"}, true});
    FAIL() << "expected a script error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("script step 2"), std::string::npos) << e.what();
  }
}

TEST(Script, ShippedScenarios) {
  Session s = calculator();
  run_auto(s, ScriptPolicy{read_script(source_dir() + "/specs/scripts/multiply_3_4.script"), true});
  EXPECT_EQ(last_result(s), 12);
  EXPECT_EQ(s.count("s-call(primitive, succ(_))"), 12u);
  Session q = calculator();
  run_auto(q, ScriptPolicy{read_script(source_dir() + "/specs/scripts/shutdown.script"), false});
  EXPECT_TRUE(q.terminated());
}

TEST(Calculator, AppendixOracles) {
  EXPECT_EQ(compute("multiply", 3, 4), 12);
  EXPECT_EQ(compute("divide", 13, 4), 3);
  EXPECT_EQ(compute("subtract", 2, 5), 0);
  EXPECT_EQ(compute("pred", 0), 0);
  EXPECT_EQ(compute("divide", 7, 0), 0);
  EXPECT_EQ(compute("iszero", 0), 1);
  EXPECT_EQ(compute("iszero", 3), 0);
  EXPECT_EQ(compute("succ", 9), 10);
}

TEST(Calculator, LessThanUsesSubtractThenIszero) {
  Session s = calculator();
  run_auto(s, ScriptPolicy{calculator_script("divide", 2, 5), true});
  EXPECT_EQ(last_result(s), 0);
  std::string t = s.trace_text();
  auto sub = t.find("s-call(basic, subtract(5, 2))");
  auto zero = t.find("s-call(primitive, iszero(3))");
  ASSERT_NE(sub, std::string::npos);
  ASSERT_NE(zero, std::string::npos);
  EXPECT_LT(sub, zero);
}

TEST(Calculator, NotEnoughArguments) {
  Session s = calculator();
  run_auto(s, ScriptPolicy{{"enter(4)", "op-add"}, true});
  EXPECT_TRUE(offers(s, "not-enough-arguments"));
  s.fire_label("not-enough-arguments");
  // The operand went back on the stack.
  run_auto(s, ScriptPolicy{{"enter(5)", "op-add"}, true});
  EXPECT_EQ(last_result(s), 9);
}

TEST(Calculator, SampledGrid) {
  for (long long x = 0; x <= 9; x += 3)
    for (long long y = 0; y <= 9; y += 4) {
      EXPECT_EQ(compute("add", x, y), x + y);
      EXPECT_EQ(compute("subtract", x, y), x > y ? x - y : 0);
      EXPECT_EQ(compute("multiply", x, y), x * y);
      EXPECT_EQ(compute("divide", x, y), y == 0 ? 0 : x / y);
    }
}
