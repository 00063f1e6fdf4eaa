// Acceptance report: one PASS/FAIL line per criterion, with its time limit.
// Exit status 0 when every criterion passes.

#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "psf/bisim.hpp"
#include "psf/cslib.hpp"
#include "psf/parser.hpp"
#include "psf/refine.hpp"
#include "psf/runtime.hpp"

using namespace psf;

namespace {

// Time limits in seconds.
constexpr double kLibraryLimit = 1.0;
constexpr double kRefinementLimit = 1.0;
constexpr double kBisimLimit = 10.0;
constexpr double kSosLimit = 5.0;
constexpr double kCsgenLimit = 30.0;
constexpr double kShutdownLimit = 30.0;
constexpr double kCalculatorLimit = 60.0;
constexpr double kDeterminismLimit = 60.0;

constexpr std::size_t kMaxStates = 100000;
constexpr std::size_t kLibraryModules = 9;
constexpr int kRandomLtsCount = 200;
constexpr std::size_t kRandomLtsMaxStates = 8;
constexpr long long kGridMax = 9;
constexpr long long kMultiplySuccCalls = 12;

const std::string kSource = PSF_SOURCE_DIR;

std::string path(const std::string& rel) { return kSource + "/" + rel; }

std::string read(const std::string& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Collects failed checks of one criterion.
struct Checks {
  std::vector<std::string> failures;
  std::string note;
  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

std::vector<ModuleDef> user_modules(const std::vector<std::string>& files) {
  std::vector<ModuleDef> out;
  for (const auto& f : files)
    for (auto& m : parse_file(f)) out.push_back(std::move(m));
  return out;
}

// ---- criteria

void library_fidelity(Checks& c) {
  auto cs = parse_spec(client_server_library_text(), kClientServerLibraryPath);
  c.require(cs.size() == kLibraryModules, "expected 9 Client/Server modules, got " + std::to_string(cs.size()));
  auto mods = library_modules();
  for (const auto& m : mods) {
    if (!m.parameters.empty()) continue;
    auto ds = check(flatten(mods, m.name));
    c.require(ds.empty(), m.name + " links with diagnostics");
  }
  // Parameterised modules are linked through the hand-written pair system.
  auto pair = load_spec({path("specs/cs/pair.psf"), path("specs/cs/pair_system.psf")});
  c.require(check(pair.spec).empty(), "pair system links with diagnostics");

  std::ostringstream sig;
  for (const auto& m : cs) {
    sig << m.name << "\n";
    for (const auto* s : {&m.exports, &m.local})
      for (const auto& a : s->atoms) {
        sig << "  " << a.name;
        for (std::size_t i = 0; i < a.arg_sorts.size(); ++i) sig << (i ? " # " : " : ") << a.arg_sorts[i];
        sig << "\n";
      }
  }
  c.require(sig.str() == read(path("tests/golden/cs_library.txt")), "signature differs from golden file");
  c.require(sig.str().find("cs-snd-request : ID # ID # SERVICE") != std::string::npos, "cs-snd-request signature");
  c.note = std::to_string(cs.size()) + " modules";
}

void refinement(Checks& c) {
  auto src = load_spec({path("specs/arch_example.psf")});
  auto tgt = load_spec({path("specs/arch_example.psf"), path("specs/toolbus_example.psf")}, "ToolBusExample");
  auto map = read_mapping(path("specs/maps/component1_pt1.map"));
  auto mapped = apply_mapping(src.spec, map);
  const ProcessDef* got = mapped.find_def("PT1");
  const ProcessDef* want = tgt.spec.find_def("PT1");
  c.require(got && want && to_string(canonicalize(got->body)) == to_string(canonicalize(want->body)),
            "mapped Component1 differs from PT1");
  c.require(verify_refinement(src.spec, map, tgt.spec, "Component1", "PT1").equivalent,
            "Component1 does not refine to PT1");
  auto mutant = check_refinement(src.spec, map, tgt.spec, "Component1", "PT1-NoAck");
  c.require(!mutant.result.equivalent, "mutant PT1-NoAck accepted");
  c.require(mutant.result.witness &&
                replay_witness(mutant.source, mutant.target, *mutant.result.witness, BisimKind::rooted_weak),
            "mutant witness does not replay");
}

const FlatSpec& acts() {
  static const FlatSpec s = flatten(parse_spec(R"(
process module Acts
begin
  exports
  begin
    atoms
      a, b, c, d
  end
  communications
    a | b = c
end Acts
)"),
                                    "Acts");
  return s;
}

Lts lts_of(const std::string& text) { return build_lts(acts(), resolve_process(acts(), parse_process(text))); }

void bisim_laws(Checks& c) {
  c.require(strong_bisim(lts_of("a + a"), lts_of("a")).equivalent, "a + a vs a");
  auto dist = strong_bisim(lts_of("a . (b + c)"), lts_of("a . b + a . c"));
  c.require(!dist.equivalent, "a.(b+c) vs a.b+a.c not distinguished");
  c.require(dist.witness && replay_witness(lts_of("a . (b + c)"), lts_of("a . b + a . c"), *dist.witness,
                                           BisimKind::strong),
            "distributivity witness does not replay");
  c.require(rooted_weak_bisim(lts_of("a . skip"), lts_of("a")).equivalent, "a.skip vs a (rooted weak)");
  c.require(!rooted_weak_bisim(lts_of("skip . a"), lts_of("a")).equivalent, "skip.a vs a not distinguished");

  std::mt19937_64 rng(20261017);
  std::vector<ActionLabel> labels{ActionLabel::silent(), ActionLabel::act("a"), ActionLabel::act("b")};
  std::vector<Lts> corpus;
  for (int i = 0; i < kRandomLtsCount; ++i) {
    Lts l;
    std::size_t n = 1 + rng() % kRandomLtsMaxStates;
    for (std::size_t s = 0; s < n; ++s) l.add_state(rng() % 5 == 0);
    std::size_t m = rng() % (2 * n + 1);
    for (std::size_t t = 0; t < m; ++t) l.add_transition(rng() % n, labels[rng() % 3], rng() % n);
    corpus.push_back(std::move(l));
  }
  std::size_t violations = 0, related = 0;
  const std::size_t n = corpus.size();
  for (auto kind : {BisimKind::strong, BisimKind::rooted_weak}) {
    std::vector<std::vector<char>> eq(n, std::vector<char>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) eq[i][j] = check_bisim(corpus[i], corpus[j], kind).equivalent;
    for (std::size_t i = 0; i < n; ++i) {
      violations += !eq[i][i];
      for (std::size_t j = 0; j < n; ++j) {
        violations += eq[i][j] != eq[j][i];
        if (!eq[i][j]) continue;
        related += i != j;
        for (std::size_t k = 0; k < n; ++k) violations += eq[j][k] && !eq[i][k];
      }
    }
  }
  c.require(violations == 0, std::to_string(violations) + " equivalence-law violations on random LTSs");
  c.note = std::to_string(kRandomLtsCount) + " random LTSs, " + std::to_string(related) + " related pairs";
}

std::vector<std::string> steps(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& [l, t] : step(acts(), Semantics(acts()).initial(resolve_process(acts(), parse_process(text)))))
    out.push_back(l.to_string() + " -> " + to_string(t));
  return out;
}

void sos_laws(Checks& c) {
  using V = std::vector<std::string>;
  c.require(steps("encaps({a, b}, a || b)") == V{"c -> done"}, "encapsulated communication");
  auto plain = lts_of("a . b . (a + d)");
  auto hidden = lts_of("hide({a}, a . b . (a + d))");
  std::size_t hidden_tau = 0, plain_a = 0;
  for (const auto& t : plain.transitions) plain_a += !t.label.tau && t.label.atom == "a";
  for (const auto& t : hidden.transitions) hidden_tau += t.label.tau;
  c.require(plain.transitions.size() == hidden.transitions.size() && plain_a == hidden_tau,
            "hide changes the transition count");
  c.require(strong_bisim(lts_of("a * b"), lts_of("a . (a * b) + b")).equivalent, "star unfolding");
  c.require(strong_bisim(lts_of("a . d || b . c"), lts_of("b . c || a . d")).equivalent, "parallel commutes");
  c.require(steps("disrupt(a . b, d)") == V{"a -> disrupt(b, d)", "d -> done"}, "disrupt: left step or take-over");
  c.require(steps("disrupt(a, d)") == V{"a -> done", "d -> done"}, "disrupt: terminates with left");
}

struct Generated {
  std::vector<ModuleDef> user;
  GeneratedComposition g;
  FlatSpec spec;
};

Generated generate(const std::string& psf, const std::string& manifest) {
  Generated r;
  r.user = user_modules({path("specs/cs/" + psf)});
  r.g = generate_interfaces(r.user, read_manifest(path("specs/cs/" + manifest)));
  r.spec = link_composition(r.user, r.g);
  return r;
}

void csgen(Checks& c) {
  auto pair = generate("pair.psf", "pair.manifest");
  auto gen = build_lts(pair.spec, pair.g.root_process, {}, kMaxStates);
  auto hand = load_spec({path("specs/cs/pair.psf"), path("specs/cs/pair_system.psf")});
  auto ref = build_lts(hand.spec, "Application", {}, kMaxStates);
  c.require(!gen.truncated && !ref.truncated, "pair LTS truncated");
  c.require(strong_bisim(gen, ref).equivalent, "generated pair not strongly bisimilar to the hand-written system");

  auto full = generate("full.psf", "full.manifest");
  auto lts = build_lts(full.spec, full.g.root_process, {}, kMaxStates);
  c.require(!lts.truncated, "full system truncated at --max-states 100000");
  std::size_t leaked = 0;
  for (const auto& t : lts.transitions)
    if (!t.label.tau && (t.label.atom.rfind("cs-snd-", 0) == 0 || t.label.atom.rfind("cs-rec-", 0) == 0)) ++leaked;
  c.require(leaked == 0, std::to_string(leaked) + " cs- send/receive transitions escape encapsulation");
  c.note = "pair " + std::to_string(gen.num_states) + " states, full " + std::to_string(lts.num_states) + " states";
}

void shutdown(Checks& c) {
  auto full = generate("full.psf", "full.manifest");
  auto lts = build_lts(full.spec, full.g.root_process, {}, kMaxStates);
  auto rep = quit_shutdown_closure(lts, full.g.components.size());
  c.require(!lts.truncated, "full system truncated");
  c.require(rep.quit_transitions > 0, "no quit transition");
  c.require(rep.ok(), "shutdown property violated");

  ModuleDef env;
  for (const auto& m : library_modules())
    if (m.name == "ClientServer") env = m;
  if (env.comms.size() != 2) {
    c.require(false, "ClientServer environment does not have two communications");
    return;
  }
  env.comms.pop_back();  // drop the shutdown communication
  auto mutant_user = full.user;
  mutant_user.push_back(env);
  auto mutant = build_lts(link_composition(mutant_user, full.g), full.g.root_process, {}, kMaxStates);
  c.require(!quit_shutdown_closure(mutant, full.g.components.size()).ok(), "mutant without shutdown accepted");
  c.note = "bound " + std::to_string(rep.bound) + ", worst " + std::to_string(rep.worst_steps);
}

void calculator(Checks& c) {
  auto demo = calculator_demo();
  auto compute = [&](const std::string& op, long long x, long long y) {
    Session s(demo.spec, demo.root, 0, demo.handlers);
    run_auto(s, ScriptPolicy{calculator_script(op, x, y), true});
    return last_result(s).value_or(-1);
  };
  {
    Session s(demo.spec, demo.root, 0, demo.handlers);
    run_auto(s, ScriptPolicy{calculator_script("multiply", 3, 4), true});
    c.require(last_result(s) == 12, "multiply(3,4) != 12");
    auto succ = s.count("s-call(primitive, succ(_))");
    c.require(succ == static_cast<std::size_t>(kMultiplySuccCalls),
              "multiply(3,4) made " + std::to_string(succ) + " succ calls");
  }
  c.require(compute("divide", 13, 4) == 3, "divide(13,4) != 3");
  c.require(compute("subtract", 2, 5) == 0, "subtract(2,5) != 0");
  c.require(compute("pred", 0, 0) == 0, "pred(0) != 0");
  c.require(compute("divide", 7, 0) == 0, "divide(7,0) != 0");

  // Full 0..9 grid per operation, visited in a seeded random order.
  std::vector<std::pair<long long, long long>> grid;
  for (long long x = 0; x <= kGridMax; ++x)
    for (long long y = 0; y <= kGridMax; ++y) grid.emplace_back(x, y);
  std::mt19937_64 rng(42);
  std::shuffle(grid.begin(), grid.end(), rng);
  std::size_t mismatches = 0, runs = 0;
  for (const char* op : {"add", "subtract", "multiply", "divide"})
    for (auto [x, y] : grid) {
      long long want = std::string(op) == "add"        ? x + y
                       : std::string(op) == "subtract" ? (x > y ? x - y : 0)
                       : std::string(op) == "multiply" ? x * y
                                                       : (y == 0 ? 0 : x / y);
      ++runs;
      if (compute(op, x, y) != want) {
        ++mismatches;
        if (mismatches <= 3) c.failures.push_back(std::string(op) + "(" + std::to_string(x) + "," + std::to_string(y) + ")");
      }
    }
  c.require(mismatches == 0, std::to_string(mismatches) + " grid mismatches");
  c.note = std::to_string(runs) + " grid runs";
}

void determinism(Checks& c) {
  auto export_once = [] {
    auto full = generate("full.psf", "full.manifest");
    return to_aut(build_lts(full.spec, full.g.root_process, {}, kMaxStates));
  };
  auto arch = [] {
    auto s = load_spec({path("specs/arch_example.psf")});
    return to_aut(build_lts(s.spec, "Application"));
  };
  auto trace_once = [](std::uint64_t seed) {
    auto demo = calculator_demo();
    Session s(demo.spec, demo.root, seed, demo.handlers);
    run_auto(s, RandomPolicy{seed}, 300);
    return s.trace_text();
  };
  c.require(export_once() == export_once(), "full system export differs between runs");
  c.require(arch() == arch(), "architecture example export differs between runs");
  for (std::uint64_t seed : {1ull, 7ull, 2026ull}) {
    auto t = trace_once(seed);
    c.require(!t.empty() && t == trace_once(seed), "calculator trace differs for seed " + std::to_string(seed));
  }
}

struct Criterion {
  const char* name;
  double limit;
  std::function<void(Checks&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"library fidelity", kLibraryLimit, library_fidelity},
      {"refinement reproduction", kRefinementLimit, refinement},
      {"bisimulation laws", kBisimLimit, bisim_laws},
      {"SOS laws", kSosLimit, sos_laws},
      {"interface generation equivalence", kCsgenLimit, csgen},
      {"shutdown property", kShutdownLimit, shutdown},
      {"calculator oracle", kCalculatorLimit, calculator},
      {"determinism", kDeterminismLimit, determinism},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Checks c;
    auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > cr.limit) c.failures.push_back("over time limit");
    bool ok = c.failures.empty();
    failed += !ok;
    std::cout << (ok ? "PASS" : "FAIL") << "  " << std::left << std::setw(34) << cr.name << std::right << std::fixed
              << std::setprecision(2) << std::setw(7) << secs << " s (limit " << std::setprecision(0) << cr.limit
              << " s)";
    if (!c.note.empty()) std::cout << "  " << c.note;
    for (const auto& f : c.failures) std::cout << "\n      " << f;
    std::cout << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : std::string("all criteria passed"))
            << std::endl;
  return failed ? 1 : 0;
}
