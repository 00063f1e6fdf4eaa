#include "psf/bisim.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

#include "psf/diagnostics.hpp"

namespace psf {

namespace {

constexpr int kTau = 0;

struct LabelTable {
  std::unordered_map<std::string, int> ids{{"tau", kTau}};
  std::vector<ActionLabel> labels{ActionLabel::silent()};

  int intern(const ActionLabel& l) {
    if (l.tau) return kTau;
    auto [it, fresh] = ids.emplace(l.to_string(), static_cast<int>(labels.size()));
    if (fresh) labels.push_back(l);
    return it->second;
  }
};

using Edge = std::pair<int, std::size_t>;  // label id, target

struct Graph {
  std::size_t n = 0;
  std::vector<std::vector<Edge>> out;
  std::vector<char> term;
};

void append(Graph& g, const Lts& a, LabelTable& tab) {
  std::size_t off = g.n;
  g.n += a.num_states;
  g.out.resize(g.n);
  g.term.resize(g.n, 0);
  for (std::size_t s = 0; s < a.num_states; ++s) g.term[off + s] = s < a.terminating.size() && a.terminating[s];
  for (const auto& t : a.transitions) g.out[off + t.from].emplace_back(tab.intern(t.label), off + t.to);
  for (auto& es : g.out) {
    std::sort(es.begin(), es.end());
    es.erase(std::unique(es.begin(), es.end()), es.end());
  }
}

Graph from_lts(const Lts& a, LabelTable& tab) {
  Graph g;
  append(g, a, tab);
  return g;
}

std::vector<std::size_t> tau_closure(const Graph& g, std::size_t s) {
  std::vector<std::size_t> seen{s};
  std::set<std::size_t> mark{s};
  for (std::size_t i = 0; i < seen.size(); ++i)
    for (const auto& [l, t] : g.out[seen[i]])
      if (l == kTau && mark.insert(t).second) seen.push_back(t);
  std::sort(seen.begin(), seen.end());
  return seen;
}

Graph saturate(const Graph& g) {
  std::vector<std::vector<std::size_t>> closure(g.n);
  for (std::size_t s = 0; s < g.n; ++s) closure[s] = tau_closure(g, s);
  Graph w;
  w.n = g.n;
  w.out.resize(g.n);
  w.term.resize(g.n, 0);
  for (std::size_t s = 0; s < g.n; ++s) {
    std::set<Edge> es;
    for (std::size_t t : closure[s]) {
      es.emplace(kTau, t);
      if (g.term[t]) w.term[s] = 1;
      for (const auto& [l, u] : g.out[t])
        if (l != kTau)
          for (std::size_t v : closure[u]) es.emplace(l, v);
    }
    w.out[s].assign(es.begin(), es.end());
  }
  return w;
}

Lts to_lts(const Graph& g, const LabelTable& tab, std::size_t initial) {
  Lts out;
  for (std::size_t s = 0; s < g.n; ++s) out.add_state(g.term[s]);
  out.initial = initial;
  for (std::size_t s = 0; s < g.n; ++s)
    for (const auto& [l, t] : g.out[s]) out.add_transition(s, tab.labels[l], t);
  return out;
}

struct VecHash {
  std::size_t operator()(const std::vector<std::size_t>& v) const {
    std::size_t h = v.size();
    for (std::size_t x : v) h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};

/// Signature refinement. rounds[0] separates terminating states; each later
/// round refines by (label, block of target). The last round is stable.
std::vector<std::vector<std::size_t>> refine(const Graph& g) {
  std::vector<std::vector<std::size_t>> rounds;
  std::vector<std::size_t> first(g.n);
  std::size_t count = 0;
  {
    std::map<char, std::size_t> ids;
    for (std::size_t s = 0; s < g.n; ++s) {
      auto [it, fresh] = ids.emplace(g.term[s], ids.size());
      first[s] = it->second;
      (void)fresh;
    }
    count = ids.size();
  }
  rounds.push_back(std::move(first));
  for (;;) {
    const auto& prev = rounds.back();
    std::unordered_map<std::vector<std::size_t>, std::size_t, VecHash> ids;
    std::vector<std::size_t> next(g.n);
    std::vector<std::size_t> sig;
    for (std::size_t s = 0; s < g.n; ++s) {
      std::vector<std::pair<std::size_t, std::size_t>> pairs;
      pairs.reserve(g.out[s].size());
      for (const auto& [l, t] : g.out[s]) pairs.emplace_back(static_cast<std::size_t>(l), prev[t]);
      std::sort(pairs.begin(), pairs.end());
      pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
      sig.clear();
      sig.push_back(prev[s]);
      for (const auto& [l, b] : pairs) {
        sig.push_back(l);
        sig.push_back(b);
      }
      next[s] = ids.emplace(sig, ids.size()).first->second;
    }
    if (ids.size() == count) break;
    count = ids.size();
    rounds.push_back(std::move(next));
  }
  return rounds;
}

class WitnessBuilder {
 public:
  WitnessBuilder(const Graph& g, const std::vector<std::vector<std::size_t>>& rounds, const LabelTable& tab,
                 std::size_t left_size)
      : g_(g), rounds_(rounds), tab_(tab), left_size_(left_size) {}

  /// Appends the game from (s, t), which must lie in different final blocks.
  void play(std::size_t s, std::size_t t, std::vector<WitnessStep>& out) const {
    for (;;) {
      std::size_t k = 0;
      while (rounds_[k][s] == rounds_[k][t]) ++k;
      if (k == 0) {
        if (!g_.term[s]) std::swap(s, t);
        out.push_back(step(s, kTau, s, false, t, t, true));
        return;
      }
      const auto& prev = rounds_[k - 1];
      auto attack = find_attack(s, t, prev);
      if (!attack) {
        std::swap(s, t);
        attack = find_attack(s, t, prev);
      }
      auto [label, target] = *attack;
      std::optional<std::size_t> answer;
      for (const auto& [l, u] : g_.out[t])
        if (l == label) {
          answer = u;
          break;
        }
      out.push_back(step(s, label, target, answer.has_value(), t, answer.value_or(t), false));
      if (!answer) return;
      s = target;
      t = *answer;
    }
  }

  WitnessStep step(std::size_t from, int label, std::size_t to, bool matched, std::size_t dfrom, std::size_t dto,
                   bool termination) const {
    WitnessStep w;
    w.side = from < left_size_ ? WitnessStep::Side::left : WitnessStep::Side::right;
    w.label = tab_.labels[label];
    w.attacker_from = local(from);
    w.attacker_to = local(to);
    w.matched = matched;
    w.defender_from = local(dfrom);
    w.defender_to = local(dto);
    w.termination = termination;
    return w;
  }

 private:
  std::size_t local(std::size_t s) const { return s < left_size_ ? s : s - left_size_; }

  std::optional<Edge> find_attack(std::size_t s, std::size_t t, const std::vector<std::size_t>& prev) const {
    for (const auto& [l, u] : g_.out[s]) {
      bool matched = false;
      for (const auto& [l2, v] : g_.out[t])
        if (l2 == l && prev[v] == prev[u]) {
          matched = true;
          break;
        }
      if (!matched) return Edge{l, u};
    }
    return std::nullopt;
  }

  const Graph& g_;
  const std::vector<std::vector<std::size_t>>& rounds_;
  const LabelTable& tab_;
  std::size_t left_size_;
};

void require_complete(const Lts& a) {
  if (a.truncated) throw Error("cannot compare a truncated LTS; raise --max-states");
}

}  // namespace

BisimResult strong_bisim(const Lts& a, const Lts& b) {
  require_complete(a);
  require_complete(b);
  LabelTable tab;
  Graph g;
  append(g, a, tab);
  append(g, b, tab);
  auto rounds = refine(g);
  std::size_t p = a.initial, q = a.num_states + b.initial;
  BisimResult r;
  r.equivalent = rounds.back()[p] == rounds.back()[q];
  if (!r.equivalent) {
    std::vector<WitnessStep> w;
    WitnessBuilder(g, rounds, tab, a.num_states).play(p, q, w);
    r.witness = std::move(w);
  }
  return r;
}

BisimResult rooted_weak_bisim(const Lts& a, const Lts& b) {
  require_complete(a);
  require_complete(b);
  LabelTable tab;
  Graph g;
  append(g, a, tab);
  append(g, b, tab);
  Graph w = saturate(g);
  auto rounds = refine(w);
  const auto& blocks = rounds.back();
  std::size_t p = a.initial, q = a.num_states + b.initial;
  WitnessBuilder builder(w, rounds, tab, a.num_states);
  BisimResult r;
  if (blocks[p] != blocks[q]) {
    std::vector<WitnessStep> steps;
    builder.play(p, q, steps);
    r.witness = std::move(steps);
    return r;
  }
  // Root condition: an initial tau step must be answered by at least one tau.
  auto tau_plus = [&](std::size_t s) {
    std::set<std::size_t> out;
    for (const auto& [l, t] : g.out[s])
      if (l == kTau)
        for (std::size_t u : tau_closure(g, t)) out.insert(u);
    return out;
  };
  for (auto [s, t] : {std::pair{p, q}, std::pair{q, p}}) {
    auto answers = tau_plus(t);
    for (const auto& [l, s2] : g.out[s]) {
      if (l != kTau) continue;
      bool ok = false;
      for (std::size_t t2 : answers)
        if (blocks[t2] == blocks[s2]) ok = true;
      if (ok) continue;
      std::vector<WitnessStep> steps;
      bool matched = !answers.empty();
      std::size_t t2 = matched ? *answers.begin() : t;
      steps.push_back(builder.step(s, kTau, s2, matched, t, t2, false));
      steps.back().root = true;
      if (matched) builder.play(s2, t2, steps);
      r.witness = std::move(steps);
      return r;
    }
  }
  r.equivalent = true;
  return r;
}

BisimResult check_bisim(const Lts& a, const Lts& b, BisimKind kind) {
  return kind == BisimKind::strong ? strong_bisim(a, b) : rooted_weak_bisim(a, b);
}

Lts tau_saturate(const Lts& a) {
  LabelTable tab;
  Graph g = from_lts(a, tab);
  Lts out = to_lts(saturate(g), tab, a.initial);
  out.truncated = a.truncated;
  return out;
}

Lts minimize(const Lts& a, MinimizeKind kind) {
  require_complete(a);
  LabelTable tab;
  Graph g = from_lts(a, tab);
  auto rounds = refine(kind == MinimizeKind::strong ? g : saturate(g));
  const auto& blocks = rounds.back();
  // Renumber blocks by first state so the quotient is deterministic.
  std::vector<std::size_t> id(a.num_states, SIZE_MAX);
  std::vector<std::size_t> rep;
  std::unordered_map<std::size_t, std::size_t> seen;
  for (std::size_t s = 0; s < a.num_states; ++s) {
    auto [it, fresh] = seen.emplace(blocks[s], rep.size());
    if (fresh) rep.push_back(s);
    id[s] = it->second;
  }
  Lts out;
  for (std::size_t b = 0; b < rep.size(); ++b) {
    bool term = false;
    for (std::size_t s = 0; s < a.num_states; ++s)
      if (id[s] == b && g.term[s]) term = true;
    out.add_state(term);
  }
  out.initial = a.num_states ? id[a.initial] : 0;
  std::set<std::tuple<std::size_t, int, std::size_t>> edges;
  for (std::size_t s = 0; s < g.n; ++s)
    for (const auto& [l, t] : g.out[s]) {
      if (kind == MinimizeKind::weak && l == kTau && id[s] == id[t]) continue;
      edges.emplace(id[s], l, id[t]);
    }
  for (const auto& [f, l, t] : edges) out.add_transition(f, tab.labels[l], t);
  return out;
}

bool replay_witness(const Lts& a, const Lts& b, const std::vector<WitnessStep>& witness, BisimKind kind) {
  if (witness.empty()) return false;
  LabelTable tab;
  Graph ga = from_lts(a, tab), gb = from_lts(b, tab);
  Graph sa = kind == BisimKind::strong ? ga : saturate(ga);
  Graph sb = kind == BisimKind::strong ? gb : saturate(gb);
  std::size_t pa = a.initial, pb = b.initial;
  for (std::size_t i = 0; i < witness.size(); ++i) {
    const WitnessStep& w = witness[i];
    bool left = w.side == WitnessStep::Side::left;
    const Graph& att = left ? sa : sb;
    const Graph& def = left ? sb : sa;
    const Graph& def_strong = left ? gb : ga;
    std::size_t& pos_att = left ? pa : pb;
    std::size_t& pos_def = left ? pb : pa;
    if (w.attacker_from != pos_att || w.defender_from != pos_def) return false;
    bool last = i + 1 == witness.size();
    if (w.termination) return last && att.term[pos_att] && !def.term[pos_def];
    int l = tab.intern(w.label);
    const Graph& att_moves = w.root ? (left ? ga : gb) : att;
    bool has_attack = std::find(att_moves.out[pos_att].begin(), att_moves.out[pos_att].end(),
                                Edge{l, w.attacker_to}) != att_moves.out[pos_att].end();
    if (!has_attack) return false;
    // Answers available to the defender; at the root of a rooted-weak game a
    // tau must be answered by at least one tau.
    std::set<std::size_t> answers;
    if (w.root) {
      if (kind != BisimKind::rooted_weak || i != 0 || !w.label.tau) return false;
      for (const auto& [l2, t] : def_strong.out[pos_def])
        if (l2 == kTau)
          for (std::size_t u : tau_closure(def_strong, t)) answers.insert(u);
    } else {
      for (const auto& [l2, t] : def.out[pos_def])
        if (l2 == l) answers.insert(t);
    }
    if (!w.matched) return last && answers.empty();
    if (last || !answers.count(w.defender_to)) return false;
    pos_att = w.attacker_to;
    pos_def = w.defender_to;
  }
  return false;
}

std::string format_witness(const std::vector<WitnessStep>& witness) {
  std::string out;
  for (const auto& w : witness) {
    std::string side = w.side == WitnessStep::Side::left ? "left" : "right";
    std::string other = w.side == WitnessStep::Side::left ? "right" : "left";
    if (w.termination) {
      out += side + "  terminates  (" + other + " cannot terminate)\n";
      continue;
    }
    out += side + "  " + w.label.to_string();
    out += w.matched ? "\n" : "  (" + other + " cannot match)\n";
  }
  return out;
}

}  // namespace psf
