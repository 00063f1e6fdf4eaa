#include "psf/process.hpp"

#include <algorithm>
#include <functional>

namespace psf {

bool AtomSetDef::contains(const ActionLabel& label) const {
  if (label.tau) return false;
  for (const auto& m : members)
    if (match_action(m, quantifiers, label)) return true;
  return false;
}

bool operator==(const AtomSetDef& a, const AtomSetDef& b) {
  if (a.name != b.name || a.quantifiers != b.quantifiers || a.members.size() != b.members.size()) return false;
  for (std::size_t i = 0; i < a.members.size(); ++i)
    if (!(a.members[i] == b.members[i])) return false;
  return true;
}

std::string to_string(const AtomSetDef& s) {
  std::string out = "{";
  for (std::size_t i = 0; i < s.members.size(); ++i) {
    out += i ? ", " : " ";
    out += to_string(s.members[i]);
  }
  if (!s.quantifiers.empty()) {
    out += " |";
    for (std::size_t i = 0; i < s.quantifiers.size(); ++i) {
      out += i ? ", " : " ";
      out += s.quantifiers[i].var + " in " + s.quantifiers[i].sort;
    }
  }
  return out + " }";
}

namespace {

using Kind = Proc::Kind;

// Binding strength used by the printer: choice/merge < sequence < star < primary.
int level(const Proc& p) {
  switch (p.kind) {
    case Kind::alt:
    case Kind::par:
      return 1;
    case Kind::seq:
      return 2;
    case Kind::star:
      return 3;
    default:
      return 4;
  }
}

std::string print(const ProcPtr& p);

std::string wrap(const ProcPtr& p, int min_level) {
  if (level(*p) < min_level) return "(" + print(p) + ")";
  return print(p);
}

std::string set_text(const Proc& p) { return p.set_ref.empty() && p.set ? to_string(*p.set) : p.set_ref; }

std::string print(const ProcPtr& pp) {
  const Proc& p = *pp;
  switch (p.kind) {
    case Kind::atom:
    case Kind::inst:
    case Kind::name:
      return p.name + to_string(p.args);
    case Kind::delta:
      return "delta";
    case Kind::skip:
      return "skip";
    case Kind::done:
      return "done";
    case Kind::alt:
      return wrap(p.left, 1) + " + " + wrap(p.right, 2);
    case Kind::par:
      return wrap(p.left, 1) + " || " + wrap(p.right, 2);
    case Kind::seq:
      return wrap(p.left, 3) + " . " + wrap(p.right, 2);
    case Kind::star:
      return wrap(p.left, 4) + " * " + wrap(p.right, 3);
    case Kind::sum:
      return "sum(" + p.name + " in " + p.sort + ", " + print(p.left) + ")";
    case Kind::encaps:
      return "encaps(" + set_text(p) + ", " + print(p.left) + ")";
    case Kind::hide:
      return "hide(" + set_text(p) + ", " + print(p.left) + ")";
    case Kind::disrupt:
      return "disrupt(" + print(p.left) + ", " + print(p.right) + ")";
    case Kind::scope:
      return "[" + p.name + to_string(p.args) + ": " + print(p.left) + "]";
  }
  return {};
}

std::size_t mix(std::size_t h, std::size_t v) { return h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)); }

ProcPtr finish(std::shared_ptr<Proc> p) {
  p->ground = is_ground(p->args) && (!p->left || p->left->ground) && (!p->right || p->right->ground);
  if (p->kind == Kind::sum) p->ground = false;  // conservative: the body may mention the binder
  p->symbolic = (p->left && p->left->symbolic) || (p->right && p->right->symbolic);
  for (const auto& a : p->args) p->symbolic = p->symbolic || a->symbolic;
  switch (p->kind) {
    case Kind::inst:
      p->settled = false;
      break;
    case Kind::par:
    case Kind::disrupt:
      p->settled = p->left->settled && p->right->settled;
      break;
    case Kind::encaps:
    case Kind::hide:
    case Kind::scope:
      p->settled = p->left->settled;
      break;
    default:
      p->settled = true;
  }
  std::hash<std::string> hs;
  std::size_t h = mix(static_cast<std::size_t>(p->kind) + 1, hs(p->name));
  h = mix(h, hs(p->sort));
  for (const auto& a : p->args) h = mix(h, a->hash);
  if (p->left) h = mix(h, p->left->hash);
  if (p->right) h = mix(h, p->right->hash);
  if (p->set) {
    h = mix(h, hs(p->set_ref));
    // Inline sets: a cheap digest that is consistent with structural equality.
    if (p->set_ref.empty())
      for (const auto& m : p->set->members) h = mix(h, hs(m.name) + m.args.size());
  }
  p->hash = h;
  return p;
}

ProcPtr leaf(Kind k, std::string name, std::vector<TermPtr> args) {
  auto p = std::make_shared<Proc>();
  p->kind = k;
  p->name = std::move(name);
  p->args = std::move(args);
  return finish(p);
}

ProcPtr binary(Kind k, ProcPtr l, ProcPtr r) {
  auto p = std::make_shared<Proc>();
  p->kind = k;
  p->left = std::move(l);
  p->right = std::move(r);
  return finish(p);
}

ProcPtr set_op(Kind k, std::string set_ref, AtomSetPtr set, ProcPtr body) {
  auto p = std::make_shared<Proc>();
  p->kind = k;
  p->set_ref = std::move(set_ref);
  p->set = std::move(set);
  p->left = std::move(body);
  return finish(p);
}

}  // namespace

ProcPtr p_atom(std::string name, std::vector<TermPtr> args) { return leaf(Kind::atom, std::move(name), std::move(args)); }
ProcPtr p_inst(std::string name, std::vector<TermPtr> args) { return leaf(Kind::inst, std::move(name), std::move(args)); }
ProcPtr p_name(std::string name, std::vector<TermPtr> args) { return leaf(Kind::name, std::move(name), std::move(args)); }

ProcPtr p_delta() {
  static const ProcPtr d = leaf(Kind::delta, {}, {});
  return d;
}
ProcPtr p_skip() {
  static const ProcPtr s = leaf(Kind::skip, {}, {});
  return s;
}
ProcPtr p_done() {
  static const ProcPtr e = leaf(Kind::done, {}, {});
  return e;
}

ProcPtr p_alt(ProcPtr l, ProcPtr r) { return binary(Kind::alt, std::move(l), std::move(r)); }
ProcPtr p_seq(ProcPtr l, ProcPtr r) { return binary(Kind::seq, std::move(l), std::move(r)); }
ProcPtr p_par(ProcPtr l, ProcPtr r) { return binary(Kind::par, std::move(l), std::move(r)); }
ProcPtr p_disrupt(ProcPtr body, ProcPtr disruptor) { return binary(Kind::disrupt, std::move(body), std::move(disruptor)); }
ProcPtr p_star(ProcPtr body, ProcPtr exit) { return binary(Kind::star, std::move(body), std::move(exit)); }

ProcPtr p_sum(std::string var, std::string sort, ProcPtr body) {
  auto p = std::make_shared<Proc>();
  p->kind = Kind::sum;
  p->name = std::move(var);
  p->sort = std::move(sort);
  p->left = std::move(body);
  return finish(p);
}

ProcPtr p_encaps(std::string set_ref, AtomSetPtr set, ProcPtr body) {
  return set_op(Kind::encaps, std::move(set_ref), std::move(set), std::move(body));
}
ProcPtr p_hide(std::string set_ref, AtomSetPtr set, ProcPtr body) {
  return set_op(Kind::hide, std::move(set_ref), std::move(set), std::move(body));
}

ProcPtr p_scope(std::string name, std::vector<TermPtr> args, ProcPtr body) {
  auto p = std::make_shared<Proc>();
  p->kind = Kind::scope;
  p->name = std::move(name);
  p->args = std::move(args);
  p->left = std::move(body);
  return finish(p);
}

std::string to_string(const ProcPtr& p) { return print(p); }

bool equal(const ProcPtr& a, const ProcPtr& b) {
  if (a == b) return true;
  if (a->hash != b->hash || a->kind != b->kind || a->name != b->name || a->sort != b->sort) return false;
  if (!psf::equal(a->args, b->args)) return false;
  if (a->set != b->set) {
    if (!a->set || !b->set || a->set_ref != b->set_ref) return false;
    if (a->set_ref.empty() && !(*a->set == *b->set)) return false;
  }
  if ((a->left == nullptr) != (b->left == nullptr) || (a->right == nullptr) != (b->right == nullptr)) return false;
  if (a->left && !equal(a->left, b->left)) return false;
  if (a->right && !equal(a->right, b->right)) return false;
  return true;
}

bool is_structural(Proc::Kind k) {
  return k == Kind::par || k == Kind::encaps || k == Kind::hide || k == Kind::scope || k == Kind::disrupt;
}

ProcPtr rebuild(const ProcPtr& p, ProcPtr left, ProcPtr right) {
  if (left == p->left && right == p->right) return p;
  auto q = std::make_shared<Proc>(*p);
  q->left = std::move(left);
  q->right = std::move(right);
  return finish(q);
}

ProcPtr rebuild_args(const ProcPtr& p, std::vector<TermPtr> args) {
  auto q = std::make_shared<Proc>(*p);
  q->args = std::move(args);
  return finish(q);
}

ProcPtr substitute(const ProcPtr& p, const Binding& b) {
  if (b.empty()) return p;
  if (p->ground && p->kind != Kind::sum) return p;
  switch (p->kind) {
    case Kind::atom:
    case Kind::inst:
    case Kind::name:
    case Kind::scope: {
      auto args = substitute(p->args, b);
      ProcPtr body = p->left ? substitute(p->left, b) : nullptr;
      bool same = body == p->left;
      for (std::size_t i = 0; same && i < args.size(); ++i) same = args[i] == p->args[i];
      if (same) return p;
      auto q = std::make_shared<Proc>(*p);
      q->args = std::move(args);
      q->left = std::move(body);
      return finish(q);
    }
    case Kind::sum: {
      if (b.count(p->name)) {
        Binding inner = b;
        inner.erase(p->name);
        return rebuild(p, substitute(p->left, inner), nullptr);
      }
      return rebuild(p, substitute(p->left, b), nullptr);
    }
    default:
      return rebuild(p, p->left ? substitute(p->left, b) : nullptr, p->right ? substitute(p->right, b) : nullptr);
  }
}

void collect_alternatives(const ProcPtr& p, std::vector<ProcPtr>& out) {
  if (p->kind == Kind::alt) {
    collect_alternatives(p->left, out);
    collect_alternatives(p->right, out);
  } else {
    out.push_back(p);
  }
}

ProcPtr canonicalize(const ProcPtr& p) {
  if (p->kind == Kind::alt) {
    std::vector<ProcPtr> alts;
    collect_alternatives(p, alts);
    for (auto& a : alts) a = canonicalize(a);
    std::vector<std::pair<std::string, ProcPtr>> keyed;
    for (auto& a : alts) keyed.emplace_back(to_string(a), a);
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    keyed.erase(std::unique(keyed.begin(), keyed.end(), [](const auto& x, const auto& y) { return x.first == y.first; }),
                keyed.end());
    alts.clear();
    for (auto& [k, a] : keyed) alts.push_back(a);
    ProcPtr acc = alts[0];
    for (std::size_t i = 1; i < alts.size(); ++i) acc = p_alt(acc, alts[i]);
    return equal(acc, p) ? p : acc;
  }
  if (p->kind == Kind::seq && p->left->kind == Kind::seq) {
    // (x . y) . z  =>  x . (y . z)
    return canonicalize(p_seq(p->left->left, p_seq(p->left->right, p->right)));
  }
  ProcPtr l = p->left ? canonicalize(p->left) : nullptr;
  ProcPtr r = p->right ? canonicalize(p->right) : nullptr;
  return rebuild(p, l, r);
}

}  // namespace psf
