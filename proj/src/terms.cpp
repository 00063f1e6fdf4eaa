#include "psf/terms.hpp"

#include "psf/diagnostics.hpp"

#include <functional>

namespace psf {

namespace {

std::size_t mix(std::size_t h, std::size_t v) { return h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)); }

std::size_t hash_term(const Term& t) {
  std::size_t h = mix(std::hash<std::string>{}(t.name), static_cast<std::size_t>(t.kind));
  h = mix(h, std::hash<std::string>{}(t.sort));
  for (const auto& a : t.args) h = mix(h, a->hash);
  return h;
}

bool all_ground(const std::vector<TermPtr>& ts) {
  for (const auto& t : ts)
    if (!t->ground) return false;
  return true;
}

}  // namespace

TermPtr make_var(std::string name, std::string sort) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::var;
  t->name = std::move(name);
  t->sort = std::move(sort);
  t->ground = false;
  t->symbolic = is_symbolic_name(t->name);
  t->hash = hash_term(*t);
  return t;
}

TermPtr make_app(std::string name, std::vector<TermPtr> args, std::string sort) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::app;
  t->name = std::move(name);
  t->sort = std::move(sort);
  t->ground = all_ground(args);
  for (const auto& a : args) t->symbolic = t->symbolic || a->symbolic;
  t->args = std::move(args);
  t->hash = hash_term(*t);
  return t;
}

TermPtr make_lit(long long value, std::string sort) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::lit;
  t->value = value;
  t->name = std::to_string(value);
  t->sort = std::move(sort);
  t->hash = hash_term(*t);
  return t;
}

bool is_ground(const std::vector<TermPtr>& ts) { return all_ground(ts); }

bool equal(const TermPtr& a, const TermPtr& b) {
  if (a == b) return true;
  if (a->hash != b->hash) return false;
  if (a->kind != b->kind || a->name != b->name || a->sort != b->sort) return false;
  if (a->kind == Term::Kind::lit) return a->value == b->value;
  return equal(a->args, b->args);
}

bool equal(const std::vector<TermPtr>& a, const std::vector<TermPtr>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!equal(a[i], b[i])) return false;
  return true;
}

std::string to_string(const TermPtr& t) {
  if (t->kind != Term::Kind::app || t->args.empty()) return t->name;
  if (t->name == kChannelOp && t->args.size() == 2) {
    // Left operand gets parentheses when it is itself a pairing; ">>" parses left-associative.
    std::string lhs = to_string(t->args[0]);
    std::string rhs = to_string(t->args[1]);
    if (t->args[1]->kind == Term::Kind::app && t->args[1]->name == kChannelOp) rhs = "(" + rhs + ")";
    return lhs + " >> " + rhs;
  }
  return t->name + to_string(t->args);
}

std::string to_string(const std::vector<TermPtr>& args) {
  if (args.empty()) return {};
  std::string out = "(";
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ", ";
    out += to_string(args[i]);
  }
  return out + ")";
}

TermPtr substitute(const TermPtr& t, const Binding& b) {
  if (t->ground || b.empty()) return t;
  if (t->kind == Term::Kind::var) {
    auto it = b.find(t->name);
    if (it == b.end()) return t;
    const TermPtr& r = it->second;
    if (!t->sort.empty() && !r->sort.empty() && t->sort != r->sort)
      throw Error("sort mismatch: variable " + t->name + " : " + t->sort + " bound to " + to_string(r) +
                  " : " + r->sort);
    return r;
  }
  bool changed = false;
  std::vector<TermPtr> args;
  args.reserve(t->args.size());
  for (const auto& a : t->args) {
    args.push_back(substitute(a, b));
    changed = changed || args.back() != a;
  }
  if (!changed) return t;
  return make_app(t->name, std::move(args), t->sort);
}

std::vector<TermPtr> substitute(const std::vector<TermPtr>& ts, const Binding& b) {
  std::vector<TermPtr> out;
  out.reserve(ts.size());
  for (const auto& t : ts) out.push_back(substitute(t, b));
  return out;
}

void collect_vars(const TermPtr& t, std::vector<std::string>& out) {
  if (t->ground) return;
  if (t->kind == Term::Kind::var) {
    for (const auto& n : out)
      if (n == t->name) return;
    out.push_back(t->name);
    return;
  }
  for (const auto& a : t->args) collect_vars(a, out);
}

bool operator==(const AtomPattern& a, const AtomPattern& b) { return a.name == b.name && equal(a.args, b.args); }

std::string to_string(const AtomPattern& p) { return p.name + to_string(p.args); }

std::string ActionLabel::to_string() const {
  if (tau) return "tau";
  return atom + psf::to_string(args);
}

bool operator==(const ActionLabel& a, const ActionLabel& b) {
  if (a.tau || b.tau) return a.tau == b.tau;
  return a.atom == b.atom && equal(a.args, b.args);
}

bool match_term(const TermPtr& pattern, const TermPtr& t, Binding& b) {
  switch (pattern->kind) {
    case Term::Kind::var: {
      if (!pattern->sort.empty() && !t->sort.empty() && pattern->sort != t->sort) return false;
      auto it = b.find(pattern->name);
      if (it != b.end()) return equal(it->second, t);
      b.emplace(pattern->name, t);
      return true;
    }
    case Term::Kind::lit:
      return t->kind == Term::Kind::lit && t->value == pattern->value;
    case Term::Kind::app:
      if (t->kind != Term::Kind::app || t->name != pattern->name || t->args.size() != pattern->args.size())
        return false;
      for (std::size_t i = 0; i < t->args.size(); ++i)
        if (!match_term(pattern->args[i], t->args[i], b)) return false;
      return true;
  }
  return false;
}

std::optional<Binding> match_action(const AtomPattern& pattern, const std::vector<Binder>& quantifiers,
                                    const ActionLabel& label) {
  if (label.tau || label.atom != pattern.name || label.args.size() != pattern.args.size()) return std::nullopt;
  Binding b;
  for (std::size_t i = 0; i < label.args.size(); ++i)
    if (!match_term(pattern.args[i], label.args[i], b)) return std::nullopt;
  for (const auto& q : quantifiers) {
    auto it = b.find(q.var);
    if (it != b.end() && !q.sort.empty() && !it->second->sort.empty() && q.sort != it->second->sort)
      return std::nullopt;
  }
  return b;
}

namespace {

TermPtr walk(TermPtr t, const Binding& b) {
  while (t->kind == Term::Kind::var) {
    auto it = b.find(t->name);
    if (it == b.end()) break;
    t = it->second;
  }
  return t;
}

bool occurs(const std::string& v, const TermPtr& t, const Binding& b) {
  TermPtr w = walk(t, b);
  if (w->kind == Term::Kind::var) return w->name == v;
  for (const auto& a : w->args)
    if (occurs(v, a, b)) return true;
  return false;
}

bool unify_one(const TermPtr& x, const TermPtr& y, Binding& b) {
  TermPtr a = walk(x, b);
  TermPtr c = walk(y, b);
  if (a->kind == Term::Kind::var && c->kind == Term::Kind::var && a->name == c->name) return true;
  if (a->kind == Term::Kind::var || c->kind == Term::Kind::var) {
    const TermPtr& v = a->kind == Term::Kind::var ? a : c;
    const TermPtr& o = a->kind == Term::Kind::var ? c : a;
    if (!v->sort.empty() && !o->sort.empty() && v->sort != o->sort) return false;
    if (occurs(v->name, o, b)) return false;
    b[v->name] = o;
    return true;
  }
  if (a->kind != c->kind) return false;
  if (a->kind == Term::Kind::lit) return a->value == c->value;
  if (a->name != c->name || a->args.size() != c->args.size()) return false;
  for (std::size_t i = 0; i < a->args.size(); ++i)
    if (!unify_one(a->args[i], c->args[i], b)) return false;
  return true;
}

}  // namespace

std::optional<Binding> unify(const std::vector<std::pair<TermPtr, TermPtr>>& equations, Binding seed) {
  for (const auto& [x, y] : equations)
    if (!unify_one(x, y, seed)) return std::nullopt;
  return seed;
}

TermPtr resolve(const TermPtr& t, const Binding& b) {
  if (t->ground) return t;
  TermPtr w = walk(t, b);
  if (w->kind == Term::Kind::var || w->ground) return w;
  std::vector<TermPtr> args;
  args.reserve(w->args.size());
  for (const auto& a : w->args) args.push_back(resolve(a, b));
  return make_app(w->name, std::move(args), w->sort);
}

}  // namespace psf
