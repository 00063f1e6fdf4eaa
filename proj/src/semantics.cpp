#include "psf/semantics.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_set>

namespace psf {

namespace {

using Kind = Proc::Kind;

constexpr std::size_t kCacheLimit = 400000;

std::string scoped(const std::string& scope, const std::string& path) {
  return path.empty() ? scope : scope + "/" + path;
}

const Term* find_symbolic(const TermPtr& t) {
  if (!t->symbolic) return nullptr;
  if (t->kind == Term::Kind::var) return t.get();
  for (const auto& a : t->args)
    if (const Term* v = find_symbolic(a)) return v;
  return nullptr;
}

const Term* find_symbolic(const std::vector<TermPtr>& ts) {
  for (const auto& t : ts)
    if (const Term* v = find_symbolic(t)) return v;
  return nullptr;
}

const Term* find_symbolic(const ProcPtr& p) {
  if (!p->symbolic) return nullptr;
  if (const Term* v = find_symbolic(p->args)) return v;
  if (p->left)
    if (const Term* v = find_symbolic(p->left)) return v;
  if (p->right)
    if (const Term* v = find_symbolic(p->right)) return v;
  return nullptr;
}

const Term* find_symbolic_named(const TermPtr& t, const std::string& name) {
  if (!t->symbolic) return nullptr;
  if (t->kind == Term::Kind::var) return t->name == name ? t.get() : nullptr;
  for (const auto& a : t->args)
    if (const Term* v = find_symbolic_named(a, name)) return v;
  return nullptr;
}

void symbolic_vars(const TermPtr& t, std::vector<std::string>& out) {
  if (!t->symbolic) return;
  if (t->kind == Term::Kind::var) {
    for (const auto& n : out)
      if (n == t->name) return;
    out.push_back(t->name);
    return;
  }
  for (const auto& a : t->args) symbolic_vars(a, out);
}

struct MoveKeyHash {
  std::size_t operator()(const std::pair<std::string, ProcPtr>& k) const {
    return std::hash<std::string>{}(k.first) ^ (k.second->hash * 31);
  }
};
struct MoveKeyEq {
  bool operator()(const std::pair<std::string, ProcPtr>& a, const std::pair<std::string, ProcPtr>& b) const {
    return a.first == b.first && equal(a.second, b.second);
  }
};

}  // namespace

Semantics::Semantics(const FlatSpec& spec, SemanticsOptions opts) : spec_(spec), opts_(opts) {}

Config Semantics::initial(const std::string& entry, const std::vector<TermPtr>& args) {
  const ProcessDef* def = spec_.find_def(entry);
  if (!def) throw Error("unknown process '" + entry + "'");
  if (def->formals.size() != args.size())
    throw Error("process '" + entry + "' expects " + std::to_string(def->formals.size()) + " argument(s), got " +
                std::to_string(args.size()));
  return initial(p_inst(entry, args));
}

Config Semantics::initial(const ProcPtr& expr) { return settle(expr, 0); }

Config Semantics::settle(const Config& c) { return settle(c, 0); }

void Semantics::clear_cache() {
  cache_.clear();
  unfold_cache_.clear();
}

ProcPtr Semantics::unfold(const ProcPtr& inst, int depth) {
  if (depth > opts_.unfold_budget) throw Error("unguarded recursion in process '" + inst->name + "'");
  auto it = unfold_cache_.find(inst.get());
  if (it != unfold_cache_.end()) return it->second.second;
  const ProcessDef* def = spec_.find_def(inst->name);
  if (!def) throw Error("process '" + inst->name + "' has no defining equation");
  if (def->formals.size() != inst->args.size())
    throw Error("process '" + inst->name + "' expects " + std::to_string(def->formals.size()) + " argument(s)");
  Binding b;
  for (std::size_t i = 0; i < def->formals.size(); ++i) b[def->formals[i].var] = inst->args[i];
  ProcPtr body = substitute(def->body, b);
  if (unfold_cache_.size() > kCacheLimit) unfold_cache_.clear();
  unfold_cache_.emplace(inst.get(), std::make_pair(inst, body));
  return body;
}

ProcPtr Semantics::settle(const ProcPtr& p, int depth) {
  if (p->settled) return p;
  switch (p->kind) {
    case Kind::inst: {
      ProcPtr body = settle(unfold(p, depth), depth + 1);
      if (body->kind == Kind::scope) return body;  // P = Q: the innermost name wins
      return p_scope(p->name, p->args, body);
    }
    case Kind::scope: {
      ProcPtr body = settle(p->left, depth);
      if (body->kind == Kind::scope) return body;
      return rebuild(p, body, nullptr);
    }
    case Kind::encaps:
    case Kind::hide:
      return rebuild(p, settle(p->left, depth), nullptr);
    case Kind::par:
    case Kind::disrupt:
      return rebuild(p, settle(p->left, depth), settle(p->right, depth));
    default:
      return p;
  }
}

ProcPtr Semantics::mk_seq(const ProcPtr& l, const ProcPtr& r) { return l->kind == Kind::done ? r : p_seq(l, r); }

ProcPtr Semantics::mk_par(const ProcPtr& p, const ProcPtr& l, const ProcPtr& r) {
  if (l->kind == Kind::done) return r;
  if (r->kind == Kind::done) return l;
  return rebuild(p, settle(l, 0), settle(r, 0));
}

ProcPtr Semantics::mk_unary(const ProcPtr& p, const ProcPtr& body) {
  if (body->kind == Kind::done) return body;
  ProcPtr b = settle(body, 0);
  if (p->kind == Kind::scope && b->kind == Kind::scope) return b;
  return rebuild(p, b, nullptr);
}

ProcPtr Semantics::mk_disrupt(const ProcPtr& p, const ProcPtr& body) {
  if (body->kind == Kind::done) return body;
  return rebuild(p, settle(body, 0), p->right);
}

const std::vector<TermPtr>& Semantics::values_of(const std::string& sort) {
  auto it = values_.find(sort);
  if (it != values_.end()) return it->second;
  std::vector<TermPtr> vals;
  switch (classify_sort(spec_, sort)) {
    case SortClass::finite:
      vals = enumerate_sort(spec_, sort);
      finite_[sort] = true;
      break;
    case SortClass::recursive:
      vals = enumerate_sort(spec_, sort, opts_.depth_bound);
      finite_[sort] = true;
      break;
    case SortClass::open:
      finite_[sort] = false;
      break;
  }
  return values_.emplace(sort, std::move(vals)).first->second;
}

TermPtr Semantics::fresh(const std::string& var, const std::string& sort) {
  return make_var("?" + var + "#" + std::to_string(++fresh_counter_), sort);
}

Semantics::MoveList Semantics::derive(const ProcPtr& p, int depth) {
  auto hit = cache_.find(p.get());
  if (hit != cache_.end()) return hit->second.second;

  auto out = std::make_shared<std::vector<Move>>();
  auto leaf = [&](ActionLabel label) {
    Move m;
    m.label = std::move(label);
    m.target = p_done();
    if (opts_.track_participants) m.participants.push_back("");
    out->push_back(std::move(m));
  };

  switch (p->kind) {
    case Kind::atom:
      if (!p->ground && !p->symbolic)
        throw Error("atom " + to_string(p) + " has unbound variables");
      leaf(ActionLabel::act(p->name, p->args));
      break;
    case Kind::skip:
      leaf(ActionLabel::silent());
      break;
    case Kind::delta:
    case Kind::done:
      break;
    case Kind::name:
      throw Error("unresolved name '" + p->name + "'");
    case Kind::inst: {
      if (depth > opts_.unfold_budget) throw Error("unguarded recursion in process '" + p->name + "'");
      auto sub = derive(unfold(p, depth), depth + 1);
      *out = *sub;
      break;
    }
    case Kind::alt: {
      auto l = derive(p->left, depth);
      auto r = derive(p->right, depth);
      out->insert(out->end(), l->begin(), l->end());
      out->insert(out->end(), r->begin(), r->end());
      break;
    }
    case Kind::seq: {
      auto l = derive(p->left, depth);
      for (const auto& m : *l) {
        Move n = m;
        n.target = mk_seq(m.target, p->right);
        n.from_comm = false;
        out->push_back(std::move(n));
      }
      break;
    }
    case Kind::star: {
      auto l = derive(p->left, depth);
      for (const auto& m : *l) {
        Move n = m;
        n.target = mk_seq(m.target, p);
        n.from_comm = false;
        out->push_back(std::move(n));
      }
      auto r = derive(p->right, depth);
      for (const auto& m : *r) {
        Move n = m;
        n.from_comm = false;
        out->push_back(std::move(n));
      }
      break;
    }
    case Kind::sum: {
      const auto& vals = values_of(p->sort);
      if (finite_[p->sort]) {
        for (const auto& v : vals) {
          auto sub = derive(substitute(p->left, Binding{{p->name, v}}), depth);
          out->insert(out->end(), sub->begin(), sub->end());
        }
      } else {
        auto sub = derive(substitute(p->left, Binding{{p->name, fresh(p->name, p->sort)}}), depth);
        *out = *sub;
      }
      break;
    }
    case Kind::par: {
      auto l = derive(p->left, depth);
      auto r = derive(p->right, depth);
      for (const auto& m : *l) {
        Move n = m;
        n.target = mk_par(p, m.target, p->right);
        out->push_back(std::move(n));
      }
      for (const auto& m : *r) {
        Move n = m;
        n.target = mk_par(p, p->left, m.target);
        out->push_back(std::move(n));
      }
      for (const auto& x : *l) {
        if (x.label.tau || x.from_comm) continue;
        for (const auto& y0 : *r) {
          if (y0.label.tau || y0.from_comm) continue;
          const auto& rules = spec_.comms_for(x.label.atom, y0.label.atom);
          if (rules.empty()) continue;
          // Keep placeholder variables of the two sides apart.
          Move y = y0;
          std::vector<std::string> xv, yv;
          for (const auto& a : x.label.args) symbolic_vars(a, xv);
          for (const auto& a : y.label.args) symbolic_vars(a, yv);
          Binding apart;
          for (const auto& v : yv)
            if (std::find(xv.begin(), xv.end(), v) != xv.end()) {
              const Term* t = nullptr;
              for (const auto& a : y.label.args)
                if (!t) t = find_symbolic_named(a, v);
              apart[v] = fresh("r", t ? t->sort : std::string());
            }
          if (!apart.empty()) {
            y.label.args = substitute(y.label.args, apart);
            y.target = substitute(y.target, apart);
          }
          for (const CommRule* rule : rules) {
            auto attempt = [&](const Move& ma, const Move& mb) {
              if (rule->a.name != ma.label.atom || rule->b.name != mb.label.atom) return;
              if (rule->a.args.size() != ma.label.args.size() || rule->b.args.size() != mb.label.args.size()) return;
              std::vector<std::pair<TermPtr, TermPtr>> eqs;
              for (std::size_t i = 0; i < ma.label.args.size(); ++i) eqs.emplace_back(rule->a.args[i], ma.label.args[i]);
              for (std::size_t i = 0; i < mb.label.args.size(); ++i) eqs.emplace_back(rule->b.args[i], mb.label.args[i]);
              auto theta = unify(eqs);
              if (!theta) return;
              std::vector<TermPtr> args;
              for (const auto& a : rule->result.args) args.push_back(resolve(a, *theta));
              Binding placeholders;
              for (const auto& [k, v] : *theta)
                if (is_symbolic_name(k)) placeholders[k] = resolve(v, *theta);
              Move n;
              n.label = ActionLabel::act(rule->result.name, std::move(args));
              n.target = mk_par(p, substitute(x.target, placeholders), substitute(y.target, placeholders));
              n.from_comm = true;
              n.participants = x.participants;
              n.participants.insert(n.participants.end(), y.participants.begin(), y.participants.end());
              out->push_back(std::move(n));
            };
            attempt(x, y);
            attempt(y, x);
          }
        }
      }
      break;
    }
    case Kind::encaps: {
      auto sub = derive(p->left, depth);
      for (const auto& m : *sub) {
        if (!m.label.tau && p->set->contains(m.label)) continue;
        Move n = m;
        n.target = mk_unary(p, m.target);
        out->push_back(std::move(n));
      }
      break;
    }
    case Kind::hide: {
      auto sub = derive(p->left, depth);
      for (const auto& m : *sub) {
        Move n = m;
        if (!m.label.tau && p->set->contains(m.label)) n.label = ActionLabel::silent();
        n.target = mk_unary(p, m.target);
        out->push_back(std::move(n));
      }
      break;
    }
    case Kind::scope: {
      auto sub = derive(p->left, depth);
      for (const auto& m : *sub) {
        Move n = m;
        n.target = mk_unary(p, m.target);
        for (auto& path : n.participants) path = scoped(p->name + to_string(p->args), path);
        out->push_back(std::move(n));
      }
      break;
    }
    case Kind::disrupt: {
      auto l = derive(p->left, depth);
      for (const auto& m : *l) {
        Move n = m;
        n.target = mk_disrupt(p, m.target);
        out->push_back(std::move(n));
      }
      auto r = derive(p->right, depth);
      for (const auto& m : *r) {
        Move n = m;
        n.from_comm = false;
        out->push_back(std::move(n));
      }
      break;
    }
  }

  if (cache_.size() > kCacheLimit) cache_.clear();
  MoveList result = out;
  cache_.emplace(p.get(), std::make_pair(p, result));
  return result;
}

std::vector<Move> Semantics::moves(const Config& c) {
  auto raw = derive(c, 0);
  std::vector<Move> out;
  out.reserve(raw->size());
  std::unordered_set<std::pair<std::string, ProcPtr>, MoveKeyHash, MoveKeyEq> seen;
  for (const auto& m : *raw) {
    Move n = m;
    n.target = settle(m.target, 0);
    if (!seen.emplace(n.label.to_string(), n.target).second) continue;
    out.push_back(std::move(n));
  }
  return out;
}

std::vector<std::pair<ActionLabel, Config>> Semantics::step(const Config& c) {
  std::vector<std::pair<ActionLabel, Config>> out;
  for (auto& m : moves(c)) {
    const Term* v = find_symbolic(m.label.args);
    if (!v) v = find_symbolic(m.target);
    if (v) {
      std::string var = v->name.substr(1, v->name.find('#') - 1);
      throw Error("sum over infinite sort " + v->sort + " (variable " + var + "): action " +
                  m.label.to_string() + " needs a value and no communication partner supplies one");
    }
    out.emplace_back(std::move(m.label), std::move(m.target));
  }
  return out;
}

std::vector<std::pair<ActionLabel, Config>> step(const FlatSpec& spec, const Config& c) {
  Semantics sem(spec);
  return sem.step(sem.settle(c));
}

// ---------------------------------------------------------------------------
// LTS

std::size_t Lts::add_state(bool terminates) {
  terminating.push_back(terminates);
  return num_states++;
}

void Lts::add_transition(std::size_t from, ActionLabel label, std::size_t to) {
  transitions.push_back(Transition{from, std::move(label), to});
}

namespace {

Lts explore(Semantics& sem, const Config& init, std::size_t max_states) {
  Lts lts;
  std::unordered_map<Config, std::size_t, ProcHash, ProcEq> ids;
  auto intern = [&](const Config& c) -> std::optional<std::size_t> {
    auto it = ids.find(c);
    if (it != ids.end()) return it->second;
    if (lts.num_states >= max_states) {
      lts.truncated = true;
      return std::nullopt;
    }
    std::size_t id = lts.add_state(is_terminated(c));
    lts.states.push_back(c);
    ids.emplace(c, id);
    return id;
  };
  lts.initial = *intern(init);
  for (std::size_t i = 0; i < lts.num_states; ++i) {
    Config c = lts.states[i];
    for (auto& [label, target] : sem.step(c)) {
      auto to = intern(target);
      if (to) lts.add_transition(i, std::move(label), *to);
    }
  }
  return lts;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out;
}

}  // namespace

Lts build_lts(const FlatSpec& spec, const std::string& entry, const std::vector<TermPtr>& args,
              std::size_t max_states, SemanticsOptions opts) {
  Semantics sem(spec, opts);
  return explore(sem, sem.initial(entry, args), max_states);
}

Lts build_lts(const FlatSpec& spec, const ProcPtr& expr, std::size_t max_states, SemanticsOptions opts) {
  Semantics sem(spec, opts);
  return explore(sem, sem.initial(expr), max_states);
}

void write_aut(std::ostream& os, const Lts& lts) {
  os << "des (" << lts.initial << "," << lts.transitions.size() << "," << lts.num_states << ")\n";
  for (const auto& t : lts.transitions)
    os << "(" << t.from << ",\"" << escape(t.label.to_string()) << "\"," << t.to << ")\n";
}

std::string to_aut(const Lts& lts) {
  std::ostringstream os;
  write_aut(os, lts);
  return os.str();
}

}  // namespace psf
