#include "psf/linker.hpp"

#include <algorithm>
#include <functional>
#include <memory>
#include <set>
#include <sstream>

namespace psf {

// ---------------------------------------------------------------------------
// FlatSpec lookups

std::string to_string(const CommRule& c) {
  std::string out = to_string(c.a) + " | " + to_string(c.b) + " = " + to_string(c.result);
  for (std::size_t i = 0; i < c.quantifiers.size(); ++i)
    out += (i ? ", " : " for ") + c.quantifiers[i].var + " in " + c.quantifiers[i].sort;
  return out;
}

void FlatSpec::reindex() {
  def_index_.clear();
  proc_index_.clear();
  atom_index_.clear();
  ctor_index_.clear();
  ctors_by_sort_.clear();
  comm_index_.clear();
  for (std::size_t i = 0; i < defs.size(); ++i) def_index_.emplace(defs[i].name, i);
  for (std::size_t i = 0; i < processes.size(); ++i) proc_index_.emplace(processes[i].name, i);
  for (std::size_t i = 0; i < atoms.size(); ++i) atom_index_.emplace(std::make_pair(atoms[i].name, atoms[i].arg_sorts.size()), i);
  for (std::size_t i = 0; i < constructors.size(); ++i) {
    const auto& f = constructors[i];
    ctor_index_.emplace(std::make_pair(f.name, f.arg_sorts.size()), i);
    ctors_by_sort_[f.result_sort].push_back(&constructors[i]);
  }
  for (const auto& c : comms) {
    comm_index_[{c.a.name, c.b.name}].push_back(&c);
    if (c.a.name != c.b.name) comm_index_[{c.b.name, c.a.name}].push_back(&c);
  }
}

const ProcessDef* FlatSpec::find_def(const std::string& name) const {
  auto it = def_index_.find(name);
  return it == def_index_.end() ? nullptr : &defs[it->second];
}

const SigDecl* FlatSpec::find_process(const std::string& name) const {
  auto it = proc_index_.find(name);
  return it == proc_index_.end() ? nullptr : &processes[it->second];
}

const SigDecl* FlatSpec::find_atom(const std::string& name, std::size_t arity) const {
  auto it = atom_index_.find({name, arity});
  return it == atom_index_.end() ? nullptr : &atoms[it->second];
}

const FuncDecl* FlatSpec::find_constructor(const std::string& name, std::size_t arity) const {
  auto it = ctor_index_.find({name, arity});
  return it == ctor_index_.end() ? nullptr : &constructors[it->second];
}

AtomSetPtr FlatSpec::find_set(const std::string& name) const {
  for (const auto& s : sets)
    if (s->name == name) return s;
  return nullptr;
}

bool FlatSpec::has_sort(const std::string& s) const {
  return s == kNatSort || std::find(sorts.begin(), sorts.end(), s) != sorts.end();
}

const std::vector<const FuncDecl*>& FlatSpec::constructors_of(const std::string& s) const {
  static const std::vector<const FuncDecl*> none;
  auto it = ctors_by_sort_.find(s);
  return it == ctors_by_sort_.end() ? none : it->second;
}

bool FlatSpec::is_open_sort(const std::string& s) const { return s == kNatSort || constructors_of(s).empty(); }

const std::vector<const CommRule*>& FlatSpec::comms_for(const std::string& x, const std::string& y) const {
  static const std::vector<const CommRule*> none;
  auto it = comm_index_.find({x, y});
  return it == comm_index_.end() ? none : it->second;
}

// ---------------------------------------------------------------------------
// Linking

namespace {

struct Sym {
  std::string global;
  std::vector<std::string> args;
  std::string result;
};

bool operator==(const Sym& a, const Sym& b) { return a.global == b.global && a.args == b.args && a.result == b.result; }

using ArityKey = std::pair<std::string, std::size_t>;

struct Scope {
  std::map<std::string, std::vector<std::string>> sorts;
  std::map<ArityKey, std::vector<Sym>> funcs;
  std::map<ArityKey, std::vector<Sym>> atoms;
  std::map<std::string, std::vector<Sym>> procs;
  std::map<std::string, std::vector<std::string>> sets;

  template <class K, class V>
  static void add(std::map<K, std::vector<V>>& m, const K& k, const V& v) {
    auto& xs = m[k];
    if (std::find(xs.begin(), xs.end(), v) == xs.end()) xs.push_back(v);
  }

  void merge(const Scope& o) {
    for (const auto& [k, vs] : o.sorts)
      for (const auto& v : vs) add(sorts, k, v);
    for (const auto& [k, vs] : o.funcs)
      for (const auto& v : vs) add(funcs, k, v);
    for (const auto& [k, vs] : o.atoms)
      for (const auto& v : vs) add(atoms, k, v);
    for (const auto& [k, vs] : o.procs)
      for (const auto& v : vs) add(procs, k, v);
    for (const auto& [k, vs] : o.sets)
      for (const auto& v : vs) add(sets, k, v);
  }
};

struct Instance {
  std::string key;
  std::string fingerprint;
  const ModuleDef* mod = nullptr;
  Scope visible;
  Scope exported;
  std::map<std::string, std::string> own_procs;  // local process name -> global (own declarations only)
  std::set<std::string> formal_procs;            // parameter processes bound to actuals
};

// Short stable hash used to tell instances apart in suffixed names.
std::string fingerprint(const std::string& key) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : key) {
    h ^= c;
    h *= 16777619u;
  }
  std::ostringstream os;
  os << std::hex << (h & 0xffffu);
  return os.str();
}

struct ConflictRestart {
  std::string key, local, global;
};

class Linker {
 public:
  explicit Linker(const std::vector<ModuleDef>& mods) {
    for (const auto& m : mods) modules_[m.name] = &m;
  }

  FlatSpec run(const std::string& root) {
    if (!modules_.count(root)) throw Error("root module '" + root + "' not found");
    for (int round = 0; round < 256; ++round) {
      try {
        return attempt(root);
      } catch (const ConflictRestart& c) {
        overrides_[c.key][c.local] = c.global;
      }
    }
    throw Error("could not resolve name clashes between module instances");
  }

 private:
  std::map<std::string, const ModuleDef*> modules_;
  std::map<std::string, std::map<std::string, std::string>> overrides_;

  // Per attempt.
  std::map<std::string, std::unique_ptr<Instance>> instances_;
  std::vector<Instance*> order_;
  std::vector<std::string> stack_;
  FlatSpec out_;
  std::map<std::string, std::string> proc_owner_;  // global process -> instance key
  std::map<std::string, std::string> set_owner_;
  std::map<std::string, AtomSetPtr> set_table_;
  std::map<std::string, std::size_t> ctor_count_;

  FlatSpec attempt(const std::string& root) {
    instances_.clear();
    order_.clear();
    stack_.clear();
    out_ = FlatSpec{};
    out_.root_module = root;
    proc_owner_.clear();
    set_owner_.clear();
    set_table_.clear();
    ctor_count_.clear();

    instantiate(root, {}, {}, {}, true);
    for (const auto& f : out_.constructors) ++ctor_count_[f.result_sort];
    for (Instance* inst : order_) resolve_sets(*inst);
    for (Instance* inst : order_) resolve_comms(*inst);
    for (Instance* inst : order_) resolve_defs(*inst);
    out_.reindex();
    return std::move(out_);
  }

  // -- declarations ---------------------------------------------------------

  std::string sort_of(const Scope& sc, const std::string& s, const SourceLoc& loc) {
    if (s == kNatSort) return s;
    auto it = sc.sorts.find(s);
    if (it == sc.sorts.end()) throw Error(loc, "undeclared sort '" + s + "'");
    if (it->second.size() > 1) throw Error(loc, "ambiguous sort '" + s + "'");
    return it->second.front();
  }

  std::vector<std::string> sorts_of(const Scope& sc, const std::vector<std::string>& ss, const SourceLoc& loc) {
    std::vector<std::string> out;
    for (const auto& s : ss) out.push_back(sort_of(sc, s, loc));
    return out;
  }

  void add_sort(const std::string& g) {
    if (std::find(out_.sorts.begin(), out_.sorts.end(), g) == out_.sorts.end()) out_.sorts.push_back(g);
  }

  void add_constructor(const FuncDecl& f) {
    for (const auto& c : out_.constructors) {
      if (c.name == f.name && c.arg_sorts.size() == f.arg_sorts.size()) {
        if (c.arg_sorts != f.arg_sorts || c.result_sort != f.result_sort)
          throw Error(f.loc, "conflicting declarations of function '" + f.name + "'");
        return;
      }
    }
    out_.constructors.push_back(f);
  }

  void add_atom(const SigDecl& a) {
    for (const auto& x : out_.atoms) {
      if (x.name == a.name && x.arg_sorts.size() == a.arg_sorts.size()) {
        if (x.arg_sorts != a.arg_sorts) throw Error(a.loc, "conflicting declarations of atom '" + a.name + "'");
        return;
      }
    }
    out_.atoms.push_back(a);
  }

  void add_process(const SigDecl& p, const Instance& inst, const std::string& local) {
    for (const auto& x : out_.processes) {
      if (x.name != p.name) continue;
      if (x.arg_sorts != p.arg_sorts) throw ConflictRestart{inst.key, local, p.name + "@" + inst.fingerprint};
      return;
    }
    out_.processes.push_back(p);
  }

  std::string instance_key(const std::string& module, const std::vector<std::pair<ParamBinding, Instance*>>& bindings,
                           const NameMap& renamings) {
    std::string key = module;
    if (!bindings.empty() || !renamings.empty()) {
      key += "{";
      for (const auto& [b, x] : bindings) {
        key += b.section + "[";
        for (const auto& [f, a] : b.map) key += f + "->" + a + ",";
        key += "]to " + x->key + ";";
      }
      key += "ren[";
      for (const auto& [f, a] : renamings) key += f + "->" + a + ",";
      key += "]}";
    }
    return key;
  }

  static bool declares(const ModuleDef& m, const std::string& name) {
    for (const Signature* sig : {&m.exports, &m.local}) {
      for (const auto& f : sig->functions)
        if (f.name == name) return true;
      for (const auto& a : sig->atoms)
        if (a.name == name) return true;
      for (const auto& p : sig->processes)
        if (p.name == name) return true;
    }
    return false;
  }

  Instance& instantiate(const std::string& module, const std::vector<std::pair<ParamBinding, Instance*>>& bindings,
                        const NameMap& renamings, const SourceLoc& loc, bool is_root) {
    auto mit = modules_.find(module);
    if (mit == modules_.end()) throw Error(loc, "unknown module '" + module + "'");
    const ModuleDef& m = *mit->second;

    std::string key = instance_key(module, bindings, renamings);
    if (auto it = instances_.find(key); it != instances_.end()) return *it->second;

    if (std::find(stack_.begin(), stack_.end(), module) != stack_.end()) {
      std::string cycle;
      for (const auto& s : stack_) cycle += s + " -> ";
      throw Error(loc, "cyclic import: " + cycle + module);
    }
    stack_.push_back(module);

    auto inst = std::make_unique<Instance>();
    inst->key = key;
    inst->fingerprint = fingerprint(key);
    inst->mod = &m;
    const auto& ov = overrides_[key];

    // Imports first; their exports become visible here and are re-exported.
    for (const auto& ic : m.imports) {
      for (const auto& [from, to] : ic.renamings)
        if (from != to && declares(m, to))
          throw Error(ic.loc, "rename target collision: '" + to + "' is already declared in module '" + module + "'");
      std::vector<std::pair<ParamBinding, Instance*>> bound;
      for (const auto& b : ic.bindings) {
        Instance& x = instantiate(b.to_module, {}, {}, ic.loc, false);
        bound.emplace_back(b, &x);
        inst->visible.merge(x.exported);
        inst->exported.merge(x.exported);
      }
      Instance& child = instantiate(ic.module, bound, ic.renamings, ic.loc, false);
      inst->visible.merge(child.exported);
      inst->exported.merge(child.exported);
    }

    // Parameters: bound formals alias actuals; a root module keeps them as declarations.
    std::set<std::string> used_sections;
    for (const auto& sec : m.parameters) {
      const std::pair<ParamBinding, Instance*>* binding = nullptr;
      for (const auto& b : bindings)
        if (b.first.section == sec.name) binding = &b;
      if (!binding) {
        if (!is_root) throw Error(loc, "unbound parameter section '" + sec.name + "' of module '" + module + "'");
        declare_signature(*inst, sec.sig, false, {}, ov);
        continue;
      }
      used_sections.insert(sec.name);
      bind_section(*inst, sec, binding->first, *binding->second, loc);
    }
    for (const auto& b : bindings)
      if (!used_sections.count(b.first.section))
        throw Error(loc, "module '" + module + "' has no parameter section '" + b.first.section + "'");

    // Own declarations.
    std::set<std::string> exported_names;
    for (const auto& s : m.exports.sorts) exported_names.insert(s);
    for (const auto& f : m.exports.functions) exported_names.insert(f.name);
    for (const auto& a : m.exports.atoms) exported_names.insert(a.name);
    for (const auto& p : m.exports.processes) exported_names.insert(p.name);
    std::set<std::string> all_names = exported_names;
    for (const auto& s : m.local.sorts) all_names.insert(s);
    for (const auto& f : m.local.functions) all_names.insert(f.name);
    for (const auto& a : m.local.atoms) all_names.insert(a.name);
    for (const auto& p : m.local.processes) all_names.insert(p.name);
    std::map<std::string, std::string> ren;
    for (const auto& [from, to] : renamings) {
      if (!exported_names.count(from))
        throw Error(loc, "renaming of '" + from + "', which module '" + module + "' does not export");
      if (from != to && all_names.count(to))
        throw Error(loc, "rename target collision: '" + to + "' is already declared in module '" + module + "'");
      ren[from] = to;
    }
    declare_signature(*inst, m.exports, true, ren, ov);
    declare_signature(*inst, m.local, false, {}, ov);
    for (const auto& s : m.sets) {
      std::string g = ov.count(s.name) ? ov.at(s.name) : s.name;
      inst->visible.sets[s.name] = {g};
    }
    for (const auto& v : m.variables) sorts_of(inst->visible, {v.result_sort}, v.loc);

    stack_.pop_back();
    Instance& ref = *inst;
    instances_[key] = std::move(inst);
    order_.push_back(&ref);
    return ref;
  }

  void bind_section(Instance& inst, const ParamSection& sec, const ParamBinding& b, const Instance& x,
                    const SourceLoc& loc) {
    // Atoms exported by the actual are visible in the instance, so library
    // environments can synchronise with actions of the bound system.
    for (const auto& [k, vs] : x.exported.atoms)
      for (const auto& v : vs) Scope::add(inst.visible.atoms, k, v);
    std::map<std::string, std::string> map;
    for (const auto& [f, a] : b.map) {
      if (map.count(f)) throw Error(loc, "formal '" + f + "' bound twice");
      map[f] = a;
    }
    std::set<std::string> actuals;
    for (const auto& [f, a] : map)
      if (!actuals.insert(a).second) throw Error(loc, "binding of section '" + sec.name + "' is not injective");
    std::set<std::string> formals;
    auto actual_of = [&](const std::string& f) {
      formals.insert(f);
      auto it = map.find(f);
      if (it == map.end()) throw Error(loc, "unbound parameter '" + f + "' of section '" + sec.name + "'");
      return it->second;
    };
    for (const auto& s : sec.sig.sorts) {
      std::string a = actual_of(s);
      auto it = x.exported.sorts.find(a);
      if (it == x.exported.sorts.end())
        throw Error(loc, "binding to undeclared actual '" + a + "' (not exported by '" + b.to_module + "')");
      inst.visible.sorts[s] = it->second;
    }
    for (const auto& f : sec.sig.functions) {
      std::string a = actual_of(f.name);
      auto it = x.exported.funcs.find({a, f.arg_sorts.size()});
      if (it == x.exported.funcs.end() || it->second.size() != 1)
        throw Error(loc, "binding to undeclared actual '" + a + "' (not exported by '" + b.to_module + "')");
      Sym s = it->second.front();
      auto want_args = sorts_of(inst.visible, f.arg_sorts, f.loc);
      auto want_res = sort_of(inst.visible, f.result_sort, f.loc);
      if (s.args != want_args || s.result != want_res)
        throw Error(loc, "sort mismatch binding '" + f.name + "' to '" + a + "'");
      inst.visible.funcs[{f.name, f.arg_sorts.size()}] = {s};
    }
    for (const auto& at : sec.sig.atoms) {
      std::string a = actual_of(at.name);
      auto it = x.exported.atoms.find({a, at.arg_sorts.size()});
      if (it == x.exported.atoms.end() || it->second.size() != 1)
        throw Error(loc, "binding to undeclared actual '" + a + "' (not exported by '" + b.to_module + "')");
      if (it->second.front().args != sorts_of(inst.visible, at.arg_sorts, at.loc))
        throw Error(loc, "sort mismatch binding '" + at.name + "' to '" + a + "'");
      inst.visible.atoms[{at.name, at.arg_sorts.size()}] = {it->second.front()};
    }
    for (const auto& p : sec.sig.processes) {
      std::string a = actual_of(p.name);
      auto it = x.exported.procs.find(a);
      if (it == x.exported.procs.end() || it->second.size() != 1)
        throw Error(loc, "binding to undeclared actual '" + a + "' (not exported by '" + b.to_module + "')");
      if (it->second.front().args != sorts_of(inst.visible, p.arg_sorts, p.loc))
        throw Error(loc, "sort mismatch binding '" + p.name + "' to '" + a + "'");
      inst.visible.procs[p.name] = {it->second.front()};
      inst.formal_procs.insert(p.name);
    }
    for (const auto& [f, a] : map)
      if (!formals.count(f)) throw Error(loc, "'" + f + "' is not a formal of parameter section '" + sec.name + "'");
  }

  void declare_signature(Instance& inst, const Signature& sig, bool exported,
                         const std::map<std::string, std::string>& ren,
                         const std::map<std::string, std::string>& ov) {
    auto public_name = [&](const std::string& n) {
      auto it = ren.find(n);
      return it == ren.end() ? n : it->second;
    };
    auto global_name = [&](const std::string& n) {
      auto it = ov.find(n);
      return it == ov.end() ? public_name(n) : it->second;
    };
    for (const auto& s : sig.sorts) {
      std::string g = global_name(s);
      add_sort(g);
      inst.visible.sorts[s] = {g};
      if (exported) Scope::add(inst.exported.sorts, public_name(s), g);
    }
    for (const auto& f : sig.functions) {
      FuncDecl d{global_name(f.name), sorts_of(inst.visible, f.arg_sorts, f.loc),
                 sort_of(inst.visible, f.result_sort, f.loc), f.loc};
      add_constructor(d);
      Sym s{d.name, d.arg_sorts, d.result_sort};
      inst.visible.funcs[{f.name, f.arg_sorts.size()}] = {s};
      if (exported) Scope::add(inst.exported.funcs, ArityKey{public_name(f.name), f.arg_sorts.size()}, s);
    }
    for (const auto& a : sig.atoms) {
      SigDecl d{global_name(a.name), sorts_of(inst.visible, a.arg_sorts, a.loc), a.loc};
      add_atom(d);
      Sym s{d.name, d.arg_sorts, {}};
      inst.visible.atoms[{a.name, a.arg_sorts.size()}] = {s};
      if (exported) Scope::add(inst.exported.atoms, ArityKey{public_name(a.name), a.arg_sorts.size()}, s);
    }
    for (const auto& p : sig.processes) {
      SigDecl d{global_name(p.name), sorts_of(inst.visible, p.arg_sorts, p.loc), p.loc};
      add_process(d, inst, p.name);
      Sym s{d.name, d.arg_sorts, {}};
      inst.visible.procs[p.name] = {s};
      inst.own_procs[p.name] = d.name;
      if (exported) Scope::add(inst.exported.procs, public_name(p.name), s);
    }
  }

  // -- resolution -----------------------------------------------------------

  using Vars = std::map<std::string, std::string>;

  bool literal_sort(const std::string& s) const { return s == kNatSort || !ctor_count_.count(s); }

  TermPtr term(const Scope& sc, const TermPtr& t, const std::string& expected, const Vars& vars, const SourceLoc& loc) {
    switch (t->kind) {
      case Term::Kind::lit: {
        std::string s = expected.empty() ? kNatSort : expected;
        if (!literal_sort(s)) throw Error(loc, "literal " + t->name + " is not a term of sort " + s);
        return make_lit(t->value, s);
      }
      case Term::Kind::var: {
        auto it = vars.find(t->name);
        std::string s = it != vars.end() ? it->second : expected;
        if (!expected.empty() && !s.empty() && s != expected)
          throw Error(loc, "sort mismatch: variable " + t->name + " : " + s + " used at sort " + expected);
        return make_var(t->name, s);
      }
      case Term::Kind::app:
        break;
    }
    if (t->args.empty()) {
      auto it = vars.find(t->name);
      if (it != vars.end()) {
        if (!expected.empty() && it->second != expected)
          throw Error(loc, "sort mismatch: variable " + t->name + " : " + it->second + " used at sort " + expected);
        return make_var(t->name, it->second);
      }
    }
    auto it = sc.funcs.find({t->name, t->args.size()});
    if (it == sc.funcs.end())
      throw Error(loc, "undeclared function or variable '" + t->name + "'" +
                           (t->args.empty() ? "" : " with " + std::to_string(t->args.size()) + " arguments"));
    if (it->second.size() > 1) throw Error(loc, "ambiguous function '" + t->name + "'");
    const Sym& f = it->second.front();
    if (!expected.empty() && f.result != expected)
      throw Error(loc, "sort mismatch: " + to_string(t) + " has sort " + f.result + ", expected " + expected);
    std::vector<TermPtr> args;
    for (std::size_t i = 0; i < t->args.size(); ++i) args.push_back(term(sc, t->args[i], f.args[i], vars, loc));
    return make_app(f.global, std::move(args), f.result);
  }

  AtomPattern pattern(const Scope& sc, const AtomPattern& p, const Vars& vars, const SourceLoc& loc) {
    auto it = sc.atoms.find({p.name, p.args.size()});
    if (it == sc.atoms.end())
      throw Error(loc, "undeclared atom '" + p.name + "' with " + std::to_string(p.args.size()) + " arguments");
    if (it->second.size() > 1) throw Error(loc, "ambiguous atom '" + p.name + "'");
    const Sym& a = it->second.front();
    AtomPattern out{a.global, {}};
    for (std::size_t i = 0; i < p.args.size(); ++i) out.args.push_back(term(sc, p.args[i], a.args[i], vars, loc));
    return out;
  }

  std::vector<Binder> binders(const Scope& sc, const std::vector<Binder>& bs, Vars& vars, const SourceLoc& loc) {
    std::vector<Binder> out;
    for (const auto& b : bs) {
      std::string s = sort_of(sc, b.sort, loc);
      vars[b.var] = s;
      out.push_back(Binder{b.var, s});
    }
    return out;
  }

  AtomSetPtr atom_set(const Scope& sc, const AtomSetDef& def, const std::string& global) {
    auto s = std::make_shared<AtomSetDef>();
    s->name = global;
    s->loc = def.loc;
    Vars vars;
    s->quantifiers = binders(sc, def.quantifiers, vars, def.loc);
    for (const auto& m : def.members) s->members.push_back(pattern(sc, m, vars, def.loc));
    return s;
  }

  void resolve_sets(Instance& inst) {
    for (const auto& def : inst.mod->sets) {
      std::string g = inst.visible.sets.at(def.name).front();
      AtomSetPtr s = atom_set(inst.visible, def, g);
      auto it = set_table_.find(g);
      if (it != set_table_.end()) {
        if (set_owner_[g] == inst.key) throw Error(def.loc, "duplicate set of atoms '" + def.name + "'");
        if (to_string(*it->second) != to_string(*s)) throw ConflictRestart{inst.key, def.name, g + "@" + inst.fingerprint};
        continue;
      }
      set_table_[g] = s;
      set_owner_[g] = inst.key;
      out_.sets.push_back(s);
    }
  }

  void resolve_comms(Instance& inst) {
    for (const auto& c : inst.mod->comms) {
      CommRule r;
      r.loc = c.loc;
      Vars vars;
      r.quantifiers = binders(inst.visible, c.quantifiers, vars, c.loc);
      r.a = pattern(inst.visible, c.a, vars, c.loc);
      r.b = pattern(inst.visible, c.b, vars, c.loc);
      r.result = pattern(inst.visible, c.result, vars, c.loc);
      std::vector<std::string> lhs_vars, res_vars;
      for (const auto& t : r.a.args) collect_vars(t, lhs_vars);
      for (const auto& t : r.b.args) collect_vars(t, lhs_vars);
      for (const auto& t : r.result.args) collect_vars(t, res_vars);
      for (const auto& v : res_vars)
        if (std::find(lhs_vars.begin(), lhs_vars.end(), v) == lhs_vars.end())
          throw Error(c.loc, "variable '" + v + "' of the communication result does not occur on the left");
      std::string text = to_string(r);
      bool dup = false;
      for (const auto& x : out_.comms) dup = dup || to_string(x) == text;
      if (!dup) out_.comms.push_back(std::move(r));
    }
  }

  ProcPtr proc(const Scope& sc, const ProcPtr& p, const Vars& vars, const SourceLoc& loc) {
    using K = Proc::Kind;
    switch (p->kind) {
      case K::name:
      case K::atom:
      case K::inst: {
        auto pit = sc.procs.find(p->name);
        bool is_proc = pit != sc.procs.end() && pit->second.size() == 1 &&
                       pit->second.front().args.size() == p->args.size() && p->kind != K::atom;
        auto ait = sc.atoms.find({p->name, p->args.size()});
        bool is_atom = ait != sc.atoms.end() && p->kind != K::inst;
        if (pit != sc.procs.end() && pit->second.size() > 1 && p->kind != K::atom)
          throw Error(loc, "ambiguous process '" + p->name + "'");
        if (is_proc && is_atom) throw Error(loc, "'" + p->name + "' is both an atom and a process");
        if (!is_proc && !is_atom)
          throw Error(loc, "undeclared atom or process '" + p->name + "' with " + std::to_string(p->args.size()) +
                               " arguments");
        const Sym& s = is_proc ? pit->second.front() : ait->second.front();
        if (is_atom && ait->second.size() > 1) throw Error(loc, "ambiguous atom '" + p->name + "'");
        std::vector<TermPtr> args;
        for (std::size_t i = 0; i < p->args.size(); ++i) args.push_back(term(sc, p->args[i], s.args[i], vars, loc));
        return is_proc ? p_inst(s.global, std::move(args)) : p_atom(s.global, std::move(args));
      }
      case K::sum: {
        Vars inner = vars;
        std::string s = sort_of(sc, p->sort, loc);
        inner[p->name] = s;
        return p_sum(p->name, s, proc(sc, p->left, inner, loc));
      }
      case K::encaps:
      case K::hide: {
        AtomSetPtr set;
        std::string ref;
        if (!p->set_ref.empty()) {
          auto it = sc.sets.find(p->set_ref);
          if (it == sc.sets.end()) throw Error(loc, "undeclared set of atoms '" + p->set_ref + "'");
          ref = it->second.front();
          set = set_table_.at(ref);
        } else {
          set = atom_set(sc, *p->set, {});
        }
        ProcPtr body = proc(sc, p->left, vars, loc);
        return p->kind == K::encaps ? p_encaps(ref, set, body) : p_hide(ref, set, body);
      }
      case K::scope:
        return p_scope(p->name, p->args, proc(sc, p->left, vars, loc));
      default:
        return rebuild(p, p->left ? proc(sc, p->left, vars, loc) : nullptr,
                       p->right ? proc(sc, p->right, vars, loc) : nullptr);
    }
  }

  void resolve_defs(Instance& inst) {
    for (const auto& d : inst.mod->definitions) {
      if (inst.formal_procs.count(d.name))
        throw Error(d.loc, "equation for '" + d.name + "', which is a bound parameter");
      auto it = inst.own_procs.find(d.name);
      if (it == inst.own_procs.end())
        throw Error(d.loc, "equation for '" + d.name + "', which is not declared in module '" + inst.mod->name + "'");
      const Sym& sig = inst.visible.procs.at(d.name).front();
      if (sig.args.size() != d.formals.size())
        throw Error(d.loc, "equation for '" + d.name + "' has " + std::to_string(d.formals.size()) +
                               " parameters, declared with " + std::to_string(sig.args.size()));
      ProcessDef def;
      def.name = sig.global;
      def.loc = d.loc;
      Vars vars;
      for (std::size_t i = 0; i < d.formals.size(); ++i) {
        def.formals.push_back(Binder{d.formals[i], sig.args[i]});
        vars[d.formals[i]] = sig.args[i];
      }
      def.body = canonicalize(proc(inst.visible, d.body, vars, d.loc));
      auto owner = proc_owner_.find(def.name);
      if (owner != proc_owner_.end() && owner->second != inst.key) {
        const ProcessDef* prev = nullptr;
        for (const auto& x : out_.defs)
          if (x.name == def.name) prev = &x;
        if (prev && prev->formals == def.formals && equal(prev->body, def.body)) continue;
        throw ConflictRestart{inst.key, d.name, def.name + "@" + inst.fingerprint};
      }
      proc_owner_[def.name] = inst.key;
      out_.defs.push_back(std::move(def));
    }
  }
};

bool sort_is_recursive(const FlatSpec& spec, const std::string& s, bool& infinite) {
  // DFS over the "argument sort of a constructor of" relation looking for a cycle through s
  // or for NAT / open sorts reachable from s.
  std::set<std::string> seen;
  std::function<bool(const std::string&, std::vector<std::string>&)> dfs = [&](const std::string& x,
                                                                              std::vector<std::string>& path) {
    if (std::find(path.begin(), path.end(), x) != path.end()) return true;
    if (x != s && spec.is_open_sort(x)) {
      infinite = true;
      return false;
    }
    if (!seen.insert(x).second) return false;
    path.push_back(x);
    for (const FuncDecl* f : spec.constructors_of(x))
      for (const auto& a : f->arg_sorts)
        if (dfs(a, path)) return true;
    path.pop_back();
    return false;
  };
  std::vector<std::string> path;
  return dfs(s, path);
}

}  // namespace

FlatSpec flatten(const std::vector<ModuleDef>& mods, const std::string& root) { return Linker(mods).run(root); }

std::vector<Diagnostic> check(const FlatSpec& spec) {
  std::vector<Diagnostic> out;
  for (const auto& p : spec.processes) {
    std::vector<const ProcessDef*> ds;
    for (const auto& d : spec.defs)
      if (d.name == p.name) ds.push_back(&d);
    if (ds.empty()) out.push_back(Diagnostic{p.loc, "process '" + p.name + "' has no defining equation"});
    for (std::size_t i = 1; i < ds.size(); ++i)
      out.push_back(Diagnostic{ds[i]->loc, "duplicate equation for process '" + p.name + "'"});
  }
  // Two rules overlap when some pair of actions matches both (in either operand order).
  auto renamed = [](const AtomPattern& p, const std::string& suffix) {
    Binding b;
    std::vector<std::string> vs;
    for (const auto& t : p.args) collect_vars(t, vs);
    for (const auto& v : vs) b[v] = make_var(v + suffix);
    AtomPattern q{p.name, {}};
    for (const auto& t : p.args) {
      // Renaming apart ignores sorts; unification re-checks them.
      std::function<TermPtr(const TermPtr&)> ren = [&](const TermPtr& x) -> TermPtr {
        if (x->kind == Term::Kind::var) return make_var(x->name + suffix, x->sort);
        if (x->kind == Term::Kind::lit || x->args.empty()) return x;
        std::vector<TermPtr> as;
        for (const auto& a : x->args) as.push_back(ren(a));
        return make_app(x->name, std::move(as), x->sort);
      };
      q.args.push_back(ren(t));
    }
    return q;
  };
  auto unifiable = [](const AtomPattern& x1, const AtomPattern& y1, const AtomPattern& x2, const AtomPattern& y2) {
    if (x1.name != x2.name || y1.name != y2.name || x1.args.size() != x2.args.size() ||
        y1.args.size() != y2.args.size())
      return false;
    std::vector<std::pair<TermPtr, TermPtr>> eqs;
    for (std::size_t i = 0; i < x1.args.size(); ++i) eqs.emplace_back(x1.args[i], x2.args[i]);
    for (std::size_t i = 0; i < y1.args.size(); ++i) eqs.emplace_back(y1.args[i], y2.args[i]);
    return unify(eqs).has_value();
  };
  for (std::size_t i = 0; i < spec.comms.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.comms.size(); ++j) {
      const auto& r1 = spec.comms[i];
      const auto& r2 = spec.comms[j];
      AtomPattern a1 = renamed(r1.a, "'1"), b1 = renamed(r1.b, "'1");
      AtomPattern a2 = renamed(r2.a, "'2"), b2 = renamed(r2.b, "'2");
      if (unifiable(a1, b1, a2, b2) || unifiable(a1, b1, b2, a2))
        out.push_back(Diagnostic{r2.loc, "communication rules overlap: '" + to_string(r1) + "' and '" +
                                             to_string(r2) + "'"});
    }
  }
  return out;
}

SortClass classify_sort(const FlatSpec& spec, const std::string& s) {
  if (spec.is_open_sort(s)) return SortClass::open;
  bool infinite = false;
  bool rec = sort_is_recursive(spec, s, infinite);
  if (infinite) return SortClass::open;
  return rec ? SortClass::recursive : SortClass::finite;
}

std::vector<TermPtr> enumerate_sort(const FlatSpec& spec, const std::string& s, std::optional<int> depth_bound) {
  if (depth_bound && *depth_bound < 0) throw Error("depth bound must be non-negative");
  if (s == kNatSort) throw Error("infinite sort " + s);
  if (!spec.has_sort(s)) throw Error("unknown sort " + s);
  if (spec.constructors_of(s).empty()) return {};
  bool infinite = false;
  bool rec = sort_is_recursive(spec, s, infinite);
  if ((rec || infinite) && !depth_bound) throw Error("infinite sort " + s);
  constexpr std::size_t kLimit = 100000;

  // levels[sort][d] = terms of exactly depth d.
  std::map<std::string, std::vector<std::vector<TermPtr>>> levels;
  std::set<std::string> sorts_needed;
  std::function<void(const std::string&)> need = [&](const std::string& x) {
    if (!sorts_needed.insert(x).second) return;
    for (const FuncDecl* f : spec.constructors_of(x))
      for (const auto& a : f->arg_sorts) need(a);
  };
  need(s);
  int max_depth = depth_bound ? *depth_bound : static_cast<int>(sorts_needed.size());
  std::size_t total = 0;
  for (int d = 0; d <= max_depth; ++d) {
    bool any = false;
    for (const auto& x : sorts_needed) {
      auto& lv = levels[x];
      lv.emplace_back();
      for (const FuncDecl* f : spec.constructors_of(x)) {
        if (f->arg_sorts.empty()) {
          if (d == 0) lv[0].push_back(make_app(f->name, {}, f->result_sort));
          continue;
        }
        if (d == 0) continue;
        // All argument tuples with depth <= d-1 and at least one argument of depth exactly d-1.
        std::vector<std::vector<std::pair<TermPtr, int>>> pools;
        for (const auto& a : f->arg_sorts) {
          std::vector<std::pair<TermPtr, int>> pool;
          auto lit = levels.find(a);
          if (lit != levels.end())
            for (int k = 0; k <= d - 1 && k < static_cast<int>(lit->second.size()); ++k)
              for (const auto& t : lit->second[k]) pool.emplace_back(t, k);
          pools.push_back(std::move(pool));
        }
        bool empty = false;
        for (const auto& p : pools) empty = empty || p.empty();
        if (empty) continue;
        std::vector<std::size_t> idx(pools.size(), 0);
        while (true) {
          int deepest = 0;
          for (std::size_t i = 0; i < idx.size(); ++i) deepest = std::max(deepest, pools[i][idx[i]].second);
          if (deepest == d - 1) {
            std::vector<TermPtr> args;
            for (std::size_t i = 0; i < idx.size(); ++i) args.push_back(pools[i][idx[i]].first);
            lv[d].push_back(make_app(f->name, std::move(args), f->result_sort));
            if (++total > kLimit) throw Error("sort " + s + " has too many terms to enumerate");
          }
          std::size_t k = idx.size();
          while (k > 0) {
            --k;
            if (++idx[k] < pools[k].size()) break;
            idx[k] = 0;
            if (k == 0) {
              k = idx.size() + 1;
              break;
            }
          }
          if (k == idx.size() + 1) break;
        }
      }
      any = any || !lv[d].empty();
    }
    if (!any && !depth_bound) break;
  }
  std::vector<TermPtr> out;
  for (const auto& lv : levels[s])
    for (const auto& t : lv) out.push_back(t);
  return out;
}

// ---------------------------------------------------------------------------
// Resolution against a flat specification

TermPtr resolve_term(const FlatSpec& spec, const TermPtr& t, const std::string& expected,
                     const std::map<std::string, std::string>& vars) {
  switch (t->kind) {
    case Term::Kind::lit: {
      std::string s = expected.empty() ? kNatSort : expected;
      if (!spec.is_open_sort(s)) throw Error("literal " + t->name + " is not a term of sort " + s);
      return make_lit(t->value, s);
    }
    case Term::Kind::var: {
      auto it = vars.find(t->name);
      return make_var(t->name, it != vars.end() ? it->second : expected);
    }
    case Term::Kind::app:
      break;
  }
  if (t->args.empty()) {
    auto it = vars.find(t->name);
    if (it != vars.end()) {
      if (!expected.empty() && it->second != expected)
        throw Error("sort mismatch: variable " + t->name + " : " + it->second + " used at sort " + expected);
      return make_var(t->name, it->second);
    }
  }
  const FuncDecl* f = spec.find_constructor(t->name, t->args.size());
  if (!f) throw Error("undeclared function or variable '" + t->name + "'");
  if (!expected.empty() && f->result_sort != expected)
    throw Error("sort mismatch: " + to_string(t) + " has sort " + f->result_sort + ", expected " + expected);
  std::vector<TermPtr> args;
  for (std::size_t i = 0; i < t->args.size(); ++i) args.push_back(resolve_term(spec, t->args[i], f->arg_sorts[i], vars));
  return make_app(f->name, std::move(args), f->result_sort);
}

ProcPtr resolve_process(const FlatSpec& spec, const ProcPtr& p, const std::map<std::string, std::string>& vars) {
  using K = Proc::Kind;
  switch (p->kind) {
    case K::name:
    case K::atom:
    case K::inst: {
      const SigDecl* ps = p->kind != K::atom ? spec.find_process(p->name) : nullptr;
      if (ps && ps->arg_sorts.size() != p->args.size()) ps = nullptr;
      const SigDecl* as = p->kind != K::inst ? spec.find_atom(p->name, p->args.size()) : nullptr;
      if (ps && as) throw Error("'" + p->name + "' is both an atom and a process");
      if (!ps && !as) throw Error("undeclared atom or process '" + p->name + "'");
      const SigDecl* s = ps ? ps : as;
      std::vector<TermPtr> args;
      for (std::size_t i = 0; i < p->args.size(); ++i) args.push_back(resolve_term(spec, p->args[i], s->arg_sorts[i], vars));
      return ps ? p_inst(s->name, std::move(args)) : p_atom(s->name, std::move(args));
    }
    case K::sum: {
      auto inner = vars;
      if (!spec.has_sort(p->sort)) throw Error("undeclared sort '" + p->sort + "'");
      inner[p->name] = p->sort;
      return p_sum(p->name, p->sort, resolve_process(spec, p->left, inner));
    }
    case K::encaps:
    case K::hide: {
      AtomSetPtr set = p->set;
      if (!p->set_ref.empty()) {
        set = spec.find_set(p->set_ref);
        if (!set) throw Error("undeclared set of atoms '" + p->set_ref + "'");
      } else {
        auto s = std::make_shared<AtomSetDef>(*p->set);
        std::map<std::string, std::string> qv;
        for (const auto& q : s->quantifiers) qv[q.var] = q.sort;
        for (auto& m : s->members) m = resolve_atom_pattern(spec, m, qv);
        set = s;
      }
      ProcPtr body = resolve_process(spec, p->left, vars);
      return p->kind == K::encaps ? p_encaps(p->set_ref, set, body) : p_hide(p->set_ref, set, body);
    }
    default:
      return rebuild(p, p->left ? resolve_process(spec, p->left, vars) : nullptr,
                     p->right ? resolve_process(spec, p->right, vars) : nullptr);
  }
}

AtomPattern resolve_atom_pattern(const FlatSpec& spec, const AtomPattern& p,
                                 const std::map<std::string, std::string>& vars) {
  const SigDecl* a = spec.find_atom(p.name, p.args.size());
  if (!a) throw Error("undeclared atom '" + p.name + "' with " + std::to_string(p.args.size()) + " arguments");
  AtomPattern out{a->name, {}};
  for (std::size_t i = 0; i < p.args.size(); ++i) out.args.push_back(resolve_term(spec, p.args[i], a->arg_sorts[i], vars));
  return out;
}

}  // namespace psf
