#include "psf/cslib.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "library_data.hpp"
#include "psf/lexer.hpp"
#include "psf/parser.hpp"

namespace psf {

std::string_view client_server_library_text() { return detail::kClientServerLibrary; }
std::string_view architecture_library_text() { return detail::kArchitectureLibrary; }

std::vector<ModuleDef> library_modules() {
  static const std::vector<ModuleDef> mods = [] {
    auto cs = parse_spec(client_server_library_text(), kClientServerLibraryPath);
    auto arch = parse_spec(architecture_library_text(), kArchitectureLibraryPath);
    cs.insert(cs.end(), arch.begin(), arch.end());
    return cs;
  }();
  return mods;
}

std::vector<ModuleDef> with_library(std::vector<ModuleDef> user) {
  std::set<std::string> names;
  for (const auto& m : user) names.insert(m.name);
  for (auto& m : library_modules())
    if (!names.count(m.name)) user.push_back(m);
  return user;
}

namespace {

LoadedSpec finish_load(std::vector<ModuleDef> user, const std::string& root) {
  if (user.empty() && root.empty()) throw Error("no modules given");
  LoadedSpec out;
  out.user_count = user.size();
  out.root = root.empty() ? user.back().name : root;
  out.modules = with_library(std::move(user));
  out.spec = flatten(out.modules, out.root);
  return out;
}

}  // namespace

LoadedSpec load_spec(const std::vector<std::string>& files, const std::string& root) {
  std::vector<ModuleDef> user;
  for (const auto& f : files) {
    auto mods = parse_file(f);
    user.insert(user.end(), mods.begin(), mods.end());
  }
  return finish_load(std::move(user), root);
}

LoadedSpec load_spec_text(std::string_view text, const std::string& root, const std::string& file) {
  return finish_load(parse_spec(text, file), root);
}

// ---------------------------------------------------------------------------
// Roles

namespace {

bool interface_side_atom(const std::string& a) {
  return a.rfind("cs-", 0) == 0 || a == "c-rec-call" || a == "c-snd-return" || a == "s-snd-call" ||
         a == "s-rec-return";
}

}  // namespace

Roles detect_roles(const FlatSpec& spec, const std::string& proc) {
  if (!spec.find_def(proc)) throw Error("component process '" + proc + "' is not defined");
  Roles r;
  std::set<std::string> seen;
  std::vector<std::string> todo{proc};
  while (!todo.empty()) {
    std::string name = todo.back();
    todo.pop_back();
    if (!seen.insert(name).second) continue;
    const ProcessDef* def = spec.find_def(name);
    if (!def) continue;
    visit(def->body, [&](const ProcPtr& p) {
      if (p->kind == Proc::Kind::inst) {
        if (p->name == "C-I" || p->name == "S-I")
          throw Error(def->loc, "component '" + proc + "' already instantiates " + p->name + "; it is wrapped already");
        todo.push_back(p->name);
      }
      if (p->kind != Proc::Kind::atom) return;
      if (interface_side_atom(p->name))
        throw Error(def->loc, "component '" + proc + "' already contains interface action " + p->name +
                                  "; it is wrapped already");
      if (p->name == "s-rec-call") r.is_server = true;
      if (p->name == "c-snd-call" && !p->args.empty()) {
        const TermPtr& server = p->args[0];
        if (server->kind != Term::Kind::app || !server->args.empty() || !spec.find_constructor(server->name, 0))
          throw Error(def->loc, "c-snd-call(" + to_string(server) + ", ...) in '" + name +
                                    "': the server must be a constant to generate interfaces statically");
        if (std::find(r.client_of.begin(), r.client_of.end(), server->name) == r.client_of.end())
          r.client_of.push_back(server->name);
      }
    });
  }
  std::sort(r.client_of.begin(), r.client_of.end());
  return r;
}

std::vector<ComponentDecl> parse_manifest(std::string_view text, const std::string& file) {
  std::vector<ComponentDecl> out;
  TokenStream ts(tokenize(text, file));
  while (!ts.at(Tok::eof)) {
    ComponentDecl c;
    c.name = ts.expect_ident("component name");
    ts.expect(Tok::colon);
    c.process = ts.expect_ident("process name");
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ComponentDecl> read_manifest(const std::string& path) { return parse_manifest(read_file(path), path); }

// ---------------------------------------------------------------------------
// Generation

namespace {

const ModuleDef* exporter_of_process(const std::vector<ModuleDef>& mods, const std::string& p) {
  for (const auto& m : mods)
    for (const auto& d : m.exports.processes)
      if (d.name == p) return &m;
  return nullptr;
}

const ModuleDef* exporter_of_constant(const std::vector<ModuleDef>& mods, const std::string& c) {
  for (const auto& m : mods)
    for (const auto& f : m.exports.functions)
      if (f.name == c && f.arg_sorts.empty()) return &m;
  return nullptr;
}

std::string join(const std::vector<std::string>& xs, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? sep : "") + xs[i];
  return out;
}

std::string module_text(const std::string& name, const std::vector<std::string>& imports,
                        const std::string& definition) {
  std::ostringstream os;
  os << "process module " << name << "\nbegin\n  exports\n  begin\n    processes\n      " << name
     << "\n  end\n  imports\n    " << join(imports, ",\n    ") << "\n  definitions\n    " << name << " = "
     << definition << "\nend " << name << "\n";
  return os.str();
}

void find_cycle(const std::vector<ComponentDecl>& comps, std::vector<Diagnostic>& warnings) {
  std::map<std::string, std::vector<std::string>> edges;
  for (const auto& c : comps) edges[c.name] = c.roles.client_of;
  std::map<std::string, int> state;  // 1 on stack, 2 done
  std::vector<std::string> stack;
  std::function<bool(const std::string&)> dfs = [&](const std::string& n) {
    state[n] = 1;
    stack.push_back(n);
    for (const auto& m : edges[n]) {
      if (state[m] == 1) {
        auto it = std::find(stack.begin(), stack.end(), m);
        std::vector<std::string> cyc(it, stack.end());
        cyc.push_back(m);
        warnings.push_back(Diagnostic{{}, "client-of cycle: " + join(cyc, " -> "), Severity::warning});
        return true;
      }
      if (state[m] == 0 && dfs(m)) return true;
    }
    stack.pop_back();
    state[n] = 2;
    return false;
  };
  for (const auto& c : comps)
    if (state[c.name] == 0 && dfs(c.name)) return;
}

}  // namespace

GeneratedComposition generate_interfaces(const std::vector<ModuleDef>& modules,
                                         std::vector<ComponentDecl> components, const GenerateOptions& opts) {
  if (components.empty()) throw Error("no components given");
  GeneratedComposition g;
  std::set<std::string> ids;
  const auto linked = with_library(modules);
  for (auto& c : components) {
    if (!ids.insert(c.name).second) throw Error("two components claim the server ID '" + c.name + "'");
    const ModuleDef* pm = exporter_of_process(modules, c.process);
    if (!pm) throw Error("no module exports process '" + c.process + "'");
    FlatSpec spec = flatten(linked, pm->name);
    const FuncDecl* f = spec.find_constructor(c.name, 0);
    if (!f || f->result_sort != "ID")
      throw Error("component name '" + c.name + "' is not an ID constant visible in module " + pm->name);
    c.roles = detect_roles(spec, c.process);
    if (c.roles.empty())
      throw Error("component '" + c.name + "' (" + c.process + ") neither calls a server nor serves calls");
  }
  for (const auto& c : components)
    for (const auto& s : c.roles.client_of)
      if (!ids.count(s)) throw Error("component '" + c.name + "' calls server '" + s + "', which is not a component");
  find_cycle(components, g.warnings);

  std::set<std::string> taken;
  for (const auto& m : modules) taken.insert(m.name);
  auto claim = [&](const std::string& name) {
    if (taken.count(name)) throw Error("generated module '" + name + "' clashes with an existing module");
    taken.insert(name);
    return name;
  };

  std::string text;
  std::vector<std::string> system_imports, wrapped;
  for (const auto& c : components) {
    const ModuleDef* pm = exporter_of_process(modules, c.process);
    if (!pm) throw Error("no module exports process '" + c.process + "'");
    const ModuleDef* idm = exporter_of_constant(modules, c.name);
    if (!idm) throw Error("no module exports the ID constant '" + c.name + "'");
    std::string inner = c.process;  // process the next wrapper constrains
    std::string inner_module = pm->name;

    if (!c.roles.client_of.empty()) {
      std::string name = claim("C-" + c.process);
      std::vector<std::string> imports{idm->name, pm->name};
      std::vector<std::string> parts;
      for (const auto& s : c.roles.client_of) {
        const ModuleDef* sm = exporter_of_constant(modules, s);
        if (sm != idm)
          throw Error("ID constants '" + c.name + "' and '" + s + "' must be exported by the same module");
        imports.push_back("NewC-I { Name bound by [client -> " + c.name + ", server -> " + s + "] to " + idm->name +
                          " }");
        parts.push_back("C-I(" + c.name + ", " + s + ")");
      }
      parts.push_back(c.process);
      text += module_text(name, imports, join(parts, " || ")) + "\n";
      inner = name;
      inner_module = name;
    }
    if (c.roles.is_server) {
      std::vector<std::string> imports{idm->name, "S-I { Name bound by [server -> " + c.name + "] to " + idm->name + " }"};
      std::string constrained = inner;
      if (!c.roles.client_of.empty()) {
        constrained = "SC-" + c.process;
        imports.push_back("NewClient { Client bound by [Client -> " + inner + "] to " + inner_module +
                          " renamed by [CS-Client -> " + constrained + "] }");
      } else {
        imports.push_back(inner_module);
      }
      std::string name = claim("S-" + c.process);
      text += module_text(name, imports, "S-I(" + c.name + ") || " + constrained) + "\n";
      system_imports.push_back("NewServer { Server bound by [Server -> " + name + "] to " + name +
                               " renamed by [CS-Server -> CS-" + c.process + "] }");
    } else {
      system_imports.push_back("NewClient { Client bound by [Client -> " + inner + "] to " + inner_module +
                               " renamed by [CS-Client -> CS-" + c.process + "] }");
    }
    wrapped.push_back("CS-" + c.process);
  }
  text += module_text(claim(opts.system_name), system_imports, join(wrapped, " || ")) + "\n";
  std::string root = claim(opts.root_name);
  text += "process module " + root + "\nbegin\n  imports\n    ClientServer {\n      System bound by [System -> " +
          opts.system_name + "] to " + opts.system_name + "\n      renamed by [ClientServer -> " + root +
          "]\n    }\nend " + root + "\n";

  g.modules = parse_spec(text, "<generated>");
  g.components = std::move(components);
  g.root_module = root;
  g.root_process = root;
  return g;
}

std::string GeneratedComposition::text() const {
  std::string out = "-- Generated client/server composition.\n";
  for (const auto& c : components) {
    out += "-- " + c.name + " : " + c.process;
    if (!c.roles.client_of.empty()) out += ", client of " + join(c.roles.client_of, ", ");
    if (c.roles.is_server) out += ", server";
    out += "\n";
  }
  return out + "\n" + pretty_print(modules);
}

FlatSpec link_composition(const std::vector<ModuleDef>& user_modules, const GeneratedComposition& g) {
  std::vector<ModuleDef> all = user_modules;
  all.insert(all.end(), g.modules.begin(), g.modules.end());
  return flatten(with_library(std::move(all)), g.root_module);
}

// ---------------------------------------------------------------------------
// Shutdown

ShutdownReport quit_shutdown_closure(const Lts& lts, std::size_t component_count, const std::string& quit) {
  if (lts.truncated) throw Error("cannot check shutdown on a truncated LTS; raise --max-states");
  ShutdownReport r;
  r.bound = component_count + 2;
  const std::size_t n = lts.num_states;
  std::vector<std::vector<std::size_t>> out(n), in(n);
  for (const auto& t : lts.transitions) {
    out[t.from].push_back(t.to);
    in[t.to].push_back(t.from);
  }
  // Shortest distance to a terminated state, by backward search.
  const std::size_t inf = SIZE_MAX;
  std::vector<std::size_t> dist(n, inf);
  std::deque<std::size_t> q;
  for (std::size_t s = 0; s < n; ++s)
    if (lts.terminating[s]) {
      dist[s] = 0;
      q.push_back(s);
    }
  while (!q.empty()) {
    std::size_t s = q.front();
    q.pop_front();
    for (std::size_t p : in[s])
      if (dist[p] == inf) {
        dist[p] = dist[s] + 1;
        q.push_back(p);
      }
  }
  // Shutdown region: everything reachable from a quit target.
  std::vector<char> region(n, 0);
  for (const auto& t : lts.transitions) {
    if (t.label.tau || t.label.to_string() != quit) continue;
    ++r.quit_transitions;
    std::size_t steps = dist[t.to] == inf ? inf : dist[t.to] + 1;
    if (steps != inf) r.worst_steps = std::max(r.worst_steps, steps);
    if (steps == inf || steps > r.bound) r.late_quits.push_back(t.from);
    if (!region[t.to]) {
      region[t.to] = 1;
      q.push_back(t.to);
    }
  }
  while (!q.empty()) {
    std::size_t s = q.front();
    q.pop_front();
    for (std::size_t x : out[s])
      if (!region[x]) {
        region[x] = 1;
        q.push_back(x);
      }
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (region[s] && dist[s] == inf) r.stuck.push_back(s);
    if (!region[s] && !lts.terminating[s] && out[s].empty()) r.deadlocks.push_back(s);
  }
  std::sort(r.late_quits.begin(), r.late_quits.end());
  r.late_quits.erase(std::unique(r.late_quits.begin(), r.late_quits.end()), r.late_quits.end());
  return r;
}

std::string format_report(const ShutdownReport& r) {
  std::ostringstream os;
  auto list = [&](const std::vector<std::size_t>& xs) {
    for (std::size_t i = 0; i < xs.size() && i < 10; ++i) os << (i ? ", " : " ") << xs[i];
    if (xs.size() > 10) os << ", ...";
  };
  os << "quit transitions: " << r.quit_transitions << "\n";
  os << "steps from quit to termination: at most " << r.worst_steps << " (bound " << r.bound << ")\n";
  os << "quit states missing the bound: " << r.late_quits.size();
  list(r.late_quits);
  os << "\nstates after quit that cannot terminate: " << r.stuck.size();
  list(r.stuck);
  os << "\ndeadlocks outside the shutdown region: " << r.deadlocks.size();
  list(r.deadlocks);
  os << "\n" << (r.ok() ? "shutdown property holds" : "shutdown property VIOLATED") << "\n";
  return os.str();
}

}  // namespace psf
