#include "psf/refine.hpp"

#include <functional>

#include "psf/lexer.hpp"
#include "psf/parser.hpp"

namespace psf {

namespace {

void placeholders(const TermPtr& t, std::vector<std::string>& out) {
  if (t->kind == Term::Kind::var) {
    if (!t->name.empty() && t->name[0] == '$') out.push_back(t->name);
    return;
  }
  for (const auto& a : t->args) placeholders(a, out);
}

std::vector<std::string> placeholders(const AtomPattern& p) {
  std::vector<std::string> out;
  for (const auto& a : p.args) placeholders(a, out);
  return out;
}

void check_placeholders(const AtomPattern& lhs, const AtomPattern& rhs, const SourceLoc& loc) {
  auto have = placeholders(lhs);
  for (const auto& v : placeholders(rhs))
    if (std::find(have.begin(), have.end(), v) == have.end())
      throw Error(loc, "placeholder " + v + " of '" + to_string(rhs) + "' does not occur in '" + to_string(lhs) + "'");
}

bool at_section(const TokenStream& ts) {
  return ts.at_word("refinements") || ts.at_word("renamings") ||
         (ts.at_word("process") && ts.peek(1).kind == Tok::ident && ts.peek(1).text == "renamings");
}

std::optional<Binding> match(const AtomPattern& p, const Proc& atom) {
  return match_action(p, {}, ActionLabel::act(atom.name, atom.args));
}

AtomPattern instantiate(const AtomPattern& p, const Binding& b) { return AtomPattern{p.name, substitute(p.args, b)}; }

using Rewrite = std::function<ProcPtr(const ProcPtr& atom)>;

ProcPtr rewrite(const ProcPtr& p, const Rewrite& on_atom, const std::map<std::string, std::string>& proc_names) {
  switch (p->kind) {
    case Proc::Kind::atom:
      return on_atom(p);
    case Proc::Kind::inst:
    case Proc::Kind::name: {
      auto it = proc_names.find(p->name);
      if (it == proc_names.end()) return p;
      auto q = p_inst(it->second, p->args);
      return p->kind == Proc::Kind::inst ? q : p_name(it->second, p->args);
    }
    default:
      return rebuild(p, p->left ? rewrite(p->left, on_atom, proc_names) : nullptr,
                     p->right ? rewrite(p->right, on_atom, proc_names) : nullptr);
  }
}

FlatSpec transform(const FlatSpec& spec, const Rewrite& on_atom, const std::map<std::string, std::string>& proc_names) {
  FlatSpec out = spec;
  for (auto& d : out.defs) {
    d.body = canonicalize(rewrite(d.body, on_atom, proc_names));
    if (auto it = proc_names.find(d.name); it != proc_names.end()) d.name = it->second;
  }
  for (auto& p : out.processes)
    if (auto it = proc_names.find(p.name); it != proc_names.end()) p.name = it->second;
  out.reindex();
  return out;
}

ProcPtr chain(const std::vector<AtomPattern>& rhs, const Binding& b) {
  ProcPtr acc;
  for (auto it = rhs.rbegin(); it != rhs.rend(); ++it) {
    auto a = instantiate(*it, b);
    ProcPtr atom = p_atom(a.name, a.args);
    acc = acc ? p_seq(atom, acc) : atom;
  }
  return acc;
}

[[noreturn]] void ambiguous(const ProcPtr& atom, const std::string& r1, const std::string& r2) {
  throw Error("ambiguous match for " + to_string(atom) + ": rules '" + r1 + "' and '" + r2 + "'");
}

/// The single rule matching `atom`, refinements and renamings together.
struct Hit {
  const RefineRule* refine = nullptr;
  const RenameRule* rename = nullptr;
  Binding binding;
};

std::optional<Hit> find_rule(const RefinementMap& m, const ProcPtr& atom) {
  std::optional<Hit> hit;
  std::string first;
  for (const auto& r : m.refinements)
    if (auto b = match(r.lhs, *atom)) {
      if (hit) ambiguous(atom, first, to_string(r));
      hit = Hit{&r, nullptr, *b};
      first = to_string(r);
    }
  for (const auto& r : m.renamings)
    if (auto b = match(r.lhs, *atom)) {
      if (hit) ambiguous(atom, first, to_string(r));
      hit = Hit{nullptr, &r, *b};
      first = to_string(r);
    }
  return hit;
}

}  // namespace

std::string to_string(const RefineRule& r) {
  std::string out = to_string(r.lhs) + " ->";
  for (std::size_t i = 0; i < r.rhs.size(); ++i) out += (i ? " . " : " ") + to_string(r.rhs[i]);
  return out;
}

std::string to_string(const RenameRule& r) { return to_string(r.lhs) + " -> " + to_string(r.rhs); }

RefinementMap parse_mapping(std::string_view text, const std::string& file) {
  TokenStream ts(tokenize(text, file));
  RefinementMap m;
  enum class Section { none, refinements, renamings, processes } sec = Section::none;
  while (!ts.at(Tok::eof)) {
    if (ts.accept_word("refinements")) {
      sec = Section::refinements;
      continue;
    }
    if (ts.accept_word("renamings")) {
      sec = Section::renamings;
      continue;
    }
    if (ts.at_word("process") && ts.peek(1).kind == Tok::ident && ts.peek(1).text == "renamings") {
      ts.next();
      ts.next();
      sec = Section::processes;
      continue;
    }
    SourceLoc loc = ts.peek().loc;
    switch (sec) {
      case Section::none:
        ts.fail("'refinements', 'renamings' or 'process renamings'");
      case Section::processes: {
        std::string from = ts.expect_ident("process name");
        ts.expect(Tok::arrow);
        std::string to = ts.expect_ident("process name");
        m.process_renamings.emplace_back(from, to);
        break;
      }
      case Section::refinements: {
        RefineRule r;
        r.loc = loc;
        r.lhs = parse_atom(ts);
        ts.expect(Tok::arrow);
        if (ts.at(Tok::eof) || at_section(ts) || !ts.at(Tok::ident))
          throw Error(loc, "empty right-hand side for '" + to_string(r.lhs) + "'");
        do r.rhs.push_back(parse_atom(ts));
        while (ts.accept(Tok::dot));
        for (const auto& a : r.rhs) check_placeholders(r.lhs, a, loc);
        m.refinements.push_back(std::move(r));
        break;
      }
      case Section::renamings: {
        RenameRule r;
        r.loc = loc;
        r.lhs = parse_atom(ts);
        ts.expect(Tok::arrow);
        if (ts.at(Tok::eof) || at_section(ts) || !ts.at(Tok::ident))
          throw Error(loc, "empty right-hand side for '" + to_string(r.lhs) + "'");
        r.rhs = parse_atom(ts);
        check_placeholders(r.lhs, r.rhs, loc);
        m.renamings.push_back(std::move(r));
        break;
      }
    }
  }
  return m;
}

RefinementMap read_mapping(const std::string& path) { return parse_mapping(read_file(path), path); }

FlatSpec apply_mapping(const FlatSpec& spec, const RefinementMap& m) {
  std::map<std::string, std::string> names(m.process_renamings.begin(), m.process_renamings.end());
  return transform(
      spec,
      [&](const ProcPtr& atom) -> ProcPtr {
        auto hit = find_rule(m, atom);
        if (!hit) return atom;
        if (hit->refine) return chain(hit->refine->rhs, hit->binding);
        auto a = instantiate(hit->rename->rhs, hit->binding);
        return p_atom(a.name, a.args);
      },
      names);
}

FlatSpec abstract_source(const FlatSpec& spec, const RefinementMap& m) {
  return transform(
      spec,
      [&](const ProcPtr& atom) -> ProcPtr {
        auto hit = find_rule(m, atom);
        if (!hit) return atom;
        if (hit->refine) return p_skip();
        auto a = instantiate(hit->rename->rhs, hit->binding);
        return p_atom(a.name, a.args);
      },
      {});
}

FlatSpec abstract_target(const FlatSpec& spec, const RefinementMap& m) {
  return transform(
      spec,
      [&](const ProcPtr& atom) -> ProcPtr {
        for (const auto& r : m.refinements)
          for (const auto& a : r.rhs)
            if (match(a, *atom)) return p_skip();
        return atom;
      },
      {});
}

RefinementReport check_refinement(const FlatSpec& a, const RefinementMap& m, const FlatSpec& b,
                                  const std::string& entry_a, const std::string& entry_b, std::size_t max_states,
                                  SemanticsOptions opts) {
  RefinementReport r;
  FlatSpec sa = abstract_source(a, m);
  FlatSpec sb = abstract_target(b, m);
  r.source = build_lts(sa, entry_a, {}, max_states, opts);
  r.target = build_lts(sb, entry_b, {}, max_states, opts);
  r.result = rooted_weak_bisim(r.source, r.target);
  return r;
}

BisimResult verify_refinement(const FlatSpec& a, const RefinementMap& m, const FlatSpec& b,
                              const std::string& entry_a, const std::string& entry_b, std::size_t max_states,
                              SemanticsOptions opts) {
  return check_refinement(a, m, b, entry_a, entry_b, max_states, opts).result;
}

}  // namespace psf
