#include "psf/parser.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace psf {

namespace {

const std::set<std::string, std::less<>> kSectionWords = {
    "parameters", "exports", "imports",   "sorts",       "functions", "atoms",
    "processes",  "sets",    "variables", "definitions", "end",       "communications"};

const std::set<std::string, std::less<>> kExprWords = {"delta", "skip", "sum", "encaps", "hide", "disrupt"};

bool at_section(const TokenStream& ts) { return ts.at(Tok::ident) && kSectionWords.count(ts.peek().text) > 0; }

// Wildcards are distinct variables so that "f(_, _)" matches f(a, b).
int& wildcard_counter() {
  thread_local int n = 0;
  return n;
}

TermPtr parse_term_primary(TokenStream& ts) {
  const Token& t = ts.peek();
  switch (t.kind) {
    case Tok::number: {
      long long v = std::stoll(ts.next().text);
      return make_lit(v);
    }
    case Tok::underscore:
      ts.next();
      return make_var(std::string(kWildcard) + std::to_string(++wildcard_counter()));
    case Tok::placeholder:
      return make_var(ts.next().text);
    case Tok::lparen: {
      ts.next();
      TermPtr inner = parse_term(ts);
      ts.expect(Tok::rparen);
      return inner;
    }
    case Tok::ident: {
      std::string name = ts.next().text;
      std::vector<TermPtr> args;
      if (ts.accept(Tok::lparen)) {
        do args.push_back(parse_term(ts));
        while (ts.accept(Tok::comma));
        ts.expect(Tok::rparen);
      }
      return make_app(std::move(name), std::move(args));
    }
    default:
      ts.fail("term");
  }
}

std::vector<TermPtr> parse_args(TokenStream& ts) {
  std::vector<TermPtr> args;
  if (ts.accept(Tok::lparen)) {
    do args.push_back(parse_term(ts));
    while (ts.accept(Tok::comma));
    ts.expect(Tok::rparen);
  }
  return args;
}

std::vector<Binder> parse_binders(TokenStream& ts) {
  std::vector<Binder> out;
  do {
    std::string v = ts.expect_ident("variable");
    ts.expect_word("in");
    std::string s = ts.expect_ident("sort");
    out.push_back(Binder{v, s});
  } while (ts.accept(Tok::comma));
  return out;
}

AtomSetPtr parse_inline_set(TokenStream& ts, std::string name, SourceLoc loc) {
  auto set = std::make_shared<AtomSetDef>();
  set->name = std::move(name);
  set->loc = std::move(loc);
  ts.expect(Tok::lbrace);
  if (!ts.at(Tok::rbrace) && !ts.at(Tok::bar)) {
    do set->members.push_back(parse_atom(ts));
    while (ts.accept(Tok::comma));
  }
  if (ts.accept(Tok::bar)) set->quantifiers = parse_binders(ts);
  ts.expect(Tok::rbrace);
  return set;
}

ProcPtr parse_seq(TokenStream& ts);

ProcPtr parse_primary(TokenStream& ts) {
  const Token& t = ts.peek();
  if (t.kind == Tok::lparen) {
    ts.next();
    ProcPtr p = parse_process(ts);
    ts.expect(Tok::rparen);
    return p;
  }
  if (t.kind != Tok::ident) ts.fail("process expression");
  if (ts.accept_word("delta")) return p_delta();
  if (ts.accept_word("skip")) return p_skip();
  if (ts.accept_word("sum")) {
    ts.expect(Tok::lparen);
    std::string v = ts.expect_ident("variable");
    ts.expect_word("in");
    std::string s = ts.expect_ident("sort");
    ts.expect(Tok::comma);
    ProcPtr body = parse_process(ts);
    ts.expect(Tok::rparen);
    return p_sum(v, s, body);
  }
  if (ts.at_word("encaps") || ts.at_word("hide")) {
    bool encaps = ts.next().text == "encaps";
    ts.expect(Tok::lparen);
    std::string ref;
    AtomSetPtr set;
    if (ts.at(Tok::lbrace)) {
      set = parse_inline_set(ts, {}, ts.peek().loc);
    } else {
      ref = ts.expect_ident("atom set");
    }
    ts.expect(Tok::comma);
    ProcPtr body = parse_process(ts);
    ts.expect(Tok::rparen);
    return encaps ? p_encaps(ref, set, body) : p_hide(ref, set, body);
  }
  if (ts.accept_word("disrupt")) {
    ts.expect(Tok::lparen);
    ProcPtr body = parse_process(ts);
    ts.expect(Tok::comma);
    ProcPtr q = parse_process(ts);
    ts.expect(Tok::rparen);
    return p_disrupt(body, q);
  }
  if (kSectionWords.count(t.text)) ts.fail("process expression");
  std::string name = ts.next().text;
  return p_name(std::move(name), parse_args(ts));
}

ProcPtr parse_star(TokenStream& ts) {
  ProcPtr p = parse_primary(ts);
  if (ts.accept(Tok::star)) return p_star(p, parse_star(ts));
  return p;
}

ProcPtr parse_seq(TokenStream& ts) {
  ProcPtr p = parse_star(ts);
  if (ts.accept(Tok::dot)) return p_seq(p, parse_seq(ts));
  return p;
}

std::vector<std::string> parse_sort_product(TokenStream& ts) {
  std::vector<std::string> sorts;
  if (ts.at(Tok::ident) && !at_section(ts)) {
    sorts.push_back(ts.next().text);
    while (ts.accept(Tok::hash)) sorts.push_back(ts.expect_ident("sort"));
  }
  return sorts;
}

std::string parse_decl_name(TokenStream& ts) {
  if (ts.accept(Tok::underscore)) {
    ts.expect(Tok::chan);
    ts.expect(Tok::underscore);
    return kChannelOp;
  }
  if (at_section(ts)) ts.fail("declaration");
  return ts.expect_ident("declaration");
}

bool at_decl(const TokenStream& ts) { return (ts.at(Tok::ident) && !at_section(ts)) || ts.at(Tok::underscore); }

void parse_functions(TokenStream& ts, std::vector<FuncDecl>& out) {
  while (at_decl(ts)) {
    SourceLoc loc = ts.peek().loc;
    std::vector<std::string> names{parse_decl_name(ts)};
    while (ts.accept(Tok::comma)) names.push_back(parse_decl_name(ts));
    ts.expect(Tok::colon);
    auto args = parse_sort_product(ts);
    ts.expect(Tok::arrow);
    std::string result = ts.expect_ident("sort");
    for (auto& n : names) out.push_back(FuncDecl{n, args, result, loc});
  }
}

void parse_sigdecls(TokenStream& ts, std::vector<SigDecl>& out) {
  while (at_decl(ts)) {
    SourceLoc loc = ts.peek().loc;
    std::vector<std::string> names{parse_decl_name(ts)};
    while (ts.accept(Tok::comma)) names.push_back(parse_decl_name(ts));
    std::vector<std::string> sorts;
    if (ts.accept(Tok::colon)) {
      sorts = parse_sort_product(ts);
      if (sorts.empty()) ts.fail("sort");
    }
    for (auto& n : names) out.push_back(SigDecl{n, sorts, loc});
  }
}

// One of the sorts/functions/atoms/processes sections; false if none starts here.
bool parse_sig_section(TokenStream& ts, Signature& sig) {
  if (ts.accept_word("sorts")) {
    while (ts.at(Tok::ident) && !at_section(ts)) {
      sig.sorts.push_back(ts.next().text);
      ts.accept(Tok::comma);
    }
    return true;
  }
  if (ts.accept_word("functions")) {
    parse_functions(ts, sig.functions);
    return true;
  }
  if (ts.accept_word("atoms")) {
    parse_sigdecls(ts, sig.atoms);
    return true;
  }
  if (ts.accept_word("processes")) {
    parse_sigdecls(ts, sig.processes);
    return true;
  }
  return false;
}

NameMap parse_name_map(TokenStream& ts) {
  NameMap out;
  ts.expect(Tok::lbrack);
  if (!ts.at(Tok::rbrack)) {
    do {
      std::string a = ts.expect_ident();
      ts.expect(Tok::arrow);
      std::string b = ts.expect_ident();
      out.emplace_back(a, b);
    } while (ts.accept(Tok::comma));
  }
  ts.expect(Tok::rbrack);
  return out;
}

ImportClause parse_import(TokenStream& ts) {
  ImportClause ic;
  ic.loc = ts.peek().loc;
  ic.module = ts.expect_ident("module name");
  if (!ts.accept(Tok::lbrace)) return ic;
  while (!ts.at(Tok::rbrace)) {
    if (ts.accept_word("renamed")) {
      ts.expect_word("by");
      auto m = parse_name_map(ts);
      ic.renamings.insert(ic.renamings.end(), m.begin(), m.end());
    } else {
      ParamBinding b;
      b.section = ts.expect_ident("parameter section");
      ts.expect_word("bound");
      ts.expect_word("by");
      b.map = parse_name_map(ts);
      ts.expect_word("to");
      b.to_module = ts.expect_ident("module name");
      ic.bindings.push_back(std::move(b));
    }
    ts.accept(Tok::comma);
  }
  ts.expect(Tok::rbrace);
  return ic;
}

CommDecl parse_comm(TokenStream& ts) {
  CommDecl c;
  c.loc = ts.peek().loc;
  c.a = parse_atom(ts);
  ts.expect(Tok::bar);
  c.b = parse_atom(ts);
  ts.expect(Tok::equals);
  c.result = parse_atom(ts);
  if (ts.accept_word("for")) c.quantifiers = parse_binders(ts);
  return c;
}

ProcDef parse_definition(TokenStream& ts) {
  ProcDef d;
  d.loc = ts.peek().loc;
  d.name = ts.expect_ident("process name");
  if (ts.accept(Tok::lparen)) {
    do d.formals.push_back(ts.expect_ident("formal parameter"));
    while (ts.accept(Tok::comma));
    ts.expect(Tok::rparen);
  }
  ts.expect(Tok::equals);
  d.body = parse_process(ts);
  return d;
}

ModuleDef parse_module(TokenStream& ts) {
  ModuleDef m;
  m.loc = ts.peek().loc;
  if (ts.accept_word("data")) {
    m.kind = ModuleDef::Kind::data;
  } else if (ts.accept_word("process")) {
    m.kind = ModuleDef::Kind::process;
  } else {
    ts.fail("'data module' or 'process module'");
  }
  ts.expect_word("module");
  m.name = ts.expect_ident("module name");
  ts.expect_word("begin");
  while (!ts.at_word("end")) {
    if (parse_sig_section(ts, m.local)) continue;
    if (ts.accept_word("parameters")) {
      while (ts.at(Tok::ident) && !at_section(ts)) {
        ParamSection sec;
        sec.name = ts.next().text;
        ts.expect_word("begin");
        while (parse_sig_section(ts, sec.sig)) {
        }
        ts.expect_word("end");
        const Token& close = ts.peek();
        std::string n = ts.expect_ident("parameter section name");
        if (n != sec.name) ts.fail_at(close, "parameter section terminator '" + n + "' does not match '" + sec.name + "'");
        m.parameters.push_back(std::move(sec));
      }
    } else if (ts.accept_word("exports")) {
      ts.expect_word("begin");
      while (parse_sig_section(ts, m.exports)) {
      }
      ts.expect_word("end");
    } else if (ts.accept_word("imports")) {
      do m.imports.push_back(parse_import(ts));
      while (ts.accept(Tok::comma));
    } else if (ts.accept_word("sets")) {
      ts.expect_word("of");
      ts.expect_word("atoms");
      while (ts.at(Tok::ident) && !at_section(ts)) {
        SourceLoc loc = ts.peek().loc;
        std::string name = ts.next().text;
        ts.expect(Tok::equals);
        m.sets.push_back(*parse_inline_set(ts, name, loc));
      }
    } else if (ts.accept_word("communications")) {
      while (ts.at(Tok::ident) && !at_section(ts)) m.comms.push_back(parse_comm(ts));
    } else if (ts.accept_word("variables")) {
      parse_functions(ts, m.variables);
    } else if (ts.accept_word("definitions")) {
      while (ts.at(Tok::ident) && !at_section(ts)) m.definitions.push_back(parse_definition(ts));
    } else {
      ts.fail("section keyword or 'end'");
    }
  }
  ts.expect_word("end");
  const Token& close = ts.peek();
  std::string n = ts.expect_ident("module name");
  if (n != m.name) ts.fail_at(close, "module terminator name mismatch: '" + n + "' does not match '" + m.name + "'");
  return m;
}

}  // namespace

TermPtr parse_term(TokenStream& ts) {
  TermPtr t = parse_term_primary(ts);
  while (ts.accept(Tok::chan)) t = make_app(kChannelOp, {t, parse_term_primary(ts)});
  return t;
}

AtomPattern parse_atom(TokenStream& ts) {
  AtomPattern p;
  p.name = ts.expect_ident("atom");
  p.args = parse_args(ts);
  return p;
}

ProcPtr parse_process(TokenStream& ts) {
  ProcPtr p = parse_seq(ts);
  while (true) {
    if (ts.accept(Tok::plus)) {
      p = p_alt(p, parse_seq(ts));
    } else if (ts.accept(Tok::merge)) {
      p = p_par(p, parse_seq(ts));
    } else {
      return p;
    }
  }
}

std::vector<ModuleDef> parse_spec(std::string_view text, const std::string& file) {
  TokenStream ts(tokenize(text, file));
  std::vector<ModuleDef> out;
  std::set<std::string> seen;
  while (!ts.at(Tok::eof)) {
    const Token& start = ts.peek();
    ModuleDef m = parse_module(ts);
    if (!seen.insert(m.name).second) ts.fail_at(start, "duplicate module name '" + m.name + "'");
    out.push_back(std::move(m));
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<ModuleDef> parse_file(const std::string& path) { return parse_spec(read_file(path), path); }

ProcPtr parse_process(std::string_view text) {
  TokenStream ts(tokenize(text));
  ProcPtr p = parse_process(ts);
  ts.expect(Tok::eof);
  return p;
}

AtomPattern parse_atom(std::string_view text) {
  TokenStream ts(tokenize(text));
  AtomPattern p = parse_atom(ts);
  ts.expect(Tok::eof);
  return p;
}

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string join(const std::vector<std::string>& xs, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += xs[i];
  }
  return out;
}

std::string decl_name(const std::string& n) { return n == kChannelOp ? "_ >> _" : n; }

void print_signature(std::ostringstream& os, const Signature& s, const std::string& ind) {
  if (!s.sorts.empty()) os << ind << "sorts\n" << ind << "  " << join(s.sorts, ", ") << "\n";
  if (!s.functions.empty()) {
    os << ind << "functions\n";
    for (const auto& f : s.functions)
      os << ind << "  " << decl_name(f.name) << " : " << join(f.arg_sorts, " # ") << (f.arg_sorts.empty() ? "" : " ")
         << "-> " << f.result_sort << "\n";
  }
  auto sigs = [&](const char* title, const std::vector<SigDecl>& ds) {
    if (ds.empty()) return;
    os << ind << title << "\n";
    for (const auto& d : ds) {
      os << ind << "  " << d.name;
      if (!d.arg_sorts.empty()) os << " : " << join(d.arg_sorts, " # ");
      os << "\n";
    }
  };
  sigs("atoms", s.atoms);
  sigs("processes", s.processes);
}

std::string print_map(const NameMap& m) {
  std::vector<std::string> parts;
  for (const auto& [a, b] : m) parts.push_back(a + " -> " + b);
  return "[" + join(parts, ", ") + "]";
}

std::string print_binders(const std::vector<Binder>& bs) {
  std::vector<std::string> parts;
  for (const auto& b : bs) parts.push_back(b.var + " in " + b.sort);
  return join(parts, ", ");
}

}  // namespace

std::string pretty_print(const ModuleDef& m) {
  std::ostringstream os;
  os << (m.kind == ModuleDef::Kind::data ? "data" : "process") << " module " << m.name << "\nbegin\n";
  if (!m.parameters.empty()) {
    os << "  parameters\n";
    for (const auto& p : m.parameters) {
      os << "    " << p.name << "\n    begin\n";
      print_signature(os, p.sig, "      ");
      os << "    end " << p.name << "\n";
    }
  }
  if (!m.exports.empty()) {
    os << "  exports\n  begin\n";
    print_signature(os, m.exports, "    ");
    os << "  end\n";
  }
  if (!m.imports.empty()) {
    os << "  imports\n";
    for (std::size_t i = 0; i < m.imports.size(); ++i) {
      const auto& ic = m.imports[i];
      os << "    " << ic.module;
      if (!ic.bindings.empty() || !ic.renamings.empty()) {
        std::vector<std::string> parts;
        for (const auto& b : ic.bindings)
          parts.push_back(b.section + " bound by " + print_map(b.map) + " to " + b.to_module);
        if (!ic.renamings.empty()) parts.push_back("renamed by " + print_map(ic.renamings));
        os << " { " << join(parts, " ") << " }";
      }
      os << (i + 1 < m.imports.size() ? ",\n" : "\n");
    }
  }
  print_signature(os, m.local, "  ");
  if (!m.sets.empty()) {
    os << "  sets of atoms\n";
    for (const auto& s : m.sets) os << "    " << s.name << " = " << to_string(s) << "\n";
  }
  if (!m.comms.empty()) {
    os << "  communications\n";
    for (const auto& c : m.comms) {
      os << "    " << to_string(c.a) << " | " << to_string(c.b) << " = " << to_string(c.result);
      if (!c.quantifiers.empty()) os << "\n      for " << print_binders(c.quantifiers);
      os << "\n";
    }
  }
  if (!m.variables.empty()) {
    os << "  variables\n";
    for (const auto& v : m.variables) os << "    " << v.name << " : -> " << v.result_sort << "\n";
  }
  if (!m.definitions.empty()) {
    os << "  definitions\n";
    for (const auto& d : m.definitions) {
      os << "    " << d.name;
      if (!d.formals.empty()) os << "(" << join(d.formals, ", ") << ")";
      os << " =\n      " << to_string(d.body) << "\n";
    }
  }
  os << "end " << m.name << "\n";
  return os.str();
}

std::string pretty_print(const std::vector<ModuleDef>& mods) {
  std::string out;
  for (std::size_t i = 0; i < mods.size(); ++i) {
    if (i) out += "\n";
    out += pretty_print(mods[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Equality

namespace {

bool same(const FuncDecl& a, const FuncDecl& b) {
  return a.name == b.name && a.arg_sorts == b.arg_sorts && a.result_sort == b.result_sort;
}
bool same(const SigDecl& a, const SigDecl& b) { return a.name == b.name && a.arg_sorts == b.arg_sorts; }
bool same(const std::string& a, const std::string& b) { return a == b; }
bool same(const AtomSetDef& a, const AtomSetDef& b) { return a == b; }
bool same(const CommDecl& a, const CommDecl& b) {
  return a.a == b.a && a.b == b.b && a.result == b.result && a.quantifiers == b.quantifiers;
}
bool same(const ProcDef& a, const ProcDef& b) {
  return a.name == b.name && a.formals == b.formals && equal(a.body, b.body);
}
bool same(const ParamBinding& a, const ParamBinding& b) {
  return a.section == b.section && a.map == b.map && a.to_module == b.to_module;
}
bool same(const ImportClause& a, const ImportClause& b);
bool same(const Signature& a, const Signature& b);
bool same(const ParamSection& a, const ParamSection& b) { return a.name == b.name && same(a.sig, b.sig); }

template <class T>
bool same(const std::vector<T>& a, const std::vector<T>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same(a[i], b[i])) return false;
  return true;
}

bool same(const ImportClause& a, const ImportClause& b) {
  return a.module == b.module && same(a.bindings, b.bindings) && a.renamings == b.renamings;
}

bool same(const Signature& a, const Signature& b) {
  return same(a.sorts, b.sorts) && same(a.functions, b.functions) && same(a.atoms, b.atoms) &&
         same(a.processes, b.processes);
}

}  // namespace

bool operator==(const ModuleDef& a, const ModuleDef& b) {
  return a.kind == b.kind && a.name == b.name && same(a.parameters, b.parameters) && same(a.exports, b.exports) &&
         same(a.imports, b.imports) && same(a.local, b.local) && same(a.sets, b.sets) && same(a.comms, b.comms) &&
         same(a.variables, b.variables) && same(a.definitions, b.definitions);
}

}  // namespace psf
