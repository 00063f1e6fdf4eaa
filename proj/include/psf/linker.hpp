#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "psf/ast.hpp"
#include "psf/process.hpp"

namespace psf {

struct CommRule {
  AtomPattern a, b, result;
  std::vector<Binder> quantifiers;
  SourceLoc loc;
};
std::string to_string(const CommRule& c);  // "a(x) | b(x) = c(x) for x in S"

struct ProcessDef {
  std::string name;
  std::vector<Binder> formals;  // names with their sorts
  ProcPtr body;
  SourceLoc loc;
};

struct FlatSpecData {
  std::vector<std::string> sorts;
  std::vector<FuncDecl> constructors;
  std::vector<SigDecl> atoms;
  std::vector<AtomSetPtr> sets;
  std::vector<CommRule> comms;
  std::vector<SigDecl> processes;
  std::vector<ProcessDef> defs;
  std::string root_module;
};

/// Fully linked specification. All names are global; every call site in every
/// body is resolved to an atom or a process instantiation and every term
/// carries its sort. Copies rebuild their lookup tables.
struct FlatSpec : FlatSpecData {
  FlatSpec() = default;
  FlatSpec(const FlatSpec& o) : FlatSpecData(o) { reindex(); }
  FlatSpec(FlatSpec&&) = default;
  FlatSpec& operator=(const FlatSpec& o) {
    if (this != &o) {
      FlatSpecData::operator=(o);
      reindex();
    }
    return *this;
  }
  FlatSpec& operator=(FlatSpec&&) = default;

  /// Rebuilds the lookup tables; call after editing the vectors directly.
  void reindex();

  const ProcessDef* find_def(const std::string& name) const;
  const SigDecl* find_process(const std::string& name) const;
  const SigDecl* find_atom(const std::string& name, std::size_t arity) const;
  const FuncDecl* find_constructor(const std::string& name, std::size_t arity) const;
  AtomSetPtr find_set(const std::string& name) const;
  bool has_sort(const std::string& s) const;
  /// Constructors whose result sort is `s`, in declaration order.
  const std::vector<const FuncDecl*>& constructors_of(const std::string& s) const;
  /// Sorts with no constructors accept natural literals, as does NAT.
  bool is_open_sort(const std::string& s) const;
  /// Comm rules whose left operands are (x, y) or (y, x).
  const std::vector<const CommRule*>& comms_for(const std::string& x, const std::string& y) const;

 private:
  std::unordered_map<std::string, std::size_t> def_index_;
  std::unordered_map<std::string, std::size_t> proc_index_;
  std::map<std::pair<std::string, std::size_t>, std::size_t> atom_index_;
  std::map<std::pair<std::string, std::size_t>, std::size_t> ctor_index_;
  std::map<std::string, std::vector<const FuncDecl*>> ctors_by_sort_;
  std::map<std::pair<std::string, std::string>, std::vector<const CommRule*>> comm_index_;
};

/// Resolves imports, parameter bindings and renamings starting at `root` and
/// merges everything into one specification. Throws psf::Error on unbound
/// parameters, undeclared actuals, rename collisions, cyclic imports and
/// sort/arity errors.
FlatSpec flatten(const std::vector<ModuleDef>& mods, const std::string& root);

/// Reports violated invariants: duplicate or missing process equations and
/// overlapping communication rules.
std::vector<Diagnostic> check(const FlatSpec& spec);

/// Ground terms of sort `s`, breadth-first by nesting depth then declaration
/// order. A sort without constructors yields an empty list. Throws psf::Error
/// ("infinite sort") for NAT, and for sorts with recursive constructors or
/// literal-valued arguments when no bound is given.
std::vector<TermPtr> enumerate_sort(const FlatSpec& spec, const std::string& s,
                                    std::optional<int> depth_bound = std::nullopt);

/// finite: enumerable without a bound; recursive: enumerable up to a depth
/// bound; open: involves NAT or a sort without constructors, values come from
/// literals only.
enum class SortClass { finite, recursive, open };
SortClass classify_sort(const FlatSpec& spec, const std::string& s);

/// True when enumerate_sort would succeed without a bound.
inline bool is_finite_sort(const FlatSpec& spec, const std::string& s) {
  return classify_sort(spec, s) == SortClass::finite;
}

/// Resolves a free-standing term (constants, constructors, literals) against
/// the specification, checking it against `expected_sort` when non-empty.
TermPtr resolve_term(const FlatSpec& spec, const TermPtr& t, const std::string& expected_sort = {},
                     const std::map<std::string, std::string>& vars = {});

/// Resolves call sites of a free-standing expression (e.g. a CLI entry such
/// as "C-I(operator, primitive)").
ProcPtr resolve_process(const FlatSpec& spec, const ProcPtr& p, const std::map<std::string, std::string>& vars = {});

/// Resolves an action pattern; variables (including "_" wildcards) take the
/// sort of their argument position unless listed in `vars`.
AtomPattern resolve_atom_pattern(const FlatSpec& spec, const AtomPattern& p,
                                 const std::map<std::string, std::string>& vars = {});

}  // namespace psf
