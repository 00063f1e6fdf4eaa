#pragma once

#include <string>
#include <utility>
#include <vector>

#include "psf/diagnostics.hpp"
#include "psf/process.hpp"
#include "psf/terms.hpp"

namespace psf {

/// Function, constant or variable declaration "name : S # S -> R"
/// (constants and variables have no argument sorts).
struct FuncDecl {
  std::string name;
  std::vector<std::string> arg_sorts;
  std::string result_sort;
  SourceLoc loc;
};

/// Atom or process signature "name : S # S" (possibly without sorts).
struct SigDecl {
  std::string name;
  std::vector<std::string> arg_sorts;
  SourceLoc loc;
};

struct Signature {
  std::vector<std::string> sorts;
  std::vector<FuncDecl> functions;
  std::vector<SigDecl> atoms;
  std::vector<SigDecl> processes;

  bool empty() const { return sorts.empty() && functions.empty() && atoms.empty() && processes.empty(); }
};

struct ParamSection {
  std::string name;
  Signature sig;
};

using NameMap = std::vector<std::pair<std::string, std::string>>;

/// "Section bound by [formal -> actual, ...] to Module"
struct ParamBinding {
  std::string section;
  NameMap map;
  std::string to_module;
};

struct ImportClause {
  std::string module;
  std::vector<ParamBinding> bindings;
  NameMap renamings;
  SourceLoc loc;
};

struct CommDecl {
  AtomPattern a, b, result;
  std::vector<Binder> quantifiers;
  SourceLoc loc;
};

struct ProcDef {
  std::string name;
  std::vector<std::string> formals;
  ProcPtr body;
  SourceLoc loc;
};

struct ModuleDef {
  enum class Kind { data, process };

  Kind kind = Kind::process;
  std::string name;
  std::vector<ParamSection> parameters;
  Signature exports;
  std::vector<ImportClause> imports;
  Signature local;  // sorts/functions/atoms/processes sections outside exports
  std::vector<AtomSetDef> sets;
  std::vector<CommDecl> comms;
  std::vector<FuncDecl> variables;
  std::vector<ProcDef> definitions;
  SourceLoc loc;
};

/// Structural equality ignoring source locations.
bool operator==(const ModuleDef& a, const ModuleDef& b);

}  // namespace psf
