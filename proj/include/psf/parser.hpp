#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "psf/ast.hpp"
#include "psf/lexer.hpp"

namespace psf {

/// Parses a sequence of complete modules. Throws psf::Error on syntax errors
/// and duplicate module names.
std::vector<ModuleDef> parse_spec(std::string_view text, const std::string& file = {});

/// Reads and parses a file; the file name is used in diagnostics.
std::vector<ModuleDef> parse_file(const std::string& path);

/// Prints a module in canonical layout; the output parses back to an equal module.
std::string pretty_print(const ModuleDef& m);
std::string pretty_print(const std::vector<ModuleDef>& mods);

/// Stand-alone process expression (unresolved call sites), e.g. "a . (b + c)".
ProcPtr parse_process(std::string_view text);

/// Stand-alone action label such as "s-call(primitive, succ(3))"; "_" parses as a
/// wildcard variable.
AtomPattern parse_atom(std::string_view text);

// Pieces shared with the mapping and manifest readers.
TermPtr parse_term(TokenStream& ts);
AtomPattern parse_atom(TokenStream& ts);
ProcPtr parse_process(TokenStream& ts);

/// Name given to "_" wildcards in parsed atoms.
inline constexpr const char* kWildcard = "_";

std::string read_file(const std::string& path);

}  // namespace psf
