#pragma once

#include <string>
#include <vector>

#include "psf/linker.hpp"
#include "psf/parser.hpp"
#include "psf/semantics.hpp"

namespace psf::test {

inline std::string source_dir() { return PSF_SOURCE_DIR; }

inline FlatSpec link_text(const std::string& text, const std::string& root) {
  return flatten(parse_spec(text, "test.psf"), root);
}

inline ProcPtr expr(const FlatSpec& spec, const std::string& text) { return resolve_process(spec, parse_process(text)); }

/// "label -> target" lines for the ground derivatives of `text`.
inline std::vector<std::string> step_strings(const FlatSpec& spec, const std::string& text) {
  Semantics sem(spec);
  std::vector<std::string> out;
  for (const auto& [l, t] : sem.step(sem.initial(expr(spec, text)))) out.push_back(l.to_string() + " -> " + to_string(t));
  return out;
}

}  // namespace psf::test
