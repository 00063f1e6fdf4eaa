#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "psf/bisim.hpp"
#include "psf/linker.hpp"

namespace psf {

/// lhs -> rhs1 . rhs2 ...; placeholders $1..$n of the rhs occur in the lhs.
struct RefineRule {
  AtomPattern lhs;
  std::vector<AtomPattern> rhs;
  SourceLoc loc;
};

struct RenameRule {
  AtomPattern lhs;
  AtomPattern rhs;
  SourceLoc loc;
};

struct RefinementMap {
  std::vector<RefineRule> refinements;
  std::vector<RenameRule> renamings;
  std::vector<std::pair<std::string, std::string>> process_renamings;
};

std::string to_string(const RefineRule& r);
std::string to_string(const RenameRule& r);

/// Sections "refinements", "renamings" and "process renamings", one rule
/// "lhs -> rhs" each; "--" comments.
RefinementMap parse_mapping(std::string_view text, const std::string& file = {});
RefinementMap read_mapping(const std::string& path);

/// Replaces every atom matching a refinement lhs by its rhs chain and applies
/// renamings to the remaining atoms and the process renamings to process
/// names. Throws psf::Error when two rules match one occurrence.
FlatSpec apply_mapping(const FlatSpec& spec, const RefinementMap& m);

/// Renamings applied, refinement-lhs occurrences made silent.
FlatSpec abstract_source(const FlatSpec& spec, const RefinementMap& m);

/// Atoms matching any refinement rhs element made silent.
FlatSpec abstract_target(const FlatSpec& spec, const RefinementMap& m);

struct RefinementReport {
  BisimResult result;
  Lts source;  // LTS of abstract_source(a)
  Lts target;  // LTS of abstract_target(b)
};

RefinementReport check_refinement(const FlatSpec& a, const RefinementMap& m, const FlatSpec& b,
                                  const std::string& entry_a, const std::string& entry_b,
                                  std::size_t max_states = 100000, SemanticsOptions opts = {});

/// Rooted weak bisimilarity of the abstracted source and target.
BisimResult verify_refinement(const FlatSpec& a, const RefinementMap& m, const FlatSpec& b,
                              const std::string& entry_a, const std::string& entry_b,
                              std::size_t max_states = 100000, SemanticsOptions opts = {});

}  // namespace psf
