#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "psf/ast.hpp"
#include "psf/linker.hpp"
#include "psf/semantics.hpp"

namespace psf {

inline constexpr const char* kClientServerLibraryPath = "lib/psf/cs/1.0/clientserver.psf";
inline constexpr const char* kArchitectureLibraryPath = "lib/psf/arch/1.0/architecture.psf";

/// Source text of the shipped libraries (embedded at build time).
std::string_view client_server_library_text();
std::string_view architecture_library_text();

/// The nine Client/Server library modules followed by the three Architecture
/// library modules.
std::vector<ModuleDef> library_modules();

/// Adds the library modules that `user` does not define itself.
std::vector<ModuleDef> with_library(std::vector<ModuleDef> user);

/// Parses `files`, adds the libraries and flattens from `root` (the last
/// module of the last file when empty).
struct LoadedSpec {
  std::vector<ModuleDef> modules;  // user modules followed by library modules
  std::size_t user_count = 0;
  std::string root;
  FlatSpec spec;
};
LoadedSpec load_spec(const std::vector<std::string>& files, const std::string& root = {});
LoadedSpec load_spec_text(std::string_view text, const std::string& root = {}, const std::string& file = "<text>");

struct Roles {
  std::vector<std::string> client_of;  // server IDs called via c-snd-call, sorted
  bool is_server = false;              // some s-rec-call occurs
  bool empty() const { return client_of.empty() && !is_server; }
};

/// Call roles of `proc`, following process instantiations. Throws when a
/// c-snd-call has a server argument that is not a constant.
Roles detect_roles(const FlatSpec& spec, const std::string& proc);

struct ComponentDecl {
  std::string name;     // ID constant, e.g. "operator"
  std::string process;  // e.g. "Operator"
  Roles roles;          // filled by generate_interfaces
};

/// One "name : process" per line, "--" comments.
std::vector<ComponentDecl> parse_manifest(std::string_view text, const std::string& file = {});
std::vector<ComponentDecl> read_manifest(const std::string& path);

struct GenerateOptions {
  std::string system_name = "ApplicationSystem";
  std::string root_name = "Application";
};

struct GeneratedComposition {
  std::vector<ModuleDef> modules;  // client/server wrappers, the system and the root
  std::vector<ComponentDecl> components;
  std::string root_module;
  std::string root_process;
  std::vector<Diagnostic> warnings;

  std::string text() const;  // generated modules as PSF source
};

/// Wraps every component in its client interfaces (one C-I per server it
/// calls) and, for servers, an S-I; composes the wrapped components in a
/// ClientServer environment. `modules` are the user's modules that declare
/// the component processes and the ID constants; roles are detected in the
/// module exporting each component process.
GeneratedComposition generate_interfaces(const std::vector<ModuleDef>& modules,
                                         std::vector<ComponentDecl> components, const GenerateOptions& opts = {});

/// User modules, libraries and the generated modules, flattened at the root.
FlatSpec link_composition(const std::vector<ModuleDef>& user_modules, const GeneratedComposition& g);

struct ShutdownReport {
  std::size_t bound = 0;                  // allowed steps from quit to termination, quit included
  std::size_t quit_transitions = 0;
  std::size_t worst_steps = 0;            // longest shortest path quit -> termination
  std::vector<std::size_t> late_quits;    // sources of quit steps exceeding the bound or never terminating
  std::vector<std::size_t> stuck;         // states after a quit that cannot reach termination
  std::vector<std::size_t> deadlocks;     // non-terminated states without moves outside the shutdown region
  bool ok() const { return late_quits.empty() && stuck.empty() && deadlocks.empty(); }
};

/// After every quit step, termination is reachable within `component_count
/// + 2` steps and from every state on the way; no deadlocks elsewhere.
ShutdownReport quit_shutdown_closure(const Lts& lts, std::size_t component_count, const std::string& quit = "quit");
std::string format_report(const ShutdownReport& r);

}  // namespace psf
