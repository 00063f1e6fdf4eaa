#include "cli.hpp"

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "psf/bisim.hpp"
#include "psf/cslib.hpp"
#include "psf/parser.hpp"
#include "psf/refine.hpp"
#include "psf/runtime.hpp"
#include "psf/service.hpp"

namespace psf::cli {

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

struct Limits {
  std::size_t max_states = 100000;
  int depth_bound = 6;

  SemanticsOptions semantics() const {
    SemanticsOptions o;
    o.depth_bound = depth_bound;
    return o;
  }
};

void add_limits(CLI::App* cmd, Limits& l) {
  cmd->add_option("--max-states", l.max_states, "State limit for LTS construction")->capture_default_str();
  cmd->add_option("--depth-bound", l.depth_bound, "Nesting bound when enumerating recursive sorts")
      ->capture_default_str();
}

bool is_identifier(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  return true;
}

/// A process name, or an expression such as "a + a" or "C-I(operator, primitive)".
ProcPtr entry_expr(const FlatSpec& spec, const std::string& entry) {
  return resolve_process(spec, parse_process(entry));
}

Lts entry_lts(const FlatSpec& spec, const std::string& entry, const Limits& l) {
  if (is_identifier(entry) && spec.find_def(entry)) return build_lts(spec, entry, {}, l.max_states, l.semantics());
  return build_lts(spec, entry_expr(spec, entry), l.max_states, l.semantics());
}

std::unique_ptr<Session> open_session(std::shared_ptr<const FlatSpec> spec, const std::string& entry,
                                      std::uint64_t seed, HandlerTable handlers = {}) {
  if (is_identifier(entry) && spec->find_def(entry))
    return std::make_unique<Session>(spec, entry, seed, std::move(handlers));
  auto expr = entry_expr(*spec, entry);
  return std::make_unique<Session>(spec, expr, seed, std::move(handlers));
}

void render(std::ostream& err, const Error& e) {
  if (e.diagnostics().empty()) {
    err << "error: " << e.what() << "\n";
    return;
  }
  for (const auto& d : e.diagnostics())
    err << (d.severity == Severity::warning ? "warning: " : "error: ") << format_diagnostic(d) << "\n";
}

void render_warnings(std::ostream& err, const std::vector<Diagnostic>& ds) {
  for (const auto& d : ds)
    err << (d.severity == Severity::warning ? "warning: " : "error: ") << format_diagnostic(d) << "\n";
}

bool has_errors(const std::vector<Diagnostic>& ds) {
  for (const auto& d : ds)
    if (d.severity == Severity::error) return true;
  return false;
}

int verdict(std::ostream& out, const BisimResult& r) {
  if (r.equivalent) {
    out << "equivalent\n";
    return kOk;
  }
  out << "NOT equivalent\n";
  if (r.witness) out << format_witness(*r.witness);
  return kVerificationFailed;
}

void require_complete(const Lts& l, const std::string& what, const Limits& lim) {
  if (l.truncated)
    throw Error(what + ": state space exceeds --max-states " + std::to_string(lim.max_states) +
                "; the verdict would be unreliable");
}

// ---- interactive stepping

void print_enabled(const Session& s, std::ostream& out) {
  if (s.error()) out << "error: " << format_diagnostic(*s.error()) << " (undo or reset)\n";
  if (s.terminated()) out << "terminated\n";
  for (std::size_t i = 0; i < s.enabled().size(); ++i) {
    const auto& d = s.enabled()[i];
    out << "  [" << i << "] " << d.label.to_string();
    if (d.from_comm) out << "  (communication)";
    out << "\n";
  }
  if (s.enabled().empty() && !s.terminated()) out << "deadlock\n";
}

constexpr const char* kInteractiveHelp =
    "commands: N (fire transition N), LABEL (fire by label), i (run communications), u (undo), r (redo),\n"
    "          reset, t (trace), h (help), q (quit)\n";

void interactive(Session& s, std::istream& in, std::ostream& out) {
  out << kInteractiveHelp;
  print_enabled(s, out);
  std::string line;
  while (out << "> " << std::flush, std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    line = line.substr(b, line.find_last_not_of(" \t\r") - b + 1);
    try {
      if (line == "q") break;
      if (line == "h") {
        out << kInteractiveHelp;
        continue;
      }
      if (line == "t") {
        out << s.trace_text();
        continue;
      }
      if (line == "u") {
        if (!s.undo()) out << "nothing to undo\n";
      } else if (line == "r") {
        if (!s.redo()) out << "nothing to redo\n";
      } else if (line == "reset") {
        s.reset();
      } else if (line == "i") {
        out << s.run_internal() << " communication(s) fired\n";
      } else if (std::all_of(line.begin(), line.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        std::size_t idx = std::stoul(line);
        Binding values;
        if (idx < s.enabled().size())
          for (const auto& [name, sort] : placeholder_sorts(s.enabled()[idx].label)) {
            out << "  " << name << " : " << sort << " = " << std::flush;
            std::string v;
            if (!std::getline(in, v)) return;
            auto pattern = parse_atom("value(" + v + ")");
            if (pattern.args.size() != 1) throw Error("expected one term");
            values[name] = resolve_term(s.spec(), pattern.args[0], sort);
          }
        s.fire(idx, values);
      } else {
        s.fire_label(line);
      }
      if (!s.trace().empty()) out << "last: " << s.trace().back().label.to_string() << "\n";
    } catch (const Error& e) {
      out << "error: " << e.what() << "\n";
    }
    print_enabled(s, out);
  }
}

// ---- subcommands

struct Common {
  std::vector<std::string> files;
  std::string root;
  Limits limits;
};

int cmd_check(const Common& c, std::ostream& out, std::ostream& err) {
  auto loaded = load_spec(c.files, c.root);
  auto ds = check(loaded.spec);
  render_warnings(err, ds);
  if (has_errors(ds)) return kUsageError;
  out << "ok: " << loaded.root << " (" << loaded.user_count << " module(s), " << loaded.spec.defs.size()
      << " process equation(s), " << loaded.spec.atoms.size() << " atom(s))\n";
  return kOk;
}

int cmd_lts(const Common& c, const std::string& entry, const std::string& output, std::ostream& out,
            std::ostream& err) {
  auto loaded = load_spec(c.files, c.root);
  auto lts = entry_lts(loaded.spec, entry.empty() ? loaded.root : entry, c.limits);
  if (lts.truncated)
    err << "warning: LTS truncated at " << lts.num_states << " states (--max-states " << c.limits.max_states
        << ")\n";
  if (output.empty() || output == "-") {
    write_aut(out, lts);
  } else {
    std::ofstream f(output);
    if (!f) throw Error("cannot write '" + output + "'");
    write_aut(f, lts);
  }
  err << lts.num_states << " states, " << lts.transitions.size() << " transitions\n";
  return lts.truncated ? kVerificationFailed : kOk;
}

int cmd_bisim(const Common& c, const std::string& kind, const std::string& a, const std::string& b,
              const std::vector<std::string>& b_files, const std::string& b_root, std::ostream& out) {
  auto left = load_spec(c.files, c.root);
  auto right = b_files.empty() ? left : load_spec(b_files, b_root);
  auto la = entry_lts(left.spec, a, c.limits);
  auto lb = entry_lts(right.spec, b, c.limits);
  require_complete(la, a, c.limits);
  require_complete(lb, b, c.limits);
  return verdict(out, check_bisim(la, lb, kind == "strong" ? BisimKind::strong : BisimKind::rooted_weak));
}

std::string printed_def(const ProcessDef& d) {
  std::string head = d.name;
  if (!d.formals.empty()) {
    head += "(";
    for (std::size_t i = 0; i < d.formals.size(); ++i)
      head += (i ? ", " : "") + d.formals[i].var + " : " + d.formals[i].sort;
    head += ")";
  }
  return head + " = " + to_string(d.body);
}

int cmd_refine(const Common& c, const std::string& map, bool all, std::ostream& out) {
  auto loaded = load_spec(c.files, c.root);
  auto mapped = apply_mapping(loaded.spec, read_mapping(map));
  for (const auto& d : mapped.defs) {
    const ProcessDef* before = loaded.spec.find_def(d.name);
    if (all || !before || to_string(before->body) != to_string(d.body)) out << printed_def(d) << "\n";
  }
  return kOk;
}

int cmd_verify(const Common& c, const std::string& map, const std::vector<std::string>& target_files,
               const std::string& target_root, const std::string& source_entry, const std::string& target_entry,
               std::ostream& out) {
  auto src = load_spec(c.files, c.root);
  auto tgt = load_spec(target_files, target_root);
  auto report = check_refinement(src.spec, read_mapping(map), tgt.spec, source_entry, target_entry,
                                 c.limits.max_states, c.limits.semantics());
  require_complete(report.source, source_entry, c.limits);
  require_complete(report.target, target_entry, c.limits);
  return verdict(out, report.result);
}

int cmd_csgen(const Common& c, const std::string& manifest, const std::string& output, bool check_system,
              std::ostream& out, std::ostream& err) {
  std::vector<ModuleDef> user;
  for (const auto& f : c.files)
    for (auto& m : parse_file(f)) user.push_back(std::move(m));
  auto g = generate_interfaces(user, read_manifest(manifest));
  render_warnings(err, g.warnings);
  if (output.empty() || output == "-") {
    out << g.text();
  } else {
    std::ofstream f(output);
    if (!f) throw Error("cannot write '" + output + "'");
    f << g.text();
  }
  if (!check_system) return kOk;

  auto spec = link_composition(user, g);
  auto lts = build_lts(spec, g.root_process, {}, c.limits.max_states, c.limits.semantics());
  std::size_t leaked = 0;
  for (const auto& t : lts.transitions)
    if (!t.label.tau && (t.label.atom.rfind("cs-snd-", 0) == 0 || t.label.atom.rfind("cs-rec-", 0) == 0)) ++leaked;
  auto report = quit_shutdown_closure(lts, g.components.size());
  err << lts.num_states << " states, " << lts.transitions.size() << " transitions"
      << (lts.truncated ? " (truncated)" : "") << "\n";
  err << "unencapsulated cs- send/receive transitions: " << leaked << "\n";
  err << format_report(report);
  return !lts.truncated && leaked == 0 && report.ok() ? kOk : kVerificationFailed;
}

struct SimOptions {
  std::string entry;
  std::string script;
  std::string policy = "interactive";
  std::uint64_t seed = 0;
  std::size_t steps = 1000;
  bool auto_internal = false;
};

int run_session(Session& s, const SimOptions& o, std::istream& in, std::ostream& out) {
  if (!o.script.empty()) {
    run_auto(s, ScriptPolicy{read_script(o.script), o.auto_internal}, o.steps);
  } else if (o.policy == "random") {
    run_auto(s, RandomPolicy{o.seed}, o.steps);
  } else {
    interactive(s, in, out);
    return kOk;
  }
  out << s.trace_text();
  return kOk;
}

int cmd_sim(const Common& c, const SimOptions& o, std::istream& in, std::ostream& out) {
  auto loaded = load_spec(c.files, c.root);
  auto spec = std::make_shared<const FlatSpec>(std::move(loaded.spec));
  auto s = open_session(spec, o.entry.empty() ? loaded.root : o.entry, o.seed);
  return run_session(*s, o, in, out);
}

int cmd_demo(const SimOptions& o, const std::string& op, long long x, long long y, bool print_source,
             std::istream& in, std::ostream& out, std::ostream& err) {
  auto demo = calculator_demo();
  if (print_source) {
    out << calculator_source() << "\n" << demo.source;
    return kOk;
  }
  Session s(demo.spec, demo.root, o.seed, demo.handlers);
  if (!op.empty()) {
    run_auto(s, ScriptPolicy{calculator_script(op, x, y), true});
    out << s.trace_text();
    auto r = last_result(s);
    if (!r) throw Error("the operator received no result");
    err << "result: " << *r << "\n";
    return kOk;
  }
  SimOptions so = o;
  if (!so.script.empty()) so.auto_internal = true;
  int rc = run_session(s, so, in, out);
  if (auto r = last_result(s); r && (!so.script.empty() || so.policy == "random")) err << "result: " << *r << "\n";
  return rc;
}

int cmd_serve(int port, const std::string& host, const std::string& specs, bool stdio, std::istream& in,
              std::ostream& out, std::ostream& err) {
  std::vector<std::string> skipped;
  Catalog catalog = specs.empty() ? Catalog::builtin() : Catalog::load_dir(specs, &skipped);
  for (const auto& s : skipped) err << "warning: skipped " << s << "\n";
  Service service(std::move(catalog));
  if (stdio) {
    serve_stream(service, in, out);
    return kOk;
  }
  g_stop = false;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  serve_tcp(service, host, port, g_stop, [&](int p) { err << "listening on " << host << ":" << p << std::endl; });
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Client/server process specifications: checking, refinement, interface generation, simulation"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  Common common;
  auto add_inputs = [&](CLI::App* cmd, bool limits) {
    cmd->add_option("files", common.files, "Specification files")->required()->check(CLI::ExistingFile);
    cmd->add_option("--root", common.root, "Module to flatten from (default: last module)");
    if (limits) add_limits(cmd, common.limits);
  };

  auto* check_cmd = app.add_subcommand("check", "Parse and link, report diagnostics");
  add_inputs(check_cmd, false);

  std::string entry, output;
  auto* lts_cmd = app.add_subcommand("lts", "Write the labelled transition system of a process (aut format)");
  add_inputs(lts_cmd, true);
  lts_cmd->add_option("--entry", entry, "Process name or expression (default: root module name)");
  lts_cmd->add_option("-o,--output", output, "Output file (default: stdout)");

  std::string kind = "strong", a, b, b_root;
  std::vector<std::string> b_files;
  auto* bisim_cmd = app.add_subcommand("bisim", "Compare two processes");
  add_inputs(bisim_cmd, true);
  bisim_cmd->add_option("--kind", kind, "strong or rweak (rooted weak)")
      ->check(CLI::IsMember({"strong", "rweak"}))
      ->capture_default_str();
  bisim_cmd->add_option("-a,--left", a, "Left process name or expression")->required();
  bisim_cmd->add_option("-b,--right", b, "Right process name or expression")->required();
  bisim_cmd->add_option("--right-files", b_files, "Files for the right process (default: the same)")
      ->check(CLI::ExistingFile);
  bisim_cmd->add_option("--right-root", b_root, "Root module for --right-files");

  std::string map;
  bool all_defs = false;
  auto* refine_cmd = app.add_subcommand("refine", "Apply a refinement mapping and print the changed equations");
  add_inputs(refine_cmd, false);
  refine_cmd->add_option("--map", map, "Mapping file")->required()->check(CLI::ExistingFile);
  refine_cmd->add_flag("--all", all_defs, "Print every equation");

  std::vector<std::string> target_files;
  std::string target_root, source_entry, target_entry;
  auto* verify_cmd = app.add_subcommand("verify", "Check that a mapped process is rooted weakly bisimilar to its refinement");
  add_inputs(verify_cmd, true);
  verify_cmd->add_option("--map", map, "Mapping file")->required()->check(CLI::ExistingFile);
  verify_cmd->add_option("--target", target_files, "Files of the refined specification")
      ->required()
      ->check(CLI::ExistingFile);
  verify_cmd->add_option("--target-root", target_root, "Root module of the refined specification");
  verify_cmd->add_option("--source-entry", source_entry, "Abstract process")->required();
  verify_cmd->add_option("--target-entry", target_entry, "Refined process")->required();

  std::string manifest;
  bool check_system = false;
  auto* csgen_cmd = app.add_subcommand("csgen", "Generate client/server interfaces for the components in a manifest");
  add_inputs(csgen_cmd, true);
  csgen_cmd->add_option("--manifest", manifest, "Component manifest (id : Process per line)")
      ->required()
      ->check(CLI::ExistingFile);
  csgen_cmd->add_option("-o,--output", output, "Output file (default: stdout)");
  csgen_cmd->add_flag("--check", check_system, "Also explore the composed system: encapsulation and shutdown");

  SimOptions sim;
  auto add_sim = [&](CLI::App* cmd) {
    cmd->add_option("--script", sim.script, "One label per line")->check(CLI::ExistingFile);
    cmd->add_option("--policy", sim.policy, "interactive or random")
        ->check(CLI::IsMember({"interactive", "random"}))
        ->capture_default_str();
    cmd->add_option("--seed", sim.seed, "Seed for the random policy")->capture_default_str();
    cmd->add_option("--steps", sim.steps, "Step limit for scripted and random runs")->capture_default_str();
  };
  auto* sim_cmd = app.add_subcommand("sim", "Step through a process interactively, by script or at random");
  add_inputs(sim_cmd, false);
  sim_cmd->add_option("--entry", sim.entry, "Process name or expression (default: root module name)");
  sim_cmd->add_flag("--auto-internal", sim.auto_internal, "Fire communications after every scripted step");
  add_sim(sim_cmd);

  int port = 7420;
  std::string host = "127.0.0.1", specs;
  bool stdio = false;
  auto* serve_cmd = app.add_subcommand("serve", "Run the session service (newline-delimited JSON)");
  serve_cmd->add_option("--port", port, "TCP port (0 picks a free one)")->capture_default_str();
  serve_cmd->add_option("--host", host, "IPv4 address to listen on")->capture_default_str();
  serve_cmd->add_option("--specs", specs, "Directory with catalog.json or .psf files")->check(CLI::ExistingDirectory);
  serve_cmd->add_flag("--stdio", stdio, "Serve on stdin/stdout instead of TCP");

  std::string op;
  long long x = 0, y = 0;
  bool print_source = false;
  auto* demo_cmd = app.add_subcommand("demo", "The calculator application");
  demo_cmd->add_option("--op", op, "Run one operation and print its trace")
      ->check(CLI::IsMember({"succ", "pred", "iszero", "add", "subtract", "multiply", "divide"}));
  demo_cmd->add_option("--x", x, "First operand");
  demo_cmd->add_option("--y", y, "Second operand");
  demo_cmd->add_flag("--print-source", print_source, "Print the component and generated modules");
  add_sim(demo_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsageError;
  }

  try {
    if (*check_cmd) return cmd_check(common, out, err);
    if (*lts_cmd) return cmd_lts(common, entry, output, out, err);
    if (*bisim_cmd) return cmd_bisim(common, kind, a, b, b_files, b_root, out);
    if (*refine_cmd) return cmd_refine(common, map, all_defs, out);
    if (*verify_cmd)
      return cmd_verify(common, map, target_files, target_root, source_entry, target_entry, out);
    if (*csgen_cmd) return cmd_csgen(common, manifest, output, check_system, out, err);
    if (*sim_cmd) return cmd_sim(common, sim, in, out);
    if (*serve_cmd) return cmd_serve(port, host, specs, stdio, in, out, err);
    if (*demo_cmd) return cmd_demo(sim, op, x, y, print_source, in, out, err);
  } catch (const Error& e) {
    render(err, e);
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }
  return kUsageError;
}

}  // namespace psf::cli
