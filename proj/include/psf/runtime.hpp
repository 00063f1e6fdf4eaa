#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "psf/cslib.hpp"
#include "psf/semantics.hpp"

namespace psf {

class Session;

/// Issues calls from a handler-backed server to other servers. Each call is
/// driven through the algebra: c-call, cs-request, s-call, s-return,
/// cs-result and c-return are fired in the session and recorded in its trace.
class Stub {
 public:
  Stub(Session& session, std::string self) : session_(session), self_(std::move(self)) {}

  const std::string& self() const { return self_; }
  /// Calls `service` (a ground SERVICE term) on `server`; returns the result.
  TermPtr call(const std::string& server, const TermPtr& service);
  /// Convenience for services over numbers: call(server, name(args...)).
  long long call(const std::string& server, const std::string& name, const std::vector<long long>& args);

 private:
  Session& session_;
  std::string self_;
};

/// Native implementation of one service: ground SERVICE term in, ground
/// RESULT term out.
using Handler = std::function<TermPtr(const TermPtr& service, Stub& stub)>;

/// Handlers keyed by (server ID constant, service constructor name).
class HandlerTable {
 public:
  void bind(const std::string& server, const std::string& service, Handler h);
  const Handler* find(const std::string& server, const TermPtr& service) const;
  bool serves(const std::string& server) const;  // some handler is bound for `server`
  bool empty() const { return table_.empty(); }

 private:
  std::map<std::pair<std::string, std::string>, Handler> table_;
};

/// One enabled transition.
struct Descriptor {
  ActionLabel label;   // may contain placeholders ("?x#n") when `symbolic`
  Config target;
  std::vector<std::string> participants;
  bool from_comm = false;
  bool symbolic = false;        // needs values for its placeholders before it can fire
  bool handler_result = false;  // s-return instantiated with a pending handler result
  std::string preview() const;  // printed target, shortened
};

struct TraceEvent {
  std::size_t index = 0;
  ActionLabel label;
  std::vector<std::string> participants;
};

/// Placeholder names of a label, in order of occurrence.
std::vector<std::string> placeholders(const ActionLabel& label);
/// (name, sort) per placeholder, in order of occurrence.
std::vector<std::pair<std::string, std::string>> placeholder_sorts(const ActionLabel& label);

/// Interactive simulation of one configuration. Not thread-safe: callers
/// serialise operations on a session; separate sessions are independent.
class Session {
 public:
  Session(std::shared_ptr<const FlatSpec> spec, const std::string& root, std::uint64_t seed = 0,
          HandlerTable handlers = {});
  Session(std::shared_ptr<const FlatSpec> spec, const ProcPtr& root_expr, std::uint64_t seed = 0,
          HandlerTable handlers = {});

  const FlatSpec& spec() const { return *spec_; }
  const Config& current() const { return current_; }
  bool terminated() const { return is_terminated(current_); }
  const std::vector<Descriptor>& enabled() const { return enabled_; }
  const std::vector<TraceEvent>& trace() const { return trace_; }
  /// Set after a handler failure; cleared by undo or reset.
  const std::optional<Diagnostic>& error() const { return error_; }
  std::uint64_t seed() const { return seed_; }

  /// Fires enabled()[index]. Placeholders of a symbolic descriptor take
  /// `values` (placeholder name -> ground term); missing values are an error.
  void fire(std::size_t index, const Binding& values = {});
  /// Fires the enabled transition whose label prints as `label` (after
  /// parsing and resolving it), or a symbolic one that matches it. Returns
  /// the index fired.
  std::size_t fire_label(const std::string& label);
  /// Fires communications (labels produced by a communication rule) in
  /// enabled order until none is enabled or `max_steps` is reached. Returns
  /// the number fired.
  std::size_t run_internal(std::size_t max_steps = 100000);

  bool undo();
  bool redo();
  bool can_undo() const { return !undo_.empty(); }
  bool can_redo() const { return !redo_.empty(); }
  void reset();

  /// Events whose label matches `pattern` ("_" and variables match anything).
  std::size_t count(const std::string& pattern) const;
  /// "idx<TAB>label" per event.
  std::string trace_text() const;

 private:
  friend class Stub;
  struct Snapshot {
    Config current;
    std::size_t trace_size = 0;
    std::vector<TraceEvent> trace_tail;  // events removed by undo, for redo
    std::map<std::string, std::deque<TermPtr>> pending;
    std::optional<Diagnostic> error;
  };

  void init(const ProcPtr& root);
  void refresh();
  /// Derivatives of the current state with pending handler results filled
  /// in; `hide` drops the moves that only stubs may drive.
  std::vector<Descriptor> describe(bool hide) const;
  Snapshot snapshot() const;
  void restore(const Snapshot& s);
  /// Applies a ground descriptor and runs a handler when an s-call fires.
  void apply(const Descriptor& d);
  Descriptor instantiate(const Descriptor& d, const Binding& values) const;
  void require_ok() const;

  std::shared_ptr<const FlatSpec> spec_;
  std::unique_ptr<Semantics> sem_;
  HandlerTable handlers_;
  std::uint64_t seed_ = 0;
  Config initial_;
  Config current_;
  std::vector<Descriptor> enabled_;
  std::vector<TraceEvent> trace_;
  std::map<std::string, std::deque<TermPtr>> pending_;  // handler results per server
  std::optional<Diagnostic> error_;
  std::vector<Snapshot> undo_;
  std::vector<Snapshot> redo_;  // states undone, with the events they had added
  int handler_depth_ = 0;
};

/// Automatic drivers.
struct RandomPolicy {
  std::uint64_t seed = 0;
  long long max_value = 9;  // placeholders are filled with literals 0..max_value
};
struct ScriptPolicy {
  std::vector<std::string> labels;
  bool auto_internal = false;  // run_internal() after every scripted step
};

/// Fires up to `max_steps` transitions chosen by `policy`; stops early on
/// termination or when nothing can fire. Script labels that are not enabled
/// throw psf::Error naming the script step.
void run_auto(Session& s, const RandomPolicy& policy, std::size_t max_steps);
void run_auto(Session& s, const ScriptPolicy& policy, std::size_t max_steps = SIZE_MAX);

/// One label per line; "--" starts a comment; blank lines are skipped.
std::vector<std::string> parse_script(std::string_view text);
std::vector<std::string> read_script(const std::string& path);

/// The calculator application: an interactive operator with a number stack
/// and three handler-backed servers (primitive: succ, pred, iszero; basic:
/// add, subtract; complex: mul, div). Basic and complex call downward
/// through stubs.
struct CalculatorDemo {
  std::shared_ptr<const FlatSpec> spec;
  std::string root;
  std::vector<ComponentDecl> components;
  HandlerTable handlers;
  std::string source;  // generated composition text
};
CalculatorDemo calculator_demo();
std::string_view calculator_source();  // the demo's component modules

/// Script lines that enter `x` and `y`, then press `op` ("succ", "pred",
/// "iszero" use only `x`). Run with auto_internal.
std::vector<std::string> calculator_script(const std::string& op, long long x, long long y = 0);
/// Value on top of the operator's stack after the last completed call, read
/// from the trace (the last c-return to the operator).
std::optional<long long> last_result(const Session& s);

}  // namespace psf
