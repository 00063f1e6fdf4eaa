#pragma once

#include <cstddef>
#include <memory>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "psf/linker.hpp"

namespace psf {

/// A configuration is a process expression; `done` means terminated.
using Config = ProcPtr;

inline bool is_terminated(const Config& c) { return c->kind == Proc::Kind::done; }

/// One derivative of a configuration.
struct Move {
  ActionLabel label;
  Config target;
  std::vector<std::string> participants;  // scope paths of the process instances taking part
  bool from_comm = false;
};

struct SemanticsOptions {
  int depth_bound = 6;              // bound for enumerating recursive sorts in sums
  bool track_participants = false;  // fill Move::participants
  int unfold_budget = 1000;         // consecutive unfoldings before "unguarded recursion"
};

/// Operational semantics over one flat specification. Derivatives are cached
/// per node, so an instance should live as long as the exploration that uses it.
/// Not thread-safe; use one instance per thread.
class Semantics {
 public:
  explicit Semantics(const FlatSpec& spec, SemanticsOptions opts = {});

  const FlatSpec& spec() const { return spec_; }
  const SemanticsOptions& options() const { return opts_; }

  /// Initial configuration of `entry(args)`.
  Config initial(const std::string& entry, const std::vector<TermPtr>& args = {});
  /// Initial configuration of a resolved expression.
  Config initial(const ProcPtr& expr);

  /// All derivatives in deterministic order, duplicates removed. Labels may
  /// contain symbolic variables ("?x#n") standing for a pending choice over
  /// an infinite sort.
  std::vector<Move> moves(const Config& c);

  /// Ground derivatives only; throws psf::Error when a derivative would need a
  /// value from an infinite sort that no communication supplies.
  std::vector<std::pair<ActionLabel, Config>> step(const Config& c);

  /// Unfolds instantiations in live positions and wraps them in scopes.
  Config settle(const Config& c);

  void clear_cache();

 private:
  using MoveList = std::shared_ptr<const std::vector<Move>>;

  MoveList derive(const ProcPtr& p, int depth);
  ProcPtr unfold(const ProcPtr& inst, int depth);
  ProcPtr settle(const ProcPtr& p, int depth);
  const std::vector<TermPtr>& values_of(const std::string& sort);
  TermPtr fresh(const std::string& var, const std::string& sort);

  ProcPtr mk_seq(const ProcPtr& l, const ProcPtr& r);
  ProcPtr mk_par(const ProcPtr& p, const ProcPtr& l, const ProcPtr& r);
  ProcPtr mk_unary(const ProcPtr& p, const ProcPtr& body);
  ProcPtr mk_disrupt(const ProcPtr& p, const ProcPtr& body);

  const FlatSpec& spec_;
  SemanticsOptions opts_;
  std::unordered_map<const Proc*, std::pair<ProcPtr, MoveList>> cache_;
  std::unordered_map<const Proc*, std::pair<ProcPtr, ProcPtr>> unfold_cache_;
  std::unordered_map<std::string, std::vector<TermPtr>> values_;
  std::unordered_map<std::string, bool> finite_;
  std::size_t fresh_counter_ = 0;
};

/// Free-function form of Semantics::step.
std::vector<std::pair<ActionLabel, Config>> step(const FlatSpec& spec, const Config& c);

struct Transition {
  std::size_t from = 0;
  ActionLabel label;
  std::size_t to = 0;
};

struct Lts {
  std::size_t num_states = 0;
  std::vector<Config> states;  // configurations when built from a specification, else empty
  std::vector<Transition> transitions;
  std::size_t initial = 0;
  std::vector<bool> terminating;  // per state
  bool truncated = false;

  std::size_t add_state(bool terminates = false);
  void add_transition(std::size_t from, ActionLabel label, std::size_t to);
};

/// Breadth-first closure from `entry(args)`, states identified structurally.
Lts build_lts(const FlatSpec& spec, const std::string& entry, const std::vector<TermPtr>& args = {},
              std::size_t max_states = 100000, SemanticsOptions opts = {});
Lts build_lts(const FlatSpec& spec, const ProcPtr& expr, std::size_t max_states = 100000,
              SemanticsOptions opts = {});

/// Writes the "des (initial, #transitions, #states)" format, one
/// "(from,\"label\",to)" line per transition.
void write_aut(std::ostream& os, const Lts& lts);
std::string to_aut(const Lts& lts);

}  // namespace psf
