#pragma once

#include <memory>
#include <string>
#include <vector>

#include "psf/diagnostics.hpp"
#include "psf/terms.hpp"

namespace psf {

/// Named or inline set of atom patterns, e.g. "{ s-snd-call(n, s), s-rec-call(s) | n in ID, s in SERVICE }".
struct AtomSetDef {
  std::string name;  // empty for an inline set
  std::vector<AtomPattern> members;
  std::vector<Binder> quantifiers;
  SourceLoc loc;

  /// True when some member matches the ground (or rigid-symbolic) label.
  bool contains(const ActionLabel& label) const;
};
using AtomSetPtr = std::shared_ptr<const AtomSetDef>;

bool operator==(const AtomSetDef& a, const AtomSetDef& b);
std::string to_string(const AtomSetDef& s);  // "{ members | binders }"

struct Proc;
using ProcPtr = std::shared_ptr<const Proc>;

/// Process expression node. Immutable and shared; a structural hash is
/// computed at construction so that equality checks are cheap.
///
/// `name` kinds are unresolved call sites straight from the parser (the
/// linker decides between atom and process instantiation). `done` is the
/// successfully terminated process and `scope` is a transparent marker that
/// names the process instance a subtree was unfolded from.
struct Proc {
  enum class Kind { atom, inst, name, delta, skip, alt, seq, par, sum, encaps, hide, disrupt, star, done, scope };

  Kind kind = Kind::delta;
  std::string name;  // atom / process / scope name, or the sum variable
  std::string sort;  // sum sort
  std::vector<TermPtr> args;
  ProcPtr left, right;   // operands; unary operators keep their body in `left`
  std::string set_ref;   // encaps/hide: name of the set as written, empty when inline
  AtomSetPtr set;        // encaps/hide: the set itself
  bool ground = true;    // no free data variables in any argument
  bool settled = true;   // no process instantiation in a structural position
  bool symbolic = false; // mentions a placeholder variable
  std::size_t hash = 0;
};

ProcPtr p_atom(std::string name, std::vector<TermPtr> args = {});
ProcPtr p_inst(std::string name, std::vector<TermPtr> args = {});
ProcPtr p_name(std::string name, std::vector<TermPtr> args = {});
ProcPtr p_delta();
ProcPtr p_skip();
ProcPtr p_done();
ProcPtr p_alt(ProcPtr l, ProcPtr r);
ProcPtr p_seq(ProcPtr l, ProcPtr r);
ProcPtr p_par(ProcPtr l, ProcPtr r);
ProcPtr p_sum(std::string var, std::string sort, ProcPtr body);
ProcPtr p_encaps(std::string set_ref, AtomSetPtr set, ProcPtr body);
ProcPtr p_hide(std::string set_ref, AtomSetPtr set, ProcPtr body);
ProcPtr p_disrupt(ProcPtr body, ProcPtr disruptor);
ProcPtr p_star(ProcPtr body, ProcPtr exit);
ProcPtr p_scope(std::string name, std::vector<TermPtr> args, ProcPtr body);

/// Copy of `p` with new operands (same kind, name, set, args).
ProcPtr rebuild(const ProcPtr& p, ProcPtr left, ProcPtr right);
ProcPtr rebuild_args(const ProcPtr& p, std::vector<TermPtr> args);

std::string to_string(const ProcPtr& p);
bool equal(const ProcPtr& a, const ProcPtr& b);

struct ProcHash {
  std::size_t operator()(const ProcPtr& p) const { return p->hash; }
};
struct ProcEq {
  bool operator()(const ProcPtr& a, const ProcPtr& b) const { return equal(a, b); }
};

/// Positions whose operands are live components: the operands of ||, the
/// bodies of encaps, hide and scope, and both sides of disrupt.
bool is_structural(Proc::Kind k);

/// Replaces free data variables; sum binders shadow.
ProcPtr substitute(const ProcPtr& p, const Binding& b);

/// Flattens nested alternatives, orders them by printed form and drops
/// duplicates, and associates sequences to the right, recursively. The result is the canonical representative used
/// for state identity.
ProcPtr canonicalize(const ProcPtr& p);

/// Alternatives of a (possibly nested) choice, left to right.
void collect_alternatives(const ProcPtr& p, std::vector<ProcPtr>& out);

/// Visits every node in pre-order.
template <class F>
void visit(const ProcPtr& p, F&& f) {
  f(p);
  if (p->left) visit(p->left, f);
  if (p->right) visit(p->right, f);
}

}  // namespace psf
