#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace psf {

/// Name of the built-in sort of natural-number literals.
inline constexpr const char* kNatSort = "NAT";
/// Constructor name of the infix channel pairing "a >> b".
inline constexpr const char* kChannelOp = ">>";

struct Term;
using TermPtr = std::shared_ptr<const Term>;

/// Data term: a variable, a constructor application, or a natural literal.
/// Terms are immutable and freely shared. The sort is empty until linking.
struct Term {
  enum class Kind { var, app, lit };

  Kind kind = Kind::app;
  std::string name;
  std::string sort;
  std::vector<TermPtr> args;
  long long value = 0;
  bool ground = true;
  bool symbolic = false;  // contains a placeholder variable ("?x#n") for a pending choice
  std::size_t hash = 0;   // structural hash, set by the make_* functions
};

/// Placeholder variables introduced for sums over infinite sorts start with '?'.
inline bool is_symbolic_name(const std::string& n) { return !n.empty() && n[0] == '?'; }

TermPtr make_var(std::string name, std::string sort = {});
TermPtr make_app(std::string name, std::vector<TermPtr> args = {}, std::string sort = {});
TermPtr make_lit(long long value, std::string sort = {});

inline bool is_ground(const TermPtr& t) { return t->ground; }
bool is_ground(const std::vector<TermPtr>& ts);

bool equal(const TermPtr& a, const TermPtr& b);
bool equal(const std::vector<TermPtr>& a, const std::vector<TermPtr>& b);

std::string to_string(const TermPtr& t);
std::string to_string(const std::vector<TermPtr>& args);  // "(a, b)" or "" when empty

/// Variable name -> replacement.
using Binding = std::map<std::string, TermPtr>;

/// Replaces bound variables. Throws psf::Error when a variable's sort differs
/// from the sort of its replacement (both known).
TermPtr substitute(const TermPtr& t, const Binding& b);
std::vector<TermPtr> substitute(const std::vector<TermPtr>& ts, const Binding& b);

/// Names of variables occurring in t, appended in first-occurrence order.
void collect_vars(const TermPtr& t, std::vector<std::string>& out);

struct Binder {
  std::string var;
  std::string sort;

  friend bool operator==(const Binder&, const Binder&) = default;
};

/// Atom with argument terms. Used for patterns in communications and atom sets.
struct AtomPattern {
  std::string name;
  std::vector<TermPtr> args;
};
bool operator==(const AtomPattern& a, const AtomPattern& b);
std::string to_string(const AtomPattern& p);

/// Label of a transition: tau, or an atom applied to (normally ground) terms.
struct ActionLabel {
  bool tau = false;
  std::string atom;
  std::vector<TermPtr> args;

  static ActionLabel silent() { return ActionLabel{true, {}, {}}; }
  static ActionLabel act(std::string atom, std::vector<TermPtr> args = {}) {
    return ActionLabel{false, std::move(atom), std::move(args)};
  }

  bool is_ground() const { return tau || psf::is_ground(args); }
  std::string to_string() const;
};
bool operator==(const ActionLabel& a, const ActionLabel& b);

/// One-way matching of a pattern against a label. Variables of the pattern
/// bind; variables inside the label are treated as rigid symbols. Returns the
/// unique binding or nothing.
std::optional<Binding> match_action(const AtomPattern& pattern, const std::vector<Binder>& quantifiers,
                                    const ActionLabel& label);

/// Term-level one-way match, extending `b`.
bool match_term(const TermPtr& pattern, const TermPtr& t, Binding& b);

/// Syntactic unification over all variables (occurs check, sort check).
/// Returns a triangular substitution; use `resolve` to apply it.
std::optional<Binding> unify(const std::vector<std::pair<TermPtr, TermPtr>>& equations, Binding seed = {});
TermPtr resolve(const TermPtr& t, const Binding& b);

}  // namespace psf
