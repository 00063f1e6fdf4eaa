#pragma once

#include <optional>
#include <string>
#include <vector>

#include "psf/semantics.hpp"

namespace psf {

enum class BisimKind { strong, rooted_weak };
enum class MinimizeKind { strong, weak };

/// One round of the distinguishing game. The attacker moves on `side` with
/// `label`; the defender answers on the other side, or cannot (`matched` is
/// false, which ends the experiment). A step with `termination` set means the
/// attacker's state can terminate and the defender's cannot.
struct WitnessStep {
  enum class Side { left, right };
  Side side = Side::left;
  ActionLabel label;
  std::size_t attacker_from = 0, attacker_to = 0;
  bool matched = false;
  std::size_t defender_from = 0, defender_to = 0;
  bool termination = false;
  bool root = false;  // rooted-weak root condition: tau must be answered by at least one tau
};

struct BisimResult {
  bool equivalent = false;
  std::optional<std::vector<WitnessStep>> witness;  // present iff not equivalent
};

BisimResult strong_bisim(const Lts& a, const Lts& b);
BisimResult rooted_weak_bisim(const Lts& a, const Lts& b);
BisimResult check_bisim(const Lts& a, const Lts& b, BisimKind kind);

/// Weak-transition closure: s =tau=> t for every t reachable by tau* (s
/// itself included), s =a=> u for tau* a tau*. States are unchanged; a state
/// terminates when it reaches a terminating state by tau*.
Lts tau_saturate(const Lts& a);

/// Quotient by strong or weak bisimilarity; blocks are numbered in order of
/// their first state. Weak quotients drop tau self-loops.
Lts minimize(const Lts& a, MinimizeKind kind);

/// Replays a witness on both LTSs: every claimed move must exist (weak moves
/// for rooted_weak) and the final step must
/// leave the defender without a matching move.
bool replay_witness(const Lts& a, const Lts& b, const std::vector<WitnessStep>& witness, BisimKind kind);

/// "left  a\nright c  (left cannot match)" style script.
std::string format_witness(const std::vector<WitnessStep>& witness);

}  // namespace psf
