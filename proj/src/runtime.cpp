#include "psf/runtime.hpp"

#include <sstream>

#include "library_data.hpp"
#include "psf/parser.hpp"

namespace psf {

namespace {

constexpr int kMaxHandlerDepth = 64;
constexpr std::size_t kMaxStubSteps = 1000000;

void collect_placeholders(const TermPtr& t, std::vector<std::pair<std::string, std::string>>& out) {
  if (t->kind == Term::Kind::var) {
    if (!is_symbolic_name(t->name)) return;
    for (const auto& [n, s] : out)
      if (n == t->name) return;
    out.emplace_back(t->name, t->sort);
    return;
  }
  for (const auto& a : t->args) collect_placeholders(a, out);
}

/// `have` is a transition's term (placeholders bind), `want` a requested
/// term (variables match anything).
bool match_request(const TermPtr& have, const TermPtr& want, Binding& b) {
  if (want->kind == Term::Kind::var) return true;
  if (have->kind == Term::Kind::var) {
    if (!is_symbolic_name(have->name) || !want->ground) return false;
    auto it = b.find(have->name);
    if (it != b.end()) return to_string(it->second) == to_string(want);
    b[have->name] = want;
    return true;
  }
  if (have->kind != want->kind) return false;
  if (have->kind == Term::Kind::lit) return have->value == want->value;
  if (have->name != want->name || have->args.size() != want->args.size()) return false;
  for (std::size_t i = 0; i < have->args.size(); ++i)
    if (!match_request(have->args[i], want->args[i], b)) return false;
  return true;
}

bool match_label(const ActionLabel& have, const AtomPattern& want, Binding& b) {
  if (have.tau) return want.name == "tau" && want.args.empty();
  if (have.atom != want.name || have.args.size() != want.args.size()) return false;
  for (std::size_t i = 0; i < have.args.size(); ++i)
    if (!match_request(have.args[i], want.args[i], b)) return false;
  return true;
}

bool is_atom(const ActionLabel& l, const char* name, std::size_t arity) {
  return !l.tau && l.atom == name && l.args.size() == arity;
}

std::string arg(const ActionLabel& l, std::size_t i) { return to_string(l.args[i]); }

}  // namespace

std::vector<std::pair<std::string, std::string>> placeholder_sorts(const ActionLabel& l) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& a : l.args) collect_placeholders(a, out);
  return out;
}

std::vector<std::string> placeholders(const ActionLabel& label) {
  std::vector<std::string> out;
  for (const auto& [n, s] : placeholder_sorts(label)) out.push_back(n);
  return out;
}

std::string Descriptor::preview() const {
  std::string s = to_string(target);
  if (s.size() > 160) s = s.substr(0, 157) + "...";
  return s;
}

// ---------------------------------------------------------------------------
// Handlers

void HandlerTable::bind(const std::string& server, const std::string& service, Handler h) {
  table_[{server, service}] = std::move(h);
}

const Handler* HandlerTable::find(const std::string& server, const TermPtr& service) const {
  if (service->kind != Term::Kind::app) return nullptr;
  auto it = table_.find({server, service->name});
  return it == table_.end() ? nullptr : &it->second;
}

bool HandlerTable::serves(const std::string& server) const {
  auto it = table_.lower_bound({server, std::string()});
  return it != table_.end() && it->first.first == server;
}

// ---------------------------------------------------------------------------
// Session

Session::Session(std::shared_ptr<const FlatSpec> spec, const std::string& root, std::uint64_t seed,
                 HandlerTable handlers)
    : spec_(std::move(spec)), handlers_(std::move(handlers)), seed_(seed) {
  SemanticsOptions o;
  o.track_participants = true;
  sem_ = std::make_unique<Semantics>(*spec_, o);
  init(sem_->initial(root));
}

Session::Session(std::shared_ptr<const FlatSpec> spec, const ProcPtr& root_expr, std::uint64_t seed,
                 HandlerTable handlers)
    : spec_(std::move(spec)), handlers_(std::move(handlers)), seed_(seed) {
  SemanticsOptions o;
  o.track_participants = true;
  sem_ = std::make_unique<Semantics>(*spec_, o);
  init(sem_->initial(root_expr));
}

void Session::init(const ProcPtr& root) {
  initial_ = root;
  current_ = root;
  refresh();
}

std::vector<Descriptor> Session::describe(bool hide) const {
  std::vector<Descriptor> out;
  for (const auto& m : sem_->moves(current_)) {
    Descriptor d{m.label, m.target, m.participants, m.from_comm, !m.label.is_ground(), false};
    if (d.symbolic && is_atom(d.label, "s-return", 2) && d.label.args[0]->ground) {
      std::string srv = arg(d.label, 0);
      auto it = pending_.find(srv);
      if (it != pending_.end() && !it->second.empty()) {
        Binding b;
        if (match_request(d.label.args[1], it->second.front(), b)) {
          d = instantiate(d, b);
          d.handler_result = true;
        }
      } else if (hide && handlers_.serves(srv)) {
        continue;
      }
    }
    if (hide && d.symbolic && is_atom(d.label, "c-call", 3) && d.label.args[0]->ground &&
        handlers_.serves(arg(d.label, 0)))
      continue;
    out.push_back(std::move(d));
  }
  return out;
}

void Session::refresh() { enabled_ = describe(true); }

Descriptor Session::instantiate(const Descriptor& d, const Binding& values) const {
  Binding b;
  for (const auto& [name, sort] : placeholder_sorts(d.label)) {
    auto it = values.find(name);
    if (it == values.end()) throw Error("no value given for " + name + " in " + d.label.to_string());
    TermPtr v = it->second;
    if (!v->ground) throw Error("value for " + name + " must be ground: " + to_string(v));
    if (v->sort != sort) v = resolve_term(*spec_, v, sort);
    b[name] = v;
  }
  Descriptor out = d;
  out.label.args = substitute(d.label.args, b);
  out.target = substitute(d.target, b);
  out.symbolic = !out.label.is_ground();
  return out;
}

void Session::require_ok() const {
  if (error_) throw Error("session is in an error state (" + error_->message + "); undo or reset first");
}

Session::Snapshot Session::snapshot() const { return Snapshot{current_, trace_.size(), {}, pending_, error_}; }

void Session::restore(const Snapshot& s) {
  current_ = s.current;
  trace_.resize(std::min(trace_.size(), s.trace_size));
  pending_ = s.pending;
  error_ = s.error;
  refresh();
}

void Session::apply(const Descriptor& d) {
  current_ = d.target;
  trace_.push_back(TraceEvent{trace_.size(), d.label, d.participants});
  if (d.handler_result) {
    auto& q = pending_[arg(d.label, 0)];
    if (!q.empty()) q.pop_front();
  }
  if (is_atom(d.label, "s-call", 2)) {
    std::string srv = arg(d.label, 0);
    if (const Handler* h = handlers_.find(srv, d.label.args[1])) {
      if (handler_depth_ >= kMaxHandlerDepth) throw Error("handler nesting deeper than " + std::to_string(kMaxHandlerDepth));
      ++handler_depth_;
      TermPtr r;
      try {
        Stub stub(*this, srv);
        r = (*h)(d.label.args[1], stub);
      } catch (...) {
        --handler_depth_;
        throw;
      }
      --handler_depth_;
      if (!r || !r->ground)
        throw Error("handler for " + d.label.to_string() + " returned a non-ground result");
      if (r->sort.empty() || r->sort != "RESULT") r = resolve_term(*spec_, r, "RESULT");
      pending_[srv].push_back(r);
    }
  }
  refresh();
}

void Session::fire(std::size_t index, const Binding& values) {
  require_ok();
  if (index >= enabled_.size())
    throw Error("no enabled transition " + std::to_string(index) + " (" + std::to_string(enabled_.size()) +
                " enabled)");
  Descriptor d = enabled_[index].symbolic ? instantiate(enabled_[index], values) : enabled_[index];
  undo_.push_back(snapshot());
  redo_.clear();
  try {
    apply(d);
  } catch (const Error& e) {
    error_ = e.diagnostics().empty() ? Diagnostic{{}, e.what()} : e.diagnostics().front();
    refresh();
  } catch (const std::exception& e) {
    error_ = Diagnostic{{}, std::string("handler failed: ") + e.what()};
    refresh();
  }
}

std::size_t Session::fire_label(const std::string& label) {
  AtomPattern want = parse_atom(label);
  for (std::size_t i = 0; i < enabled_.size(); ++i) {
    Binding b;
    if (!match_label(enabled_[i].label, want, b)) continue;
    if (enabled_[i].symbolic && b.size() != placeholder_sorts(enabled_[i].label).size()) continue;
    fire(i, b);
    return i;
  }
  throw Error("'" + label + "' is not enabled");
}

std::size_t Session::run_internal(std::size_t max_steps) {
  std::size_t n = 0;
  while (n < max_steps && !error_) {
    std::size_t i = 0;
    while (i < enabled_.size() && (enabled_[i].symbolic || !enabled_[i].from_comm)) ++i;
    if (i == enabled_.size()) break;
    fire(i);
    ++n;
  }
  return n;
}

bool Session::undo() {
  if (undo_.empty()) return false;
  Snapshot before = undo_.back();
  undo_.pop_back();
  Snapshot after = snapshot();
  after.trace_tail.assign(trace_.begin() + static_cast<std::ptrdiff_t>(before.trace_size), trace_.end());
  restore(before);
  redo_.push_back(std::move(after));
  return true;
}

bool Session::redo() {
  if (redo_.empty()) return false;
  Snapshot after = redo_.back();
  redo_.pop_back();
  undo_.push_back(snapshot());
  current_ = after.current;
  trace_.insert(trace_.end(), after.trace_tail.begin(), after.trace_tail.end());
  pending_ = after.pending;
  error_ = after.error;
  refresh();
  return true;
}

void Session::reset() {
  current_ = initial_;
  trace_.clear();
  pending_.clear();
  error_.reset();
  undo_.clear();
  redo_.clear();
  refresh();
}

std::size_t Session::count(const std::string& pattern) const {
  AtomPattern want = parse_atom(pattern);
  std::size_t n = 0;
  for (const auto& e : trace_) {
    Binding b;
    if (match_label(e.label, want, b)) ++n;
  }
  return n;
}

std::string Session::trace_text() const {
  std::ostringstream os;
  for (const auto& e : trace_) os << e.index << '\t' << e.label.to_string() << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Stub

TermPtr Stub::call(const std::string& server, const TermPtr& service) {
  Session& s = session_;
  auto protocol = [&](const ActionLabel& l) {
    return (is_atom(l, "cs-request", 3) && arg(l, 0) == self_ && arg(l, 1) == server) ||
           (is_atom(l, "s-call", 2) && arg(l, 0) == server) || (is_atom(l, "s-return", 2) && arg(l, 0) == server) ||
           (is_atom(l, "cs-result", 3) && arg(l, 0) == server && arg(l, 1) == self_) ||
           (is_atom(l, "c-return", 3) && arg(l, 0) == server && arg(l, 1) == self_);
  };
  bool sent = false;
  for (const auto& d : s.describe(false)) {
    if (!is_atom(d.label, "c-call", 3) || arg(d.label, 0) != self_ || arg(d.label, 1) != server) continue;
    Binding b;
    if (!match_request(d.label.args[2], service, b)) continue;
    s.apply(d.symbolic ? s.instantiate(d, b) : d);
    sent = true;
    break;
  }
  if (!sent)
    throw Error(self_ + " cannot call " + server + " with " + to_string(service) + ": no c-call is enabled");
  for (std::size_t step = 0; step < kMaxStubSteps; ++step) {
    std::optional<Descriptor> next;
    for (const auto& d : s.describe(false))
      if (!d.symbolic && protocol(d.label)) {
        next = d;
        break;
      }
    if (!next)
      throw Error("call " + self_ + " -> " + server + " " + to_string(service) +
                  " is stuck (no handler for the service?)");
    s.apply(*next);
    if (is_atom(next->label, "c-return", 3)) return next->label.args[2];
  }
  throw Error("call " + self_ + " -> " + server + " did not return");
}

long long Stub::call(const std::string& server, const std::string& name, const std::vector<long long>& args) {
  std::vector<TermPtr> ts;
  for (long long a : args) ts.push_back(make_lit(a, "RESULT"));
  TermPtr r = call(server, resolve_term(session_.spec(), make_app(name, ts), "SERVICE"));
  if (r->kind != Term::Kind::lit) throw Error("expected a number from " + server + ", got " + to_string(r));
  return r->value;
}

// ---------------------------------------------------------------------------
// Drivers

void run_auto(Session& s, const RandomPolicy& policy, std::size_t max_steps) {
  std::mt19937_64 rng(policy.seed);
  for (std::size_t step = 0; step < max_steps; ++step) {
    if (s.terminated() || s.error() || s.enabled().empty()) return;
    std::uniform_int_distribution<std::size_t> pick(0, s.enabled().size() - 1);
    std::size_t i = pick(rng);
    Binding values;
    std::uniform_int_distribution<long long> value(0, policy.max_value);
    for (const auto& [name, sort] : placeholder_sorts(s.enabled()[i].label))
      values[name] = make_lit(value(rng), sort);
    s.fire(i, values);
  }
}

void run_auto(Session& s, const ScriptPolicy& policy, std::size_t max_steps) {
  for (std::size_t i = 0; i < policy.labels.size() && i < max_steps; ++i) {
    try {
      s.fire_label(policy.labels[i]);
    } catch (const Error& e) {
      throw Error("script step " + std::to_string(i + 1) + ": " + e.what());
    }
    if (s.error()) throw Error("script step " + std::to_string(i + 1) + ": " + s.error()->message);
    if (policy.auto_internal) s.run_internal();
  }
}

std::vector<std::string> parse_script(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (auto c = line.find("--"); c != std::string::npos) line.erase(c);
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(b, e - b + 1));
  }
  return out;
}

std::vector<std::string> read_script(const std::string& path) { return parse_script(read_file(path)); }

// ---------------------------------------------------------------------------
// Calculator

std::string_view calculator_source() { return detail::kCalculatorDemo; }

namespace {

long long num(const TermPtr& t) {
  if (t->kind != Term::Kind::lit) throw Error("expected a number, got " + to_string(t));
  return t->value;
}

TermPtr number(long long v) { return make_lit(v, "RESULT"); }

HandlerTable calculator_handlers() {
  HandlerTable h;
  h.bind("primitive", "succ", [](const TermPtr& s, Stub&) { return number(num(s->args[0]) + 1); });
  h.bind("primitive", "pred", [](const TermPtr& s, Stub&) {
    long long a = num(s->args[0]);
    return number(a == 0 ? 0 : a - 1);
  });
  h.bind("primitive", "iszero", [](const TermPtr& s, Stub&) { return number(num(s->args[0]) == 0 ? 1 : 0); });

  h.bind("basic", "add", [](const TermPtr& s, Stub& stub) {
    long long a = num(s->args[0]), b = num(s->args[1]);
    while (!stub.call("primitive", "iszero", {b})) {
      a = stub.call("primitive", "succ", {a});
      b = stub.call("primitive", "pred", {b});
    }
    return number(a);
  });
  h.bind("basic", "subtract", [](const TermPtr& s, Stub& stub) {
    long long a = num(s->args[0]), b = num(s->args[1]);
    while (!stub.call("primitive", "iszero", {b}) && !stub.call("primitive", "iszero", {a})) {
      a = stub.call("primitive", "pred", {a});
      b = stub.call("primitive", "pred", {b});
    }
    return number(a);
  });

  h.bind("complex", "mul", [](const TermPtr& s, Stub& stub) {
    long long a = num(s->args[0]), b = num(s->args[1]), r = 0;
    while (!stub.call("primitive", "iszero", {b})) {
      r = stub.call("basic", "add", {r, a});
      b = stub.call("primitive", "pred", {b});
    }
    return number(r);
  });
  h.bind("complex", "div", [](const TermPtr& s, Stub& stub) {
    auto lessthan = [&](long long x, long long y) {
      long long r = stub.call("basic", "subtract", {y, x});
      r = stub.call("primitive", "iszero", {r});
      return r == 0;
    };
    long long a = num(s->args[0]), b = num(s->args[1]), r = 0;
    if (!stub.call("primitive", "iszero", {b})) {
      while (!lessthan(a, b)) {
        a = stub.call("basic", "subtract", {a, b});
        r = stub.call("primitive", "succ", {r});
      }
    }
    return number(r);
  });
  return h;
}

}  // namespace

CalculatorDemo calculator_demo() {
  CalculatorDemo d;
  auto user = parse_spec(calculator_source(), "lib/psf/demo/calculator.psf");
  auto g = generate_interfaces(user, parse_manifest(detail::kCalculatorManifest, "lib/psf/demo/calculator.manifest"));
  d.spec = std::make_shared<const FlatSpec>(link_composition(user, g));
  d.root = g.root_process;
  d.components = g.components;
  d.handlers = calculator_handlers();
  d.source = g.text();
  return d;
}

std::vector<std::string> calculator_script(const std::string& op, long long x, long long y) {
  std::vector<std::string> out{"enter(" + std::to_string(x) + ")"};
  if (op != "succ" && op != "pred" && op != "iszero") out.push_back("enter(" + std::to_string(y) + ")");
  out.push_back("op-" + op);
  return out;
}

std::optional<long long> last_result(const Session& s) {
  for (auto it = s.trace().rbegin(); it != s.trace().rend(); ++it)
    if (is_atom(it->label, "c-return", 3) && arg(it->label, 1) == "operator" &&
        it->label.args[2]->kind == Term::Kind::lit)
      return it->label.args[2]->value;
  return std::nullopt;
}

}  // namespace psf
