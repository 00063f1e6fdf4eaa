#include "psf/service.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <istream>
#include <ostream>
#include <set>
#include <thread>

#include "psf/parser.hpp"

namespace psf {

namespace {

using Kind = Proc::Kind;

constexpr std::size_t kMaxLine = 1 << 20;

const std::set<std::string>& known_ops() {
  static const std::set<std::string> ops{"create", "view",  "enabled", "fire",    "undo",   "redo",
                                         "reset",  "trace", "close",   "catalog", "version"};
  return ops;
}

std::string join_path(const std::string& parent, const std::string& name) {
  return parent.empty() ? name : parent + "/" + name;
}

/// Some scope or encapsulation occurs in a live position of `p`.
bool has_inner_structure(const ProcPtr& p) {
  switch (p->kind) {
    case Kind::scope:
    case Kind::encaps:
      return true;
    case Kind::par:
    case Kind::disrupt:
      return has_inner_structure(p->left) || has_inner_structure(p->right);
    case Kind::hide:
    case Kind::seq:
      return has_inner_structure(p->left);
    default:
      return false;
  }
}

std::string box_label(const ProcPtr& p) {
  return "encaps(" + (p->set_ref.empty() ? to_string(*p->set) : p->set_ref) + ")";
}

struct ViewBuilder {
  const std::set<std::string>& active;
  std::vector<ViewNode>& nodes;

  void walk(const ProcPtr& p, const std::string& path, ViewBox& box) {
    switch (p->kind) {
      case Kind::scope: {
        std::string name = p->name + to_string(p->args);
        std::string here = join_path(path, name);
        if (!has_inner_structure(p->left)) {
          nodes.push_back(ViewNode{name, here, box.id, active.count(here) > 0});
          return;
        }
        walk(p->left, here, box);
        return;
      }
      case Kind::encaps: {
        ViewBox child;
        child.id = box.id + "." + std::to_string(box.children.size() + 1);
        child.label = box_label(p);
        walk(p->left, path, child);
        box.children.push_back(std::move(child));
        return;
      }
      case Kind::par:
      case Kind::disrupt:
        walk(p->left, path, box);
        walk(p->right, path, box);
        return;
      case Kind::hide:
      case Kind::seq:
        walk(p->left, path, box);
        return;
      default:
        return;
    }
  }
};

/// The single encapsulation every live part of `p` sits in, if any.
const Proc* outermost_box(const ProcPtr& p) {
  switch (p->kind) {
    case Kind::encaps:
      return p.get();
    case Kind::scope:
    case Kind::hide:
      return outermost_box(p->left);
    default:
      return nullptr;
  }
}

std::string outer_path(const ProcPtr& p, const Proc* stop) {
  std::string path;
  for (const Proc* q = p.get(); q != stop; q = q->left.get())
    if (q->kind == Kind::scope) path = join_path(path, q->name + to_string(q->args));
  return path;
}

Json box_json(const ViewBox& b) {
  Json j{{"id", b.id}, {"label", b.label}, {"children", Json::array()}};
  for (const auto& c : b.children) j["children"].push_back(box_json(c));
  return j;
}

// ---- message field helpers

std::string get_string(const Json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw Error(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::uint64_t get_unsigned(const Json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw Error(std::string("field '") + key + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

Json parse_json(const std::string& line) {
  try {
    return Json::parse(line);
  } catch (const std::exception& e) {
    throw Error(std::string("malformed message: ") + e.what());
  }
}

Response error_response(Json id, std::string message) {
  Response r;
  r.id = std::move(id);
  r.ok = false;
  r.error = std::move(message);
  return r;
}

bool is_identifier(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  return true;
}

std::unique_ptr<Session> open_session(const CatalogEntry& e, const std::string& root, std::uint64_t seed) {
  if (is_identifier(root)) return std::make_unique<Session>(e.spec, root, seed, e.handlers);
  auto expr = resolve_process(*e.spec, parse_process(root));
  return std::make_unique<Session>(e.spec, expr, seed, e.handlers);
}

TermPtr parse_value(const FlatSpec& spec, const std::string& text, const std::string& sort) {
  auto pattern = parse_atom("value(" + text + ")");
  if (pattern.args.size() != 1) throw Error("value '" + text + "' is not a single term");
  return resolve_term(spec, pattern.args[0], sort);
}

}  // namespace

// ---------------------------------------------------------------------------
// View

AnimationView render_view(const Session& s) {
  std::set<std::string> active;
  for (const auto& d : s.enabled())
    for (const auto& p : d.participants) active.insert(p);

  AnimationView v;
  v.terminated = s.terminated();
  if (!s.trace().empty()) v.last_action = s.trace().back().label.to_string();

  ViewBuilder b{active, v.nodes};
  const ProcPtr& cur = s.current();
  v.root.id = "b0";
  if (const Proc* top = outermost_box(cur)) {
    v.root.label = box_label(std::shared_ptr<const Proc>(cur, top));
    b.walk(top->left, outer_path(cur, top), v.root);
  } else {
    v.root.label = "system";
    b.walk(cur, "", v.root);
  }
  return v;
}

Json to_json(const AnimationView& v) {
  Json j;
  j["root"] = box_json(v.root);
  j["nodes"] = Json::array();
  for (const auto& n : v.nodes)
    j["nodes"].push_back({{"name", n.name}, {"path", n.path}, {"box", n.box}, {"enabled", n.enabled}});
  j["last_action"] = v.last_action ? Json(*v.last_action) : Json(nullptr);
  j["terminated"] = v.terminated;
  return j;
}

Json to_json(const Descriptor& d, std::size_t index) {
  Json ph = Json::array();
  for (const auto& [name, sort] : placeholder_sorts(d.label)) ph.push_back({{"name", name}, {"sort", sort}});
  return Json{{"index", index},
              {"label", d.label.to_string()},
              {"symbolic", d.symbolic},
              {"placeholders", ph},
              {"participants", d.participants},
              {"from_comm", d.from_comm},
              {"preview", d.preview()}};
}

// ---------------------------------------------------------------------------
// Messages

Request decode_request(const std::string& line) {
  Json j = parse_json(line);
  if (!j.is_object()) throw Error("malformed message: expected a JSON object");
  Request r;
  try {
    if (j.contains("id")) r.id = j["id"];
    if (!j.contains("op")) throw Error("missing field 'op'");
    r.op = get_string(j, "op");
    if (!known_ops().count(r.op)) throw Error("unknown op '" + r.op + "'");
    if (j.contains("session")) r.session = get_string(j, "session");
    if (j.contains("spec")) r.spec = get_string(j, "spec");
    if (j.contains("root")) r.root = get_string(j, "root");
    if (j.contains("seed")) r.seed = get_unsigned(j, "seed");
    if (j.contains("index")) r.index = get_unsigned(j, "index");
    if (j.contains("version")) r.version = get_unsigned(j, "version");
    if (j.contains("label")) r.label = get_string(j, "label");
    if (j.contains("values")) {
      const auto& vs = j["values"];
      if (!vs.is_object()) throw Error("field 'values' must be an object");
      for (const auto& [k, v] : vs.items()) {
        if (!v.is_string()) throw Error("value of '" + k + "' must be a string");
        r.values[k] = v.get<std::string>();
      }
    }
  } catch (const Json::exception& e) {
    throw Error(std::string("malformed message: ") + e.what());
  }
  return r;
}

std::string encode(const Request& r) {
  Json j;
  if (!r.id.is_null()) j["id"] = r.id;
  j["op"] = r.op;
  if (r.session) j["session"] = *r.session;
  if (r.spec) j["spec"] = *r.spec;
  if (r.root) j["root"] = *r.root;
  if (r.seed) j["seed"] = *r.seed;
  if (r.index) j["index"] = *r.index;
  if (r.version) j["version"] = *r.version;
  if (r.label) j["label"] = *r.label;
  if (!r.values.empty()) j["values"] = r.values;
  return j.dump();
}

Response decode_response(const std::string& line) {
  Json j = parse_json(line);
  if (!j.is_object() || !j.contains("ok") || !j["ok"].is_boolean())
    throw Error("malformed message: response needs a boolean 'ok'");
  Response r;
  for (auto& [k, v] : j.items()) {
    if (k == "id")
      r.id = v;
    else if (k == "ok")
      r.ok = v.get<bool>();
    else if (k == "error" && v.is_string())
      r.error = v.get<std::string>();
    else
      r.payload[k] = v;
  }
  return r;
}

std::string encode(const Response& r) {
  Json j;
  j["id"] = r.id;
  j["ok"] = r.ok;
  if (!r.ok) j["error"] = r.error;
  for (const auto& [k, v] : r.payload.items()) j[k] = v;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Catalog

void Catalog::add(CatalogEntry e) {
  auto id = e.id;
  if (!entries_.emplace(id, std::move(e)).second) throw Error("duplicate catalog entry '" + id + "'");
}

const CatalogEntry* Catalog::find(const std::string& id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> Catalog::ids() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

Catalog Catalog::builtin() {
  Catalog c;
  auto demo = calculator_demo();
  c.add(CatalogEntry{"calculator", "calculator with primitive, basic and complex servers", demo.spec, demo.root,
                     demo.handlers});
  return c;
}

Catalog Catalog::load_dir(const std::string& dir, std::vector<std::string>* skipped) {
  namespace fs = std::filesystem;
  Catalog c = builtin();
  fs::path base(dir);
  if (!fs::is_directory(base)) throw Error("specification directory '" + dir + "' does not exist");

  if (fs::exists(base / "catalog.json")) {
    Json doc = parse_json(read_file((base / "catalog.json").string()));
    const Json& list = doc.is_object() && doc.contains("specs") ? doc["specs"] : doc;
    if (!list.is_array()) throw Error("catalog.json: expected a list of entries");
    for (const auto& item : list) {
      try {
        std::vector<std::string> files;
        for (const auto& f : item.at("files")) files.push_back((base / f.get<std::string>()).string());
        std::string module = item.value("module", std::string{});
        auto loaded = load_spec(files, module);
        std::string root = item.value("root", loaded.root);
        if (!loaded.spec.find_def(root)) throw Error("process '" + root + "' is not defined");
        c.add(CatalogEntry{item.at("id").get<std::string>(), item.value("description", std::string{}),
                           std::make_shared<const FlatSpec>(std::move(loaded.spec)), root, {}});
      } catch (const Json::exception& e) {
        throw Error(std::string("catalog.json: ") + e.what());
      }
    }
    return c;
  }

  std::vector<fs::path> files;
  for (const auto& de : fs::directory_iterator(base))
    if (de.is_regular_file() && de.path().extension() == ".psf") files.push_back(de.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto loaded = load_spec({f.string()});
    if (!loaded.spec.find_def(loaded.root)) {
      if (skipped) skipped->push_back(f.string() + ": no process named '" + loaded.root + "'");
      continue;
    }
    c.add(CatalogEntry{f.stem().string(), f.filename().string(),
                       std::make_shared<const FlatSpec>(std::move(loaded.spec)), loaded.root, {}});
  }
  return c;
}

// ---------------------------------------------------------------------------
// Service

Service::Service(Catalog catalog) : catalog_(std::move(catalog)) {}

std::size_t Service::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

std::shared_ptr<Service::Entry> Service::entry(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error("unknown session '" + id + "'");
  return it->second;
}

Json Service::state(const Entry& e) const {
  const Session& s = *e.session;
  Json enabled = Json::array();
  for (std::size_t i = 0; i < s.enabled().size(); ++i) enabled.push_back(to_json(s.enabled()[i], i));
  return Json{{"version", e.version},
              {"spec", e.spec_id},
              {"terminated", s.terminated()},
              {"error", s.error() ? Json(format_diagnostic(*s.error())) : Json(nullptr)},
              {"can_undo", s.can_undo()},
              {"can_redo", s.can_redo()},
              {"enabled", enabled},
              {"view", to_json(render_view(s))}};
}

Response Service::handle(const Request& r) {
  Response out;
  out.id = r.id;
  try {
    if (r.op == "version") {
      out.payload = Json{{"protocol", kProtocolName}, {"protocol_version", kProtocolVersion}, {"tool", kToolVersion}};
      return out;
    }
    if (r.op == "catalog") {
      Json list = Json::array();
      for (const auto& id : catalog_.ids()) {
        const auto* e = catalog_.find(id);
        list.push_back({{"id", id}, {"description", e->description}, {"root", e->root}});
      }
      out.payload["specs"] = list;
      return out;
    }
    if (r.op == "create") {
      if (!r.spec) throw Error("missing field 'spec'");
      const auto* ce = catalog_.find(*r.spec);
      if (!ce) throw Error("unknown spec '" + *r.spec + "'");
      auto e = std::make_shared<Entry>();
      e->spec_id = ce->id;
      e->session = open_session(*ce, r.root.value_or(ce->root), r.seed.value_or(0));
      std::string id;
      {
        std::lock_guard lock(mu_);
        id = "s" + std::to_string(next_id_++);
        sessions_[id] = e;
      }
      std::lock_guard lock(e->mu);
      out.payload = state(*e);
      out.payload["session"] = id;
      return out;
    }
    if (!r.session) throw Error("missing field 'session'");
    if (r.op == "close") {
      std::lock_guard lock(mu_);
      if (!sessions_.erase(*r.session)) throw Error("unknown session '" + *r.session + "'");
      out.payload["session"] = *r.session;
      return out;
    }

    auto e = entry(*r.session);
    std::lock_guard lock(e->mu);
    Session& s = *e->session;
    if (r.op == "enabled") {
      Json st = state(*e);
      out.payload = Json{{"version", st["version"]}, {"terminated", st["terminated"]}, {"enabled", st["enabled"]}};
      out.payload["session"] = *r.session;
      return out;
    } else if (r.op == "view") {
    } else if (r.op == "fire") {
      if (r.label) {
        s.fire_label(*r.label);
      } else {
        if (!r.index) throw Error("missing field 'index'");
        if (!r.version) throw Error("missing field 'version'");
        if (*r.version != e->version) throw Error("index out of date");
        if (*r.index >= s.enabled().size()) throw Error("index out of date");
        Binding b;
        auto sorts = placeholder_sorts(s.enabled()[*r.index].label);
        for (const auto& [name, text] : r.values) {
          auto it = std::find_if(sorts.begin(), sorts.end(), [&](const auto& p) { return p.first == name; });
          if (it == sorts.end()) throw Error("transition has no placeholder '" + name + "'");
          b[name] = parse_value(s.spec(), text, it->second);
        }
        s.fire(*r.index, b);
      }
      ++e->version;
    } else if (r.op == "undo") {
      if (!s.undo()) throw Error("nothing to undo");
      ++e->version;
    } else if (r.op == "redo") {
      if (!s.redo()) throw Error("nothing to redo");
      ++e->version;
    } else if (r.op == "reset") {
      s.reset();
      ++e->version;
    } else if (r.op == "trace") {
      Json events = Json::array();
      for (const auto& ev : s.trace())
        events.push_back({{"index", ev.index}, {"label", ev.label.to_string()}, {"participants", ev.participants}});
      out.payload = Json{{"version", e->version}, {"events", events}, {"text", s.trace_text()}};
      out.payload["session"] = *r.session;
      return out;
    } else {
      throw Error("unknown op '" + r.op + "'");
    }
    out.payload = state(*e);
    out.payload["session"] = *r.session;
    return out;
  } catch (const std::exception& ex) {
    return error_response(r.id, ex.what());
  }
}

std::string Service::handle_line(const std::string& line) {
  Json id = nullptr;
  try {
    Json j = Json::parse(line, nullptr, false);
    if (j.is_object() && j.contains("id")) id = j["id"];
    return encode(handle(decode_request(line)));
  } catch (const std::exception& ex) {
    return encode(error_response(id, ex.what()));
  }
}

// ---------------------------------------------------------------------------
// Transports

void serve_stream(Service& service, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out << service.handle_line(line) << '\n';
    out.flush();
  }
}

namespace {

bool send_all(int fd, const std::string& data) {
  std::size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::send(fd, data.data() + done, data.size() - done, MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      return false;
    }
    done += static_cast<std::size_t>(n);
  }
  return true;
}

void serve_client(Service& service, int fd, const std::atomic<bool>& stop) {
  std::string buf;
  char chunk[4096];
  while (!stop) {
    pollfd p{fd, POLLIN, 0};
    int rc = ::poll(&p, 1, 100);
    if (rc < 0 && errno != EINTR) break;
    if (rc <= 0) continue;
    ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) break;
    buf.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    bool ok = true;
    while (ok && (nl = buf.find('\n')) != std::string::npos) {
      std::string line = buf.substr(0, nl);
      buf.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      ok = send_all(fd, service.handle_line(line) + "\n");
    }
    if (!ok) break;
    if (buf.size() > kMaxLine) {
      send_all(fd, encode(error_response(nullptr, "message exceeds 1 MiB")) + "\n");
      break;
    }
  }
  ::close(fd);
}

}  // namespace

void serve_tcp(Service& service, const std::string& host, int port, const std::atomic<bool>& stop,
               const std::function<void(int)>& on_ready) {
  int lfd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (lfd < 0) throw Error(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(lfd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(lfd);
    throw Error("invalid IPv4 address '" + host + "'");
  }
  if (::bind(lfd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(lfd, 16) < 0) {
    std::string why = std::strerror(errno);
    ::close(lfd);
    throw Error("cannot listen on " + host + ":" + std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(lfd, reinterpret_cast<sockaddr*>(&addr), &len);
  if (on_ready) on_ready(ntohs(addr.sin_port));

  std::vector<std::thread> clients;
  while (!stop) {
    pollfd p{lfd, POLLIN, 0};
    int rc = ::poll(&p, 1, 100);
    if (rc <= 0) continue;
    int fd = ::accept(lfd, nullptr, nullptr);
    if (fd < 0) continue;
    clients.emplace_back(serve_client, std::ref(service), fd, std::cref(stop));
  }
  ::close(lfd);
  for (auto& t : clients) t.join();
}

}  // namespace psf
