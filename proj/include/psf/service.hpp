#pragma once

#include <atomic>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "psf/runtime.hpp"

namespace psf {

using Json = nlohmann::ordered_json;

inline constexpr const char* kProtocolName = "psfcs-session";
inline constexpr int kProtocolVersion = 1;
inline constexpr const char* kToolVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Animation view

struct ViewBox {
  std::string id;     // "b0", "b0.1", ... in traversal order
  std::string label;  // "encaps(ClientServerH)"
  std::vector<ViewBox> children;
};

struct ViewNode {
  std::string name;  // process instance, e.g. "C-I(operator, complex)"
  std::string path;  // scope path, matches transition participants
  std::string box;   // id of the innermost enclosing box
  bool enabled = false;
};

/// Encapsulation boxes and process-instance nodes of a session's current
/// state. Nodes are instances with no nested instance or box in a live
/// position; a node is enabled when it takes part in an enabled transition.
struct AnimationView {
  ViewBox root;  // the outermost box, or a synthetic "system" box
  std::vector<ViewNode> nodes;
  std::optional<std::string> last_action;
  bool terminated = false;
};

AnimationView render_view(const Session& s);
Json to_json(const AnimationView& v);
Json to_json(const Descriptor& d, std::size_t index);

// ---------------------------------------------------------------------------
// Messages

/// Request kinds: create, view, enabled, fire, undo, redo, reset, trace,
/// close, catalog, version.
struct Request {
  Json id;  // echoed in the response; null when absent
  std::string op;
  std::optional<std::string> session;
  std::optional<std::string> spec;
  std::optional<std::string> root;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> index;
  std::optional<std::uint64_t> version;  // state version the index refers to
  std::optional<std::string> label;      // fire by label instead of index
  std::map<std::string, std::string> values;  // placeholder -> term text

  friend bool operator==(const Request&, const Request&) = default;
};

struct Response {
  Json id;
  bool ok = true;
  std::string error;  // set when !ok
  Json payload = Json::object();

  friend bool operator==(const Response&, const Response&) = default;
};

/// Throws psf::Error on malformed messages.
Request decode_request(const std::string& line);
std::string encode(const Request& r);
Response decode_response(const std::string& line);
std::string encode(const Response& r);

// ---------------------------------------------------------------------------
// Catalog and service

struct CatalogEntry {
  std::string id;
  std::string description;
  std::shared_ptr<const FlatSpec> spec;
  std::string root;  // default entry process
  HandlerTable handlers;
};

/// Immutable after the service starts.
class Catalog {
 public:
  void add(CatalogEntry e);
  const CatalogEntry* find(const std::string& id) const;
  std::vector<std::string> ids() const;

  /// The calculator demo only.
  static Catalog builtin();
  /// The demo plus the specifications in `dir`: the entries of
  /// dir/catalog.json ({"id", "files", "root", "description"}) when present,
  /// else one entry per .psf file (root: last module). Throws when an entry
  /// does not link. Loose files without a process named like their last
  /// module are skipped with a note in `skipped`.
  static Catalog load_dir(const std::string& dir, std::vector<std::string>* skipped = nullptr);

 private:
  std::map<std::string, CatalogEntry> entries_;
};

/// Session manager behind the line protocol. Thread-safe; requests on one
/// session are serialised, distinct sessions proceed independently.
class Service {
 public:
  explicit Service(Catalog catalog);

  Response handle(const Request& r);
  /// One protocol line in, one line out (never throws).
  std::string handle_line(const std::string& line);

  std::size_t session_count() const;

 private:
  struct Entry {
    std::mutex mu;
    std::unique_ptr<Session> session;
    std::uint64_t version = 0;
    std::string spec_id;
  };
  std::shared_ptr<Entry> entry(const std::string& id) const;
  Json state(const Entry& e) const;

  Catalog catalog_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t next_id_ = 1;
};

/// Reads requests line by line from `in` until end of input.
void serve_stream(Service& service, std::istream& in, std::ostream& out);

/// Listens on host:port (port 0 picks a free port) and serves each client
/// connection on its own thread until `stop` becomes true. `on_ready`
/// receives the bound port. Throws psf::Error when binding fails.
void serve_tcp(Service& service, const std::string& host, int port, const std::atomic<bool>& stop,
               const std::function<void(int)>& on_ready = {});

}  // namespace psf
