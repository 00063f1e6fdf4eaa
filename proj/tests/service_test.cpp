#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include "helpers.hpp"
#include "psf/service.hpp"

using namespace psf;
using psf::test::source_dir;

namespace {

const Catalog& catalog() {
  static const Catalog c = Catalog::load_dir(source_dir() + "/specs");
  return c;
}

Response call(Service& s, const std::string& line) { return decode_response(s.handle_line(line)); }

Response create(Service& s, const std::string& spec) {
  auto r = call(s, R"({"id":1,"op":"create","spec":")" + spec + R"("})");
  EXPECT_TRUE(r.ok) << r.error;
  return r;
}

std::string session_of(const Json& state) { return state.at("session").get<std::string>(); }
std::string session_of(const Response& r) { return session_of(r.payload); }

const Json* node(const Json& view, const std::string& name) {
  for (const auto& n : view.at("nodes"))
    if (n.at("name") == name) return &n;
  return nullptr;
}

std::size_t index_of(const Json& state, const std::string& label) {
  for (const auto& d : state.at("enabled"))
    if (d.at("label") == label) return d.at("index").get<std::size_t>();
  ADD_FAILURE() << label << " not enabled";
  return 0;
}

std::string fire(const std::string& session, std::size_t index, std::uint64_t version) {
  Request r;
  r.op = "fire";
  r.session = session;
  r.index = index;
  r.version = version;
  return encode(r);
}

/// Fires enabled communications in order until none is left.
void settle(Service& s, const std::string& id) {
  for (int i = 0; i < 200; ++i) {
    auto st = call(s, Json{{"op", "view"}, {"session", id}}.dump()).payload;
    const Json* next = nullptr;
    for (const auto& d : st["enabled"])
      if (d["from_comm"].get<bool>()) {
        next = &d;
        break;
      }
    if (!next) return;
    ASSERT_TRUE(call(s, fire(id, (*next)["index"], st["version"])).ok);
  }
  FAIL() << "communications did not settle";
}

std::vector<Request> request_corpus() {
  std::vector<Request> out;
  Request base;
  base.id = 7;
  for (const char* op : {"create", "view", "enabled", "fire", "undo", "redo", "reset", "trace", "close", "catalog",
                         "version"}) {
    Request r = base;
    r.op = op;
    out.push_back(r);
  }
  Request c;
  c.id = "abc";
  c.op = "create";
  c.spec = "calculator";
  c.root = "C-I(operator, primitive)";
  c.seed = 18446744073709551615ull;
  out.push_back(c);
  Request f;
  f.id = Json::array({1, "x"});
  f.op = "fire";
  f.session = "s1";
  f.index = 3;
  f.version = 12;
  f.values = {{"?n#4", "7"}, {"?s#9", "succ(2)"}};
  out.push_back(f);
  Request l;
  l.op = "fire";
  l.session = "s2";
  l.label = "enter(3)";
  out.push_back(l);
  Request v;
  v.op = "view";
  v.session = "s\"quoted\"";
  out.push_back(v);
  return out;
}

}  // namespace

TEST(Messages, RequestRoundTrip) {
  for (const auto& r : request_corpus()) {
    auto text = encode(r);
    auto back = decode_request(text);
    EXPECT_EQ(back, r) << text;
    EXPECT_EQ(encode(back), text);
  }
}

TEST(Messages, ResponseRoundTrip) {
  std::vector<Response> corpus;
  Response ok;
  ok.id = 3;
  ok.payload = Json{{"session", "s1"}, {"version", 2}, {"enabled", Json::array({Json{{"index", 0}}})}};
  corpus.push_back(ok);
  Response err;
  err.id = nullptr;
  err.ok = false;
  err.error = "index out of date";
  corpus.push_back(err);
  // Every response the service produces for the request corpus.
  Service s(catalog());
  create(s, "calculator");
  for (const auto& r : request_corpus()) corpus.push_back(s.handle(r));
  for (const auto& r : corpus) {
    auto text = encode(r);
    EXPECT_EQ(decode_response(text), r) << text;
    EXPECT_EQ(encode(decode_response(text)), text);
  }
}

TEST(Messages, MalformedInputGetsAnErrorResponse) {
  Service s(catalog());
  for (const std::string bad : {"{not json", "[1,2]", R"({"id":5})", R"({"op":"launch"})", R"({"op":"fire","index":-1})",
                                R"({"op":"create","spec":3})", R"({"op":"fire","values":{"a":1}})"}) {
    auto r = call(s, bad);
    EXPECT_FALSE(r.ok) << bad;
    EXPECT_FALSE(r.error.empty()) << bad;
  }
  EXPECT_NE(call(s, "{not json").error.find("malformed message"), std::string::npos);
  EXPECT_EQ(call(s, R"({"id":5})").id, 5);
  EXPECT_NE(call(s, R"({"op":"launch"})").error.find("unknown op 'launch'"), std::string::npos);
}

TEST(Service, UnknownSessionAndSpec) {
  Service s(catalog());
  auto r = call(s, R"({"op":"view","session":"s99"})");
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.error, "unknown session 's99'");
  r = call(s, R"({"op":"create","spec":"nope"})");
  EXPECT_EQ(r.error, "unknown spec 'nope'");
  r = call(s, R"({"op":"undo"})");
  EXPECT_EQ(r.error, "missing field 'session'");
}

TEST(Service, VersionAndCatalog) {
  Service s(catalog());
  auto v = call(s, R"({"id":"hb","op":"version"})");
  EXPECT_TRUE(v.ok);
  EXPECT_EQ(v.id, "hb");
  EXPECT_EQ(v.payload["protocol"], kProtocolName);
  EXPECT_EQ(v.payload["protocol_version"], kProtocolVersion);
  auto c = call(s, R"({"op":"catalog"})");
  std::vector<std::string> ids;
  for (const auto& e : c.payload["specs"]) ids.push_back(e["id"].get<std::string>());
  EXPECT_EQ(ids, (std::vector<std::string>{"arch-example", "calculator", "cs-pair", "toolbus"}));
}

TEST(View, CalculatorBoxesAndNodes) {
  Service s(catalog());
  auto view = create(s, "calculator").payload["view"];
  EXPECT_EQ(view["root"]["label"], "encaps(ClientServerH)");
  EXPECT_EQ(view["root"]["id"], "b0");
  ASSERT_EQ(view["root"]["children"].size(), 1u);
  EXPECT_EQ(view["root"]["children"][0]["label"], "encaps(H)");
  EXPECT_EQ(view["root"]["children"][0]["children"].size(), 4u);  // one wrapper per component

  for (const char* n : {"Operator", "Stack", "C-I(operator, primitive)", "C-I(operator, basic)",
                        "C-I(operator, complex)", "S-I(primitive)", "Primitive", "S-I(basic)", "C-I(basic, primitive)",
                        "Basic", "S-I(complex)", "C-I(complex, basic)", "C-I(complex, primitive)", "Complex"})
    EXPECT_NE(node(view, n), nullptr) << n;
  EXPECT_EQ(view["nodes"].size(), 16u);  // plus the shutdown and control processes
  EXPECT_TRUE((*node(view, "Operator"))["enabled"].get<bool>());
  EXPECT_FALSE((*node(view, "Primitive"))["enabled"].get<bool>());
  EXPECT_EQ((*node(view, "S-I(primitive)"))["box"], "b0.1.2");
  EXPECT_TRUE(view["last_action"].is_null());
}

TEST(View, NodePathsMatchParticipants) {
  Service s(catalog());
  auto st = create(s, "calculator").payload;
  for (const auto& d : st["enabled"])
    for (const auto& p : d["participants"]) {
      bool found = false;
      for (const auto& n : st["view"]["nodes"]) found |= n["path"] == p;
      EXPECT_TRUE(found) << p;
    }
}

TEST(View, ArchitectureExampleAfterSend) {
  Service s(catalog());
  auto st = create(s, "arch-example").payload;
  auto id = session_of(create(s, "arch-example"));
  st = call(s, R"({"op":"view","session":")" + id + R"("})").payload;
  EXPECT_TRUE((*node(st["view"], "Component1"))["enabled"].get<bool>());
  EXPECT_FALSE((*node(st["view"], "Component2"))["enabled"].get<bool>());

  st = call(s, fire(id, index_of(st, "send-message"), st["version"])).payload;
  EXPECT_EQ(st["view"]["last_action"], "send-message");
  auto comm = index_of(st, "comm(c1 >> c2, message)");
  st = call(s, fire(id, comm, st["version"])).payload;
  EXPECT_EQ(st["view"]["last_action"], "comm(c1 >> c2, message)");
  // Component2 now owes the acknowledgement.
  EXPECT_TRUE((*node(st["view"], "Component2"))["enabled"].get<bool>());
  EXPECT_EQ(st["enabled"].size(), 1u);
  EXPECT_EQ(st["enabled"][0]["label"], "comm(c2 >> c1, ack)");
}

TEST(View, FireThenUndoRestoresView) {
  Service s(catalog());
  auto first = create(s, "calculator").payload;
  auto id = session_of(first);
  auto again = call(s, R"({"op":"view","session":")" + id + R"("})").payload;
  EXPECT_EQ(again["view"], first["view"]);
  EXPECT_EQ(again["enabled"], first["enabled"]);

  auto fired = call(s, fire(id, index_of(first, "stop"), first["version"]));
  ASSERT_TRUE(fired.ok) << fired.error;
  EXPECT_NE(fired.payload["view"], first["view"]);
  auto undone = call(s, R"({"op":"undo","session":")" + id + R"("})").payload;
  EXPECT_EQ(undone["view"], first["view"]);
  EXPECT_EQ(undone["enabled"], first["enabled"]);
  EXPECT_NE(undone["version"], first["version"]);
}

TEST(Service, StaleIndexIsRejected) {
  Service s(catalog());
  auto st = create(s, "calculator").payload;
  auto id = session_of(st);
  std::uint64_t v0 = st["version"];
  ASSERT_TRUE(call(s, fire(id, index_of(st, "op-add"), v0)).ok);
  auto r = call(s, fire(id, 0, v0));
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.error, "index out of date");
  r = call(s, fire(id, 999, v0 + 1));
  EXPECT_EQ(r.error, "index out of date");
  r = call(s, R"({"op":"fire","session":")" + id + R"(","index":0})");
  EXPECT_EQ(r.error, "missing field 'version'");
}

TEST(Service, UndoRedoReset) {
  Service s(catalog());
  auto id = session_of(create(s, "calculator"));
  auto r = call(s, R"({"op":"undo","session":")" + id + R"("})");
  EXPECT_EQ(r.error, "nothing to undo");
  r = call(s, R"({"op":"redo","session":")" + id + R"("})");
  EXPECT_EQ(r.error, "nothing to redo");
  ASSERT_TRUE(call(s, Json{{"op", "fire"}, {"session", id}, {"label", "enter(4)"}}.dump()).ok);
  ASSERT_TRUE(call(s, R"({"op":"undo","session":")" + id + R"("})").ok);
  auto redo = call(s, R"({"op":"redo","session":")" + id + R"("})");
  ASSERT_TRUE(redo.ok);
  EXPECT_EQ(redo.payload["view"]["last_action"], "enter(4)");
  auto reset = call(s, R"({"op":"reset","session":")" + id + R"("})");
  EXPECT_TRUE(reset.payload["view"]["last_action"].is_null());
  EXPECT_FALSE(reset.payload["can_undo"].get<bool>());
}

TEST(Service, SymbolicFireTakesValues) {
  Service s(catalog());
  auto st = create(s, "calculator").payload;
  auto id = session_of(st);
  Json enter;
  for (const auto& d : st["enabled"])
    if (d["symbolic"].get<bool>()) enter = d;
  ASSERT_FALSE(enter.is_null());
  ASSERT_EQ(enter["placeholders"].size(), 1u);
  std::string ph = enter["placeholders"][0]["name"];
  EXPECT_EQ(enter["placeholders"][0]["sort"], "RESULT");

  Request r;
  r.op = "fire";
  r.session = id;
  r.index = enter["index"].get<std::size_t>();
  r.version = st["version"].get<std::uint64_t>();
  auto missing = s.handle(r);
  EXPECT_FALSE(missing.ok);
  r.values = {{"?nope#1", "3"}};
  EXPECT_EQ(s.handle(r).error, "transition has no placeholder '?nope#1'");
  r.values = {{ph, "6"}};
  auto done = s.handle(r);
  ASSERT_TRUE(done.ok) << done.error;
  EXPECT_EQ(done.payload["view"]["last_action"], "enter(6)");
}

TEST(Service, CalculatorSuccThroughTheProtocol) {
  Service s(catalog());
  auto id = session_of(create(s, "calculator"));
  auto by_label = [&](const std::string& l) {
    auto r = call(s, Json{{"op", "fire"}, {"session", id}, {"label", l}}.dump());
    ASSERT_TRUE(r.ok) << l << ": " << r.error;
  };
  by_label("enter(4)");
  settle(s, id);
  by_label("op-succ");
  settle(s, id);
  auto tr = call(s, R"({"op":"trace","session":")" + id + R"("})").payload;
  EXPECT_EQ(tr["events"].back()["label"], "push(5)");
  EXPECT_NE(tr["text"].get<std::string>().find("c-return(primitive, operator, 5)"), std::string::npos);
  EXPECT_NE(tr["text"].get<std::string>().find("s-call(primitive, succ(4))"), std::string::npos);
}

TEST(Service, CloseForgetsTheSession) {
  Service s(catalog());
  auto id = session_of(create(s, "cs-pair"));
  EXPECT_EQ(s.session_count(), 1u);
  EXPECT_TRUE(call(s, R"({"op":"close","session":")" + id + R"("})").ok);
  EXPECT_EQ(s.session_count(), 0u);
  EXPECT_FALSE(call(s, R"({"op":"view","session":")" + id + R"("})").ok);
}

TEST(Service, CreateWithRootExpression) {
  Service s(catalog());
  auto r = call(s, R"({"op":"create","spec":"toolbus"})");
  ASSERT_TRUE(r.ok) << r.error;
  EXPECT_EQ(r.payload["view"]["root"]["label"], "system");
  r = call(s, Json{{"op", "create"}, {"spec", "calculator"}, {"root", "C-I(operator, primitive)"}}.dump());
  ASSERT_TRUE(r.ok) << r.error;
  ASSERT_EQ(r.payload["view"]["nodes"].size(), 1u);
  EXPECT_EQ(r.payload["view"]["nodes"][0]["name"], "C-I(operator, primitive)");
  r = call(s, R"({"op":"create","spec":"calculator","root":"Undefined"})");
  EXPECT_FALSE(r.ok);
}

TEST(Service, ConcurrentSessionsAreIndependent) {
  Service s(catalog());
  std::vector<std::future<std::string>> results;
  for (int t = 0; t < 4; ++t)
    results.push_back(std::async(std::launch::async, [&s, t] {
      auto id = session_of(create(s, "calculator"));
      for (int k = 0; k <= t; ++k) {
        call(s, Json{{"op", "fire"}, {"session", id}, {"label", "enter(" + std::to_string(k) + ")"}}.dump());
        settle(s, id);
      }
      auto tr = call(s, R"({"op":"trace","session":")" + id + R"("})");
      return tr.payload["text"].get<std::string>();
    }));
  for (int t = 0; t < 4; ++t) {
    auto text = results[t].get();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2 * (t + 1)) << text;  // enter and push per number
  }
}

TEST(Catalog, LooseFilesWithoutIndex) {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / ("psf_catalog_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  fs::copy_file(source_dir() + "/specs/arch_example.psf", dir / "arch_example.psf",
                fs::copy_options::overwrite_existing);
  std::ofstream(dir / "data_only.psf") << "data module Only\nbegin\n  exports\n  begin\n    sorts\n      S\n  end\nend Only\n";
  std::vector<std::string> skipped;
  auto c = Catalog::load_dir(dir.string(), &skipped);
  fs::remove_all(dir);
  EXPECT_EQ(c.ids(), (std::vector<std::string>{"arch_example", "calculator"}));
  ASSERT_EQ(skipped.size(), 1u);
  EXPECT_NE(skipped[0].find("data_only.psf"), std::string::npos);
  EXPECT_THROW(Catalog::load_dir("/nonexistent/dir"), Error);
}

TEST(Transport, StdioStream) {
  Service s(catalog());
  std::istringstream in("{\"id\":1,\"op\":\"version\"}\n\n{broken\n{\"id\":2,\"op\":\"catalog\"}\n");
  std::ostringstream out;
  serve_stream(s, in, out);
  std::istringstream lines(out.str());
  std::vector<Response> rs;
  for (std::string l; std::getline(lines, l);) rs.push_back(decode_response(l));
  ASSERT_EQ(rs.size(), 3u);
  EXPECT_TRUE(rs[0].ok);
  EXPECT_FALSE(rs[1].ok);
  EXPECT_EQ(rs[2].id, 2);
}

namespace {

class Client {
 public:
  explicit Client(int port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_port = htons(static_cast<std::uint16_t>(port));
    ::inet_pton(AF_INET, "127.0.0.1", &a.sin_addr);
    ok_ = ::connect(fd_, reinterpret_cast<sockaddr*>(&a), sizeof a) == 0;
  }
  ~Client() { ::close(fd_); }
  bool ok() const { return ok_; }
  Response ask(const std::string& line) {
    std::string msg = line + "\n";
    ::send(fd_, msg.data(), msg.size(), MSG_NOSIGNAL);
    std::size_t nl;
    char chunk[4096];
    while ((nl = buf_.find('\n')) == std::string::npos) {
      ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n <= 0) throw std::runtime_error("connection closed");
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
    std::string out = buf_.substr(0, nl);
    buf_.erase(0, nl + 1);
    return decode_response(out);
  }

 private:
  int fd_ = -1;
  bool ok_ = false;
  std::string buf_;
};

}  // namespace

TEST(Transport, TcpSessionsAcrossConnections) {
  Service s(catalog());
  std::atomic<bool> stop{false};
  std::promise<int> ready;
  std::thread server([&] { serve_tcp(s, "127.0.0.1", 0, stop, [&](int p) { ready.set_value(p); }); });
  int port = ready.get_future().get();
  {
    Client a(port), b(port);
    ASSERT_TRUE(a.ok());
    ASSERT_TRUE(b.ok());
    EXPECT_TRUE(a.ask(R"({"id":1,"op":"version"})").ok);
    auto created = a.ask(R"({"id":2,"op":"create","spec":"arch-example"})");
    ASSERT_TRUE(created.ok);
    auto id = session_of(created);
    // A session is reachable from any connection.
    auto st = b.ask(R"({"op":"fire","session":")" + id + R"(","label":"send-message"})");
    ASSERT_TRUE(st.ok) << st.error;
    auto view = a.ask(R"({"op":"view","session":")" + id + R"("})");
    EXPECT_EQ(view.payload["view"]["last_action"], "send-message");
    EXPECT_FALSE(b.ask("garbage").ok);
    EXPECT_TRUE(b.ask(R"({"op":"version"})").ok);  // connection survives bad input
  }
  stop = true;
  server.join();
}

TEST(Transport, BindFailureIsReported) {
  Service s(catalog());
  std::atomic<bool> stop{true};
  EXPECT_THROW(serve_tcp(s, "not-an-address", 0, stop), Error);
}

TEST(View, TerminatedSessionKeepsLastAction) {
  Service s(catalog());
  auto id = session_of(create(s, "arch-example"));
  Response r;
  for (const char* l : {"stop", "quit", "shutdown"}) {
    r = call(s, Json{{"op", "fire"}, {"session", id}, {"label", l}}.dump());
    ASSERT_TRUE(r.ok) << l << ": " << r.error;
  }
  EXPECT_TRUE(r.payload["terminated"].get<bool>());
  EXPECT_TRUE(r.payload["enabled"].empty());
  EXPECT_EQ(r.payload["view"]["last_action"], "shutdown");
  for (const auto& n : r.payload["view"]["nodes"]) EXPECT_FALSE(n["enabled"].get<bool>());
}
