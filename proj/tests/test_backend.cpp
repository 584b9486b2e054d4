#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>

#include <fstream>
#include <thread>

#include "cdmizer/backend.hpp"
#include "support/tempdir.hpp"

using namespace cdmizer;

namespace {

ChatRequest request(const std::string& doc, ClauseKind clause, Mode mode, int attempt = 1) {
  ChatRequest r;
  r.meta = {doc, clause, mode, 0};
  r.messages = {{"system", "sys"}, {"user", "convert"}};
  r.attempt = attempt;
  return r;
}

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

// Chat endpoint on an ephemeral port, stopped on destruction.
class FakeServer {
 public:
  explicit FakeServer(httplib::Server::Handler handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("mock backend file lookup order") {
  TempDir dir;
  write(dir / "d1.mta.txt", "clause");
  write(dir / "d1.mta.with-rag.txt", "mode");
  write(dir / "d1.mta.with-rag.2.txt", "attempt");
  MockBackend mock(dir.path());
  CHECK(mock.complete(request("d1", ClauseKind::Mta, Mode::WithRag, 2)).text == "attempt");
  CHECK(mock.complete(request("d1", ClauseKind::Mta, Mode::WithRag, 1)).text == "mode");
  CHECK(mock.complete(request("d1", ClauseKind::Mta, Mode::WithoutRag, 3)).text == "clause");
  CHECK_THROWS_AS(mock.complete(request("d2", ClauseKind::Mta, Mode::WithRag)), BackendError);
  CHECK(mock.calls() == 4);
  CHECK_THROWS_AS(MockBackend(dir / "missing"), BackendError);
}

TEST_CASE("mock responder") {
  MockBackend mock([](const ChatRequest& r) { return r.meta.doc_id + "/" + std::to_string(r.attempt); }, "fn");
  CHECK(mock.complete(request("x", ClauseKind::Rounding, Mode::WithRag, 2)).text == "x/2");
  CHECK(mock.id() == "fn");
}

TEST_CASE("unreachable endpoint fails after three retries") {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  HttpBackendConfig cfg;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
  cfg.initial_backoff = std::chrono::milliseconds(1);
  cfg.timeout_s = 2.0;
  HttpChatBackend backend(cfg);
  CHECK_THROWS_AS(backend.complete(request("d", ClauseKind::Mta, Mode::WithRag)), TransportError);
  CHECK(backend.transport_attempts() == 4);
  CHECK_THROWS_AS(HttpChatBackend(HttpBackendConfig{}), BackendError);
}

TEST_CASE("chat request and response round trip") {
  Json seen;
  std::string auth;
  FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen = Json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"{\"a\":1}"}}],
                        "usage":{"prompt_tokens":12,"completion_tokens":3}})",
                    "application/json");
  });
  HttpBackendConfig cfg;
  cfg.endpoint = server.url();
  cfg.model = "m1";
  cfg.api_key = "secret";
  cfg.seed = 7;
  HttpChatBackend backend(cfg);
  const Completion c = backend.complete(request("d", ClauseKind::Mta, Mode::WithRag));
  CHECK(c.text == "{\"a\":1}");
  CHECK(c.prompt_tokens == 12);
  CHECK(c.completion_tokens == 3);
  CHECK(c.latency_ms >= 0.0);
  CHECK(seen["model"] == "m1");
  CHECK(seen["temperature"] == 0);
  CHECK(seen["seed"] == 7);
  CHECK(seen["messages"] == Json::parse(R"([{"role":"system","content":"sys"},{"role":"user","content":"convert"}])"));
  CHECK(auth == "Bearer secret");
  CHECK(backend.id().find("m1") != std::string::npos);
}

TEST_CASE("non-2xx responses and malformed bodies") {
  int status = 503;
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    res.status = status;
    res.set_content(status == 200 ? "{\"nope\":1}" : "overloaded", "text/plain");
  });
  HttpBackendConfig cfg;
  cfg.endpoint = server.url() + "/v1/chat/completions";
  HttpChatBackend backend(cfg);
  try {
    backend.complete(request("d", ClauseKind::Mta, Mode::WithRag));
    FAIL("expected an HTTP status error");
  } catch (const HttpStatusError& e) {
    CHECK(e.status() == 503);
  }
  CHECK(backend.transport_attempts() == 1);
  status = 200;
  CHECK_THROWS_AS(backend.complete(request("d", ClauseKind::Mta, Mode::WithRag)), BackendError);
}

TEST_CASE("gateway caps requests in flight") {
  std::atomic<int> active{0};
  std::atomic<int> worst{0};
  auto backend = std::make_shared<MockBackend>([&](const ChatRequest&) {
    const int now = ++active;
    int w = worst.load();
    while (now > w && !worst.compare_exchange_weak(w, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --active;
    return std::string("{}");
  });
  Gateway gateway(backend, 2);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      for (int j = 0; j < 3; ++j) gateway.complete(request("d", ClauseKind::Mta, Mode::WithRag));
    });
  }
  for (auto& t : threads) t.join();
  CHECK(worst.load() <= 2);
  CHECK(gateway.peak_in_flight() <= 2);
  CHECK(gateway.peak_in_flight() >= 1);
  CHECK(backend->calls() == 24);
  CHECK(Gateway(backend, 0).max_in_flight() == 1);
  CHECK_THROWS_AS(Gateway(nullptr), Error);
}
