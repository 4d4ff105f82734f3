#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <deque>
#include <thread>

#include "aoplab/protocol.hpp"
#include "support.hpp"

using namespace aoplab;
using namespace aoplab::scoring;
using namespace std::chrono_literals;

namespace {

std::string fake(const std::string& mode, int delay_ms = 300) {
  return std::string("exec:") + FAKE_SCORER + " " + testing::fixture("oracle_tiny.txt").string() + " " +
         mode + " " + std::to_string(delay_ms);
}

const NgramOracle& local_oracle() {
  static const auto oracle = oracle_from_spec("corpus=" + testing::fixture("oracle_tiny.txt").string());
  return *oracle;
}

/// Replays scripted replies; an empty optional stands for a timeout.
class ScriptedTransport : public LineTransport {
 public:
  explicit ScriptedTransport(std::deque<std::optional<std::string>> replies) : replies_(std::move(replies)) {}
  void write_line(std::string_view line) override { sent.emplace_back(line); }
  std::optional<std::string> read_line(std::chrono::milliseconds) override {
    if (replies_.empty()) throw ProtocolError("scorer closed the connection");
    auto r = replies_.front();
    replies_.pop_front();
    return r;
  }
  std::vector<std::string> sent;

 private:
  std::deque<std::optional<std::string>> replies_;
};

}  // namespace

TEST_CASE("request and response round trip") {
  const ScoreRequest req{"id-1", "She said \"hi\"\n", "a big car"};
  CHECK(parse_request(serialize_request(req)) == req);

  ScoreRecord rec{"id-1", {{"a", {0, 1}, -0.5}, {" big", {1, 5}, -std::numeric_limits<double>::infinity()}}};
  const auto line = serialize_response(rec);
  CHECK(line.find("null") != std::string::npos);
  CHECK(parse_response(line) == rec);
  CHECK(line.find('\n') == std::string::npos);
}

TEST_CASE("malformed messages raise protocol errors") {
  CHECK_THROWS_AS(parse_response("nope"), ProtocolError);
  CHECK_THROWS_AS(parse_response(R"({"tokens":[]})"), ProtocolError);
  CHECK_THROWS_AS(parse_response(R"({"id":"x","tokens":{}})"), ProtocolError);
  CHECK_THROWS_AS(parse_response(R"({"id":"x","tokens":[{"text":"a","start":-1,"end":1,"logprob":0}]})"),
                  ProtocolError);
  CHECK_THROWS_AS(parse_response(R"({"id":"x","tokens":[{"text":"a","start":0,"end":1,"logprob":"x"}]})"),
                  ProtocolError);
  CHECK_THROWS_AS(parse_request(R"({"id":"x","context":"","phrase":""})"), ProtocolError);
  CHECK_THROWS_AS(parse_request(R"({"id":1,"context":"","phrase":"a"})"), ProtocolError);
}

TEST_CASE("stream header detection") {
  CHECK(parse_meta(R"({"meta":{"model":"m"}})") == std::optional<std::string>(R"({"model":"m"})"));
  CHECK_FALSE(parse_meta(R"({"id":"x","tokens":[]})").has_value());
}

TEST_CASE("exec transport matches the in-process oracle") {
  const auto remote = remote_scorer(fake("ok"));
  for (const auto& req : {ScoreRequest{"a", "", "The big red car"}, ScoreRequest{"b", "I saw ", "a red big dog"},
                          ScoreRequest{"c", "x\t", "café  car"}}) {
    CHECK(remote->score(req) == local_oracle().score(req));
  }
  CHECK(remote->info().name.rfind("remote:exec:", 0) == 0);
}

TEST_CASE("header line is captured") {
  const auto remote = remote_scorer(fake("meta"));
  CHECK_NOTHROW((void)remote->score({"a", "", "big car"}));
  REQUIRE(remote->meta().has_value());
  CHECK(remote->meta()->find("fake") != std::string::npos);
}

TEST_CASE("misbehaving scorers are rejected") {
  const ScoreRequest req{"a", "", "The big red car"};
  SUBCASE("overlap") {
    const auto remote = remote_scorer(fake("overlap"));
    try {
      (void)remote->score(req);
      FAIL("expected InvariantError");
    } catch (const InvariantError& e) {
      CHECK(std::string(e.what()).find("overlapping spans") != std::string::npos);
    }
  }
  SUBCASE("gap") {
    const auto remote = remote_scorer(fake("gap"));
    try {
      (void)remote->score(req);
      FAIL("expected InvariantError");
    } catch (const InvariantError& e) {
      CHECK(std::string(e.what()).find("span-coverage violation") != std::string::npos);
    }
  }
  SUBCASE("garbage") { CHECK_THROWS_AS((void)remote_scorer(fake("garbage"))->score(req), ProtocolError); }
  SUBCASE("wrong id") { CHECK_THROWS_AS((void)remote_scorer(fake("wrong-id"))->score(req), ProtocolError); }
  SUBCASE("closed") { CHECK_THROWS_AS((void)remote_scorer(fake("close"))->score(req), ProtocolError); }
  SUBCASE("positive logprobs pass validation") {
    CHECK(remote_scorer(fake("positive"))->score(req).tokens[0].logprob == 0.5);
  }
}

TEST_CASE("timeouts and retries") {
  const ScoreRequest first{"a", "", "big car"};
  const ScoreRequest second{"b", "", "red car"};
  SUBCASE("no retries") {
    const auto remote = remote_scorer(fake("slow-first", 400), {.timeout = 100ms, .retries = 0});
    CHECK_THROWS_AS((void)remote->score(first), TimeoutError);
  }
  SUBCASE("a retry absorbs the late duplicate") {
    const auto remote = remote_scorer(fake("slow-first", 300), {.timeout = 200ms, .retries = 2});
    CHECK(remote->score(first) == local_oracle().score(first));
    CHECK(remote->score(second) == local_oracle().score(second));
  }
}

TEST_CASE("scripted retry bookkeeping") {
  const auto a = serialize_response(local_oracle().score({"a", "", "big car"}));
  const auto b = serialize_response(local_oracle().score({"b", "", "red car"}));
  auto transport = std::make_unique<ScriptedTransport>(
      std::deque<std::optional<std::string>>{std::nullopt, a, a, b});
  auto* raw = transport.get();
  RemoteScorer remote(std::move(transport), "scripted", {.timeout = 1ms, .retries = 1});
  CHECK(remote.score({"a", "", "big car"}).request_id == "a");
  CHECK(remote.score({"b", "", "red car"}).request_id == "b");
  CHECK(raw->sent.size() == 3);
}

TEST_CASE("tcp transport") {
  const int server = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(server >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  REQUIRE(::bind(server, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  REQUIRE(::listen(server, 1) == 0);
  socklen_t len = sizeof addr;
  ::getsockname(server, reinterpret_cast<sockaddr*>(&addr), &len);
  const int port = ntohs(addr.sin_port);

  std::thread serve([server] {
    const int fd = ::accept(server, nullptr, nullptr);
    FdTransport conn(fd, fd);
    try {
      while (auto line = conn.read_line(5000ms)) {
        conn.write_line(serialize_response(local_oracle().score(parse_request(*line))));
      }
    } catch (const ProtocolError&) {
    }
  });
  {
    const auto remote = scorer_from_spec("remote:tcp://127.0.0.1:" + std::to_string(port));
    const ScoreRequest req{"t", "We met ", "a nice young man"};
    CHECK(remote->score(req) == local_oracle().score(req));
  }
  serve.join();
  ::close(server);
}

TEST_CASE("address parsing") {
  CHECK_THROWS_AS(remote_scorer("tcp://nohost"), UsageError);
  CHECK_THROWS_AS(remote_scorer("tcp://host:abc"), UsageError);
  CHECK_THROWS_AS(scorer_from_spec("bogus:thing"), UsageError);
  CHECK_THROWS_AS(remote_scorer("tcp://127.0.0.1:1"), ProtocolError);
}
