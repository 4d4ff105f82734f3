#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "aoplab/scorer.hpp"

namespace aoplab::scoring {

// Newline-delimited JSON. One response per request, in request order:
//   request  {"id": str, "context": str, "phrase": str}
//   response {"id": str, "tokens": [{"text": str, "start": int, "end": int, "logprob": float}]}
// An optional header line {"meta": {...}} may precede the responses.
// A logprob of -infinity travels as null.

std::string serialize_request(const ScoreRequest& request);
ScoreRequest parse_request(std::string_view line);
std::string serialize_response(const ScoreRecord& record);
/// Throws ProtocolError on malformed JSON or missing/mistyped fields.
ScoreRecord parse_response(std::string_view line);

/// Returns the meta object's dump if `line` is a stream header, else nullopt.
std::optional<std::string> parse_meta(std::string_view line);

/// A bidirectional line stream.
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual void write_line(std::string_view line) = 0;
  /// nullopt on timeout; throws ProtocolError when the peer closed.
  virtual std::optional<std::string> read_line(std::chrono::milliseconds timeout) = 0;
};

/// Transport over a pair of file descriptors (a socket or two pipes).
class FdTransport : public LineTransport {
 public:
  FdTransport(int read_fd, int write_fd, int child_pid = -1);
  ~FdTransport() override;
  FdTransport(const FdTransport&) = delete;
  FdTransport& operator=(const FdTransport&) = delete;

  void write_line(std::string_view line) override;
  std::optional<std::string> read_line(std::chrono::milliseconds timeout) override;

 private:
  int read_fd_;
  int write_fd_;
  int child_pid_;
  std::string buffer_;
};

std::unique_ptr<LineTransport> connect_tcp(const std::string& host, int port);
/// Runs `command` through /bin/sh and talks to it over its stdin/stdout.
std::unique_ptr<LineTransport> spawn_process(const std::string& command);

struct RemoteOptions {
  std::chrono::milliseconds timeout{30000};
  int retries = 0;  // re-sends after a timeout
};

/// Forwards requests over the wire protocol and validates every response.
/// Calls are serialized per connection.
class RemoteScorer final : public Scorer {
 public:
  RemoteScorer(std::unique_ptr<LineTransport> transport, std::string name, RemoteOptions options = {});

  [[nodiscard]] ScoreRecord score(const ScoreRequest& request) const override;
  [[nodiscard]] ScorerInfo info() const override;
  /// Header of the stream, if the server sent one.
  [[nodiscard]] std::optional<std::string> meta() const;

 private:
  std::unique_ptr<LineTransport> transport_;
  std::string name_;
  RemoteOptions options_;
  mutable std::mutex mu_;
  mutable std::optional<std::string> meta_;
  mutable std::multiset<std::string> abandoned_;
};

/// ADDR is "tcp://HOST:PORT" or "exec:COMMAND".
std::unique_ptr<RemoteScorer> remote_scorer(const std::string& address, RemoteOptions options = {});

/// Dispatches "oracle:SPEC" or "remote:ADDR".
std::unique_ptr<Scorer> scorer_from_spec(const std::string& spec, RemoteOptions options = {});

}  // namespace aoplab::scoring
