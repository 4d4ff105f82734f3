#include "aoplab/protocol.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <json.hpp>
#include <limits>

namespace aoplab::scoring {

using ojson = nlohmann::ordered_json;

std::string serialize_request(const ScoreRequest& request) {
  ojson j;
  j["id"] = request.request_id;
  j["context"] = request.context_text;
  j["phrase"] = request.phrase_text;
  return j.dump();
}

namespace {

ojson parse_json(std::string_view line) {
  try {
    return ojson::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed JSON: ") + e.what());
  }
}

const ojson& field(const ojson& obj, const char* key, const char* what) {
  if (!obj.is_object() || !obj.contains(key))
    throw ProtocolError(std::string(what) + " is missing field '" + key + "'");
  return obj[key];
}

std::string string_field(const ojson& obj, const char* key, const char* what) {
  const auto& v = field(obj, key, what);
  if (!v.is_string()) throw ProtocolError(std::string(what) + " field '" + key + "' must be a string");
  return v.get<std::string>();
}

std::size_t offset_field(const ojson& obj, const char* key) {
  const auto& v = field(obj, key, "token");
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    throw ProtocolError(std::string("token field '") + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

}  // namespace

ScoreRequest parse_request(std::string_view line) {
  const auto j = parse_json(line);
  ScoreRequest r;
  r.request_id = string_field(j, "id", "request");
  r.context_text = string_field(j, "context", "request");
  r.phrase_text = string_field(j, "phrase", "request");
  if (r.phrase_text.empty()) throw ProtocolError("request phrase must be non-empty");
  return r;
}

std::string serialize_response(const ScoreRecord& record) {
  ojson j;
  j["id"] = record.request_id;
  j["tokens"] = ojson::array();
  for (const auto& t : record.tokens) {
    ojson tok;
    tok["text"] = t.surface;
    tok["start"] = t.chars.begin;
    tok["end"] = t.chars.end;
    if (std::isfinite(t.logprob))
      tok["logprob"] = t.logprob;
    else
      tok["logprob"] = nullptr;
    j["tokens"].push_back(std::move(tok));
  }
  return j.dump();
}

ScoreRecord parse_response(std::string_view line) {
  const auto j = parse_json(line);
  ScoreRecord rec;
  rec.request_id = string_field(j, "id", "response");
  const auto& toks = field(j, "tokens", "response");
  if (!toks.is_array()) throw ProtocolError("response field 'tokens' must be an array");
  rec.tokens.reserve(toks.size());
  for (const auto& t : toks) {
    ScoredToken st;
    st.surface = string_field(t, "text", "token");
    st.chars.begin = offset_field(t, "start");
    st.chars.end = offset_field(t, "end");
    const auto& lp = field(t, "logprob", "token");
    if (lp.is_null())
      st.logprob = -std::numeric_limits<double>::infinity();
    else if (lp.is_number())
      st.logprob = lp.get<double>();
    else
      throw ProtocolError("token field 'logprob' must be a number");
    rec.tokens.push_back(std::move(st));
  }
  return rec;
}

std::optional<std::string> parse_meta(std::string_view line) {
  const auto j = parse_json(line);
  if (j.is_object() && j.size() == 1 && j.contains("meta")) return j["meta"].dump();
  return std::nullopt;
}

// ---- transports -------------------------------------------------------------

FdTransport::FdTransport(int read_fd, int write_fd, int child_pid)
    : read_fd_(read_fd), write_fd_(write_fd), child_pid_(child_pid) {}

FdTransport::~FdTransport() {
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  if (read_fd_ >= 0) ::close(read_fd_);
  if (child_pid_ > 0) {
    int status = 0;
    ::waitpid(child_pid_, &status, 0);
  }
}

void FdTransport::write_line(std::string_view line) {
  std::string data(line);
  data += '\n';
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(write_fd_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("write to scorer failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> FdTransport::read_line(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    pollfd pfd{read_fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("poll failed: ") + std::strerror(errno));
    }
    if (rc == 0) return std::nullopt;
    char buf[65536];
    const ssize_t n = ::read(read_fd_, buf, sizeof buf);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("read from scorer failed: ") + std::strerror(errno));
    }
    if (n == 0) throw ProtocolError("scorer closed the connection");
    buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

std::unique_ptr<LineTransport> connect_tcp(const std::string& host, int port) {
  ::signal(SIGPIPE, SIG_IGN);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const auto port_str = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res); rc != 0)
    throw ProtocolError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  int fd = -1;
  for (auto* p = res; p; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw ProtocolError("cannot connect to " + host + ":" + port_str);
  return std::make_unique<FdTransport>(fd, fd);
}

std::unique_ptr<LineTransport> spawn_process(const std::string& command) {
  ::signal(SIGPIPE, SIG_IGN);
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
    throw ProtocolError(std::string("pipe failed: ") + std::strerror(errno));
  const pid_t pid = ::fork();
  if (pid < 0) throw ProtocolError(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::make_unique<FdTransport>(from_child[0], to_child[1], pid);
}

// ---- remote scorer ----------------------------------------------------------

RemoteScorer::RemoteScorer(std::unique_ptr<LineTransport> transport, std::string name,
                           RemoteOptions options)
    : transport_(std::move(transport)), name_(std::move(name)), options_(options) {}

ScoreRecord RemoteScorer::score(const ScoreRequest& request) const {
  if (request.phrase_text.empty()) throw ProtocolError("request phrase must be non-empty");
  std::lock_guard lock(mu_);
  const auto line = serialize_request(request);
  transport_->write_line(line);
  int attempts = 0;
  while (true) {
    auto reply = transport_->read_line(options_.timeout);
    if (!reply) {
      if (attempts >= options_.retries)
        throw TimeoutError("scorer timed out on request " + request.request_id);
      ++attempts;
      abandoned_.insert(request.request_id);
      transport_->write_line(line);
      continue;
    }
    if (auto meta = parse_meta(*reply)) {
      meta_ = *meta;
      continue;
    }
    auto rec = parse_response(*reply);
    if (rec.request_id != request.request_id) {
      // a late answer to a request we already re-sent
      if (auto it = abandoned_.find(rec.request_id); it != abandoned_.end()) {
        abandoned_.erase(it);
        continue;
      }
      throw ProtocolError("response id '" + rec.request_id + "' does not match request '" +
                          request.request_id + "'");
    }
    // after k re-sends, abandoned_ holds k copies of this id: one per
    // duplicate answer still in flight
    validate_record(rec, request.full_text().size());
    return rec;
  }
}

ScorerInfo RemoteScorer::info() const { return {name_, true}; }

std::optional<std::string> RemoteScorer::meta() const {
  std::lock_guard lock(mu_);
  return meta_;
}

std::unique_ptr<RemoteScorer> remote_scorer(const std::string& address, RemoteOptions options) {
  if (address.rfind("exec:", 0) == 0) {
    return std::make_unique<RemoteScorer>(spawn_process(address.substr(5)), "remote:" + address,
                                          options);
  }
  std::string rest = address;
  if (rest.rfind("tcp://", 0) == 0) rest = rest.substr(6);
  const auto colon = rest.rfind(':');
  if (colon == std::string::npos || colon == 0)
    throw UsageError("remote address must be tcp://HOST:PORT or exec:COMMAND, got '" + address + "'");
  int port = 0;
  try {
    port = std::stoi(rest.substr(colon + 1));
  } catch (const std::logic_error&) {
    throw UsageError("bad port in remote address '" + address + "'");
  }
  return std::make_unique<RemoteScorer>(connect_tcp(rest.substr(0, colon), port),
                                        "remote:" + address, options);
}

std::unique_ptr<Scorer> scorer_from_spec(const std::string& spec, RemoteOptions options) {
  if (spec.rfind("oracle:", 0) == 0) return oracle_from_spec(std::string_view(spec).substr(7));
  if (spec.rfind("remote:", 0) == 0) return remote_scorer(spec.substr(7), options);
  throw UsageError("scorer must be oracle:SPEC or remote:ADDR, got '" + spec + "'");
}

}  // namespace aoplab::scoring
