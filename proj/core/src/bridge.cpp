#include "topicmark/bridge.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

namespace topicmark::bridge {

using nlohmann::json;

namespace {
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}
}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t v = (std::uint32_t{bytes[i]} << 16) | (std::uint32_t{bytes[i + 1]} << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (const std::size_t rest = bytes.size() - i; rest > 0) {
    std::uint32_t v = std::uint32_t{bytes[i]} << 16;
    if (rest == 2) v |= std::uint32_t{bytes[i + 1]} << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw BridgeError("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + static_cast<std::size_t>(k)];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
      } else {
        if (pad) throw BridgeError("base64 padding in the middle of a quantum");
        v[k] = decode_char(c);
        if (v[k] < 0) throw BridgeError("invalid base64 character");
      }
    }
    const std::uint32_t q = (std::uint32_t(v[0]) << 18) | (std::uint32_t(v[1]) << 12) |
                            (std::uint32_t(v[2]) << 6) | std::uint32_t(v[3]);
    out.push_back(static_cast<std::uint8_t>(q >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(q >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(q));
  }
  return out;
}

std::string encode_logits(std::span<const float> logits) {
  std::vector<std::uint8_t> bytes(logits.size() * 4);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const std::uint32_t b = std::bit_cast<std::uint32_t>(logits[i]);
    for (int k = 0; k < 4; ++k) bytes[i * 4 + static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(b >> (8 * k));
  }
  return base64_encode(bytes);
}

std::vector<float> decode_logits(std::string_view b64) {
  const auto bytes = base64_decode(b64);
  if (bytes.size() % 4 != 0) throw BridgeError("logit payload is not a whole number of floats");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t b = 0;
    for (int k = 0; k < 4; ++k) b |= std::uint32_t{bytes[i * 4 + static_cast<std::size_t>(k)]} << (8 * k);
    out[i] = std::bit_cast<float>(b);
  }
  return out;
}

bool Handshake::has_capability(std::string_view c) const {
  for (const auto& x : capabilities) {
    if (x == c) return true;
  }
  return false;
}

std::string hello_frame() {
  return json{{"type", "hello"}, {"protocol_version", kProtocolVersion}}.dump();
}

std::string handshake_frame(const Handshake& h) {
  return json{{"type", "handshake"},
              {"protocol_version", h.protocol_version},
              {"vocab_size", h.vocab_size},
              {"model_name", h.model_name},
              {"tokenizer_fingerprint", h.tokenizer_fingerprint},
              {"capabilities", h.capabilities}}
      .dump();
}

namespace {

json parse_frame(std::string_view line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw BridgeError("malformed frame: " + std::string(line.substr(0, 200)));
  return j;
}

[[noreturn]] void throw_remote_error(const json& j) {
  throw BridgeError("remote error: " + j.value("message", std::string("(no message)")));
}

}  // namespace

Handshake parse_handshake(std::string_view line) {
  const json j = parse_frame(line);
  const std::string type = j.value("type", "");
  if (type == "error") throw_remote_error(j);
  if (type != "handshake") throw BridgeError("expected a handshake frame, got '" + type + "'");
  Handshake h;
  try {
    h.protocol_version = j.at("protocol_version").get<int>();
    h.vocab_size = j.at("vocab_size").get<std::size_t>();
    h.model_name = j.value("model_name", "");
    h.tokenizer_fingerprint = j.value("tokenizer_fingerprint", "");
    h.capabilities = j.value("capabilities", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw BridgeError(std::string("bad handshake: ") + e.what());
  }
  return h;
}

std::string logits_request_frame(std::uint64_t id, std::span<const TokenId> context) {
  return json{{"type", "logits"}, {"id", id}, {"context", std::vector<TokenId>(context.begin(), context.end())}}
      .dump();
}

std::string keywords_request_frame(std::uint64_t id, std::string_view text) {
  return json{{"type", "keywords"}, {"id", id}, {"text", text}}.dump();
}

std::string logits_response_frame(std::uint64_t id, std::span<const float> logits) {
  return json{{"type", "logits"}, {"id", id}, {"logits", encode_logits(logits)}}.dump();
}

std::string keywords_response_frame(std::uint64_t id, const std::vector<RemoteKeyword>& kws) {
  json arr = json::array();
  for (const auto& k : kws) arr.push_back({{"term", k.term}, {"relevance", k.relevance}});
  return json{{"type", "keywords"}, {"id", id}, {"keywords", arr}}.dump();
}

std::string error_frame(std::optional<std::uint64_t> id, std::string_view message) {
  json j{{"type", "error"}, {"message", message}};
  j["id"] = id ? json(*id) : json(nullptr);
  return j.dump();
}

// ---------------------------------------------------------------- transports

namespace {

void write_all(int fd, std::string_view data, bool socket) {
  while (!data.empty()) {
    const ssize_t n = socket ? ::send(fd, data.data(), data.size(), MSG_NOSIGNAL)
                             : ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BridgeError(std::string("write failed: ") + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

std::string read_line(int fd, std::string& buffer) {
  while (true) {
    if (auto nl = buffer.find('\n'); nl != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    char chunk[65536];
    const ssize_t n = ::read(fd, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BridgeError(std::string("read failed: ") + std::strerror(errno));
    }
    if (n == 0) throw BridgeError("connection closed by peer");
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

}  // namespace

ProcessTransport::ProcessTransport(std::vector<std::string> argv) {
  if (argv.empty()) throw BridgeError("empty command for process transport");
  ::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0) throw BridgeError("pipe() failed");
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw BridgeError("pipe() failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw BridgeError("fork() failed");
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    std::vector<char*> args;
    for (auto& a : argv) args.push_back(a.data());
    args.push_back(nullptr);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

ProcessTransport::~ProcessTransport() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
}

void ProcessTransport::send_line(std::string_view line) {
  std::string framed(line);
  framed.push_back('\n');
  write_all(to_child_, framed, false);
}

std::string ProcessTransport::receive_line() { return read_line(from_child_, buffer_); }

TcpTransport::TcpTransport(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res) {
    throw BridgeError("cannot resolve " + host);
  }
  for (addrinfo* a = res; a; a = a->ai_next) {
    const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
      fd_ = fd;
      break;
    }
    ::close(fd);
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) throw BridgeError("cannot connect to " + host + ":" + service);
}

TcpTransport::~TcpTransport() {
  if (fd_ >= 0) ::close(fd_);
}

void TcpTransport::send_line(std::string_view line) {
  std::string framed(line);
  framed.push_back('\n');
  write_all(fd_, framed, true);
}

std::string TcpTransport::receive_line() { return read_line(fd_, buffer_); }

std::unique_ptr<LineTransport> open_transport(std::string_view spec) {
  if (spec.starts_with("stdio:")) {
    std::vector<std::string> argv;
    std::string_view rest = spec.substr(6);
    while (!rest.empty()) {
      const auto sp = rest.find(' ');
      if (sp != 0) argv.emplace_back(rest.substr(0, sp));
      if (sp == std::string_view::npos) break;
      rest.remove_prefix(sp + 1);
    }
    return std::make_unique<ProcessTransport>(std::move(argv));
  }
  if (spec.starts_with("tcp:")) {
    std::string_view rest = spec.substr(4);
    std::string host = "127.0.0.1";
    if (const auto colon = rest.rfind(':'); colon != std::string_view::npos) {
      host = std::string(rest.substr(0, colon));
      rest.remove_prefix(colon + 1);
    }
    const int port = std::stoi(std::string(rest));
    if (port <= 0 || port > 65535) throw BridgeError("bad port");
    return std::make_unique<TcpTransport>(host, static_cast<std::uint16_t>(port));
  }
  throw BridgeError("transport must be stdio:<command> or tcp:[host:]port");
}

// ------------------------------------------------------------------ provider

RemoteLogitProvider::RemoteLogitProvider(std::unique_ptr<LineTransport> transport,
                                         std::optional<std::size_t> expected_vocab)
    : transport_(std::move(transport)) {
  json hello = json::parse(hello_frame());
  if (expected_vocab) hello["vocab_size"] = *expected_vocab;
  transport_->send_line(hello.dump());
  handshake_ = parse_handshake(transport_->receive_line());
  if (handshake_.protocol_version != kProtocolVersion) {
    throw BridgeError("unsupported bridge protocol version " +
                      std::to_string(handshake_.protocol_version));
  }
  if (expected_vocab && handshake_.vocab_size != *expected_vocab) {
    throw BridgeError("session refused: remote vocabulary has " +
                      std::to_string(handshake_.vocab_size) + " tokens, partition has " +
                      std::to_string(*expected_vocab));
  }
}

LogitVector RemoteLogitProvider::next_logits(std::span<const TokenId> context) {
  const std::uint64_t id = next_id_++;
  transport_->send_line(logits_request_frame(id, context));
  const json j = parse_frame(transport_->receive_line());
  if (j.value("type", "") == "error") throw_remote_error(j);
  if (!j.contains("id") || j["id"] != id) throw BridgeError("response id out of order");
  const auto floats = decode_logits(j.at("logits").get<std::string>());
  if (floats.size() != handshake_.vocab_size) {
    throw BridgeError("remote returned " + std::to_string(floats.size()) + " logits, expected " +
                      std::to_string(handshake_.vocab_size));
  }
  return LogitVector(floats.begin(), floats.end());
}

std::optional<std::vector<RemoteKeyword>> RemoteLogitProvider::extract_keywords(std::string_view text) {
  if (!handshake_.has_capability("keywords")) return std::nullopt;
  const std::uint64_t id = next_id_++;
  transport_->send_line(keywords_request_frame(id, text));
  const json j = parse_frame(transport_->receive_line());
  if (j.value("type", "") == "error") throw_remote_error(j);
  if (!j.contains("id") || j["id"] != id) throw BridgeError("response id out of order");
  std::vector<RemoteKeyword> out;
  for (const auto& k : j.at("keywords")) {
    out.push_back({k.at("term").get<std::string>(), k.value("relevance", 0.0)});
  }
  return out;
}

std::string RemoteLogitProvider::roundtrip_raw(std::string_view line) {
  transport_->send_line(line);
  return transport_->receive_line();
}

TopicChoice choose_topic_remote(RemoteLogitProvider& remote, std::string_view text,
                                const EmbeddingTable& table, const StopWords& stop_words,
                                const TopicSet& topics, InferenceMethod method,
                                std::optional<std::size_t> fallback, std::size_t max_k) {
  auto remote_keywords = remote.extract_keywords(text);
  if (!remote_keywords) {
    auto choice = choose_topic_for_text(text, table, stop_words, topics, method, fallback, max_k);
    choice.extractor_fallback = true;
    return choice;
  }
  DetectedTopics detected;
  for (const auto& k : *remote_keywords) {
    if (detected.size() >= max_k) break;
    if (const Vector* v = table.find(k.term)) detected.keywords.push_back({k.term, k.relevance, *v});
  }
  return choose_topic(detected, topics, method, fallback);
}

}  // namespace topicmark::bridge
