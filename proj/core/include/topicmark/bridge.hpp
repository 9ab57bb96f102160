#pragma once

// Client side of the lm-bridge wire protocol (docs/bridge_protocol.md):
// newline-delimited JSON frames over a subprocess's stdio or a TCP socket.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "topicmark/error.hpp"
#include "topicmark/generator.hpp"

namespace topicmark::bridge {

inline constexpr int kProtocolVersion = 1;

class BridgeError : public Error {
 public:
  using Error::Error;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Little-endian IEEE-754 binary32, base64 encoded.
std::string encode_logits(std::span<const float> logits);
std::vector<float> decode_logits(std::string_view b64);

struct Handshake {
  int protocol_version = kProtocolVersion;
  std::size_t vocab_size = 0;
  std::string model_name;
  std::string tokenizer_fingerprint;
  std::vector<std::string> capabilities;

  bool has_capability(std::string_view c) const;
};

struct RemoteKeyword {
  std::string term;
  double relevance = 0.0;
};

// Frame builders and parsers, shared by the client and by test stubs.
std::string hello_frame();
std::string handshake_frame(const Handshake& h);
Handshake parse_handshake(std::string_view line);
std::string logits_request_frame(std::uint64_t id, std::span<const TokenId> context);
std::string keywords_request_frame(std::uint64_t id, std::string_view text);
std::string logits_response_frame(std::uint64_t id, std::span<const float> logits);
std::string keywords_response_frame(std::uint64_t id, const std::vector<RemoteKeyword>& kws);
std::string error_frame(std::optional<std::uint64_t> id, std::string_view message);

/// A bidirectional line channel.
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual void send_line(std::string_view line) = 0;
  /// Blocks for the next line (without the newline). Throws BridgeError on EOF.
  virtual std::string receive_line() = 0;
};

/// Spawns `argv` and talks to it over its stdin/stdout.
class ProcessTransport final : public LineTransport {
 public:
  explicit ProcessTransport(std::vector<std::string> argv);
  ~ProcessTransport() override;
  ProcessTransport(const ProcessTransport&) = delete;
  ProcessTransport& operator=(const ProcessTransport&) = delete;

  void send_line(std::string_view line) override;
  std::string receive_line() override;

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

/// Connects to host:port.
class TcpTransport final : public LineTransport {
 public:
  TcpTransport(const std::string& host, std::uint16_t port);
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  void send_line(std::string_view line) override;
  std::string receive_line() override;

 private:
  int fd_ = -1;
  std::string buffer_;
};

/// Parses "stdio:<command ...>" or "tcp:host:port" / "tcp:port".
std::unique_ptr<LineTransport> open_transport(std::string_view spec);

/// LogitProvider backed by a remote model. Performs the handshake on
/// construction and refuses a session whose vocabulary size differs from
/// `expected_vocab` when given.
class RemoteLogitProvider final : public LogitProvider {
 public:
  explicit RemoteLogitProvider(std::unique_ptr<LineTransport> transport,
                               std::optional<std::size_t> expected_vocab = std::nullopt);

  const Handshake& handshake() const noexcept { return handshake_; }
  std::size_t vocab_size() const override { return handshake_.vocab_size; }
  LogitVector next_logits(std::span<const TokenId> context) override;

  /// Keywords from the remote extractor, or nullopt when the session lacks the
  /// "keywords" capability.
  std::optional<std::vector<RemoteKeyword>> extract_keywords(std::string_view text);

  /// Sends a raw line and returns the raw reply; for conformance testing.
  std::string roundtrip_raw(std::string_view line);

 private:
  std::unique_ptr<LineTransport> transport_;
  Handshake handshake_;
  std::uint64_t next_id_ = 1;
};

/// Topic choice using the remote extractor when the session offers it. The
/// remote terms are looked up in `table` (terms without an embedding are
/// dropped); without the capability the built-in extractor runs and
/// TopicChoice::extractor_fallback is set.
TopicChoice choose_topic_remote(RemoteLogitProvider& remote, std::string_view text,
                                const EmbeddingTable& table, const StopWords& stop_words,
                                const TopicSet& topics, InferenceMethod method,
                                std::optional<std::size_t> fallback = std::nullopt,
                                std::size_t max_k = 5);

}  // namespace topicmark::bridge
