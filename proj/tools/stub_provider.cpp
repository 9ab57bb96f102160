// Reference provider for the bridge protocol. The "model" echoes: its logits
// are a one-hot vector on the last context token, so greedy generation
// repeats the final prompt token forever. Serves stdio by default or TCP with
// --tcp PORT (0 picks a free port, written to --port-file).

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "topicmark/bridge.hpp"
#include "topicmark/text.hpp"

namespace bridge = topicmark::bridge;
using nlohmann::json;

namespace {

struct StubConfig {
  std::size_t vocab_size = 64;
  bool keywords = false;
  float peak = 10.0f;
  std::string model_name = "echo-stub";
};

std::vector<bridge::RemoteKeyword> stub_keywords(const std::string& text) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> stats;  // word -> (count, first)
  const auto words = topicmark::split_words(text);
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!topicmark::is_content_candidate(words[i]) || topicmark::StopWords::english().contains(words[i])) continue;
    auto [it, inserted] = stats.try_emplace(words[i], 0, i);
    ++it->second.first;
  }
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> ranked(stats.begin(), stats.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second.first != b.second.first) return a.second.first > b.second.first;
    return a.second.second < b.second.second;
  });
  std::vector<bridge::RemoteKeyword> out;
  for (std::size_t i = 0; i < ranked.size() && i < 5; ++i) {
    out.push_back({ranked[i].first, static_cast<double>(ranked[i].second.first) / static_cast<double>(words.size())});
  }
  return out;
}

// Builds the reply frame for one request line.
std::string answer(const std::string& line, const StubConfig& cfg) {
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return bridge::error_frame(std::nullopt, "malformed frame");
  std::optional<std::uint64_t> id;
  if (j.contains("id") && j["id"].is_number_unsigned()) id = j["id"].get<std::uint64_t>();
  const std::string type = j.value("type", "");
  if (!id) return bridge::error_frame(std::nullopt, "request without a numeric id");
  if (type == "logits") {
    if (!j.contains("context") || !j["context"].is_array()) return bridge::error_frame(id, "missing context");
    const auto& ctx = j["context"];
    if (ctx.empty()) return bridge::error_frame(id, "empty context");
    if (!ctx.back().is_number_unsigned()) return bridge::error_frame(id, "context ids must be non-negative integers");
    const auto last = ctx.back().get<std::uint64_t>();
    if (last >= cfg.vocab_size) return bridge::error_frame(id, "context token outside the vocabulary");
    std::vector<float> logits(cfg.vocab_size, 0.0f);
    logits[last] = cfg.peak;
    return bridge::logits_response_frame(*id, logits);
  }
  if (type == "keywords") {
    if (!cfg.keywords) return bridge::error_frame(id, "keywords capability not offered");
    return bridge::keywords_response_frame(*id, stub_keywords(j.value("text", "")));
  }
  return bridge::error_frame(id, "unknown request type '" + type + "'");
}

template <typename ReadLine, typename WriteLine>
void serve(ReadLine&& read_line, WriteLine&& write_line, const StubConfig& cfg) {
  std::string line;
  if (!read_line(line)) return;
  const json hello = json::parse(line, nullptr, false);
  if (hello.is_discarded() || hello.value("type", "") != "hello") {
    write_line(bridge::error_frame(std::nullopt, "expected a hello frame"));
    return;
  }
  if (hello.value("protocol_version", 0) != bridge::kProtocolVersion) {
    write_line(bridge::error_frame(std::nullopt, "unsupported protocol version"));
    return;
  }
  if (hello.contains("vocab_size") && hello["vocab_size"].get<std::size_t>() != cfg.vocab_size) {
    write_line(bridge::error_frame(std::nullopt, "vocabulary size mismatch: provider has " +
                                                     std::to_string(cfg.vocab_size)));
    return;
  }
  bridge::Handshake h;
  h.vocab_size = cfg.vocab_size;
  h.model_name = cfg.model_name;
  h.tokenizer_fingerprint = "stub";
  if (cfg.keywords) h.capabilities.push_back("keywords");
  write_line(bridge::handshake_frame(h));
  while (read_line(line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    write_line(answer(line, cfg));
  }
}

void serve_fd(int fd, const StubConfig& cfg) {
  std::string buffer;
  auto read_line = [&](std::string& line) {
    while (true) {
      if (auto nl = buffer.find('\n'); nl != std::string::npos) {
        line = buffer.substr(0, nl);
        buffer.erase(0, nl + 1);
        return true;
      }
      char chunk[65536];
      const ssize_t n = ::read(fd, chunk, sizeof chunk);
      if (n <= 0) return false;
      buffer.append(chunk, static_cast<std::size_t>(n));
    }
  };
  auto write_line = [&](const std::string& s) {
    std::string framed = s + "\n";
    std::size_t off = 0;
    while (off < framed.size()) {
      const ssize_t n = ::send(fd, framed.data() + off, framed.size() - off, MSG_NOSIGNAL);
      if (n <= 0) return;
      off += static_cast<std::size_t>(n);
    }
  };
  serve(read_line, write_line, cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Echo-model provider for the topicmark bridge protocol"};
  StubConfig cfg;
  std::optional<int> tcp_port;
  std::string port_file;
  std::size_t max_sessions = 0;
  app.add_option("--vocab-size", cfg.vocab_size, "Vocabulary size announced in the handshake");
  app.add_flag("--keywords", cfg.keywords, "Offer the keywords capability");
  app.add_option("--peak", cfg.peak, "Logit of the echoed token");
  app.add_option("--tcp", tcp_port, "Listen on this TCP port instead of stdio (0 = any)");
  app.add_option("--port-file", port_file, "Write the bound port here");
  app.add_option("--max-sessions", max_sessions, "Exit after this many TCP sessions (0 = never)");
  CLI11_PARSE(app, argc, argv);

  if (!tcp_port) {
    auto read_line = [](std::string& line) { return static_cast<bool>(std::getline(std::cin, line)); };
    auto write_line = [](const std::string& s) { std::cout << s << '\n' << std::flush; };
    serve(read_line, write_line, cfg);
    return 0;
  }

  const int srv = ::socket(AF_INET, SOCK_STREAM, 0);
  if (srv < 0) {
    std::perror("socket");
    return 1;
  }
  int one = 1;
  ::setsockopt(srv, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(*tcp_port));
  if (::bind(srv, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(srv, 8) != 0) {
    std::perror("bind/listen");
    return 1;
  }
  socklen_t len = sizeof addr;
  ::getsockname(srv, reinterpret_cast<sockaddr*>(&addr), &len);
  const int port = ntohs(addr.sin_port);
  if (!port_file.empty()) {
    const std::string tmp = port_file + ".tmp";
    std::ofstream(tmp) << port << '\n';
    std::rename(tmp.c_str(), port_file.c_str());
  } else {
    std::cout << port << '\n' << std::flush;
  }
  for (std::size_t sessions = 0; max_sessions == 0 || sessions < max_sessions; ++sessions) {
    const int fd = ::accept(srv, nullptr, nullptr);
    if (fd < 0) continue;
    serve_fd(fd, cfg);
    ::close(fd);
  }
  ::close(srv);
  return 0;
}
