#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "dytag/error.hpp"

namespace dytag {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0;
  int max_tokens = 1024;
  bool expect_structured = false;
  /// Caller tag such as "lp" or "agent.structure". Not part of the digest.
  std::string purpose;
};

enum class BackendKind { http, mock, replay };
std::string_view backend_name(BackendKind k);
std::optional<BackendKind> parse_backend(std::string_view s);

struct ChatResponse {
  std::string content;
  std::int64_t latency_ms = 0;
  BackendKind backend = BackendKind::mock;
};

struct TranscriptRecord {
  std::string request_digest;
  ChatRequest request;
  ChatResponse response;
  std::string wall_time;
};

/// Canonical form hashed into the digest: model, messages with LF line ends
/// and per-line trailing whitespace removed, temperature, max_tokens.
nlohmann::json canonical_request(const ChatRequest& r);
std::string request_digest(const ChatRequest& r);

nlohmann::json to_json(const TranscriptRecord& r);
TranscriptRecord transcript_record_from_json(const nlohmann::json& j);
std::vector<TranscriptRecord> read_transcript(const std::filesystem::path& path);

/// Append-only JSONL writer; appends are serialized.
class TranscriptWriter {
 public:
  explicit TranscriptWriter(const std::filesystem::path& path);
  void append(const TranscriptRecord& r);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mu_;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& r) = 0;
  virtual BackendKind kind() const = 0;
};

/// Serves recorded responses by digest. Repeated digests are served in
/// recorded order; the last one repeats once exhausted.
class ReplayBackend : public ChatBackend {
 public:
  explicit ReplayBackend(const std::filesystem::path& transcript);
  explicit ReplayBackend(const std::vector<TranscriptRecord>& records);
  ChatResponse complete(const ChatRequest& r) override;
  BackendKind kind() const override { return BackendKind::replay; }
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::vector<std::string> responses;
    std::size_t next = 0;
  };
  std::map<std::string, Entry> entries_;
  std::mutex mu_;
};

struct GatewayOptions {
  std::string model = "gpt-4o-mini";
  double temperature = 0;
  int max_tokens = 1024;
  std::size_t max_in_flight = 8;
  std::optional<std::filesystem::path> transcript;
};

/// Outcome of a completion whose content must parse. Never throws for
/// malformed content; transport and replay errors still propagate.
template <class T>
struct Parsed {
  std::optional<T> value;
  std::vector<std::string> digests;  // every request issued, in order
  std::string raw;                   // content of the last response
  std::string error;                 // parse error of the last attempt
  bool ok() const { return value.has_value(); }
};

inline constexpr std::string_view kReaskJson = "Respond with only the JSON object.";
inline constexpr std::string_view kReaskBinary = "Respond with only '1' or '0'.";

class ChatGateway {
 public:
  ChatGateway(std::shared_ptr<ChatBackend> backend, GatewayOptions opts);

  /// Request with model, temperature and max_tokens taken from the options.
  ChatRequest make_request(std::string system, std::string user, std::string purpose) const;

  /// Throttled completion; the exchange is appended to the transcript.
  ChatResponse complete(const ChatRequest& r, std::string* digest = nullptr);

  /// Completes and parses; on ParseError re-asks once with `reask` appended
  /// as a user message.
  template <class T>
  Parsed<T> complete_parsed(ChatRequest r, const std::function<T(const std::string&)>& parse,
                            std::string_view reask = kReaskJson) {
    Parsed<T> out;
    for (int attempt = 0; attempt < 2; ++attempt) {
      std::string digest;
      const auto resp = complete(r, &digest);
      out.digests.push_back(digest);
      out.raw = resp.content;
      try {
        out.value = parse(resp.content);
        out.error.clear();
        return out;
      } catch (const ParseError& e) {
        out.error = e.what();
      }
      r.messages.push_back({"assistant", resp.content});
      r.messages.push_back({"user", std::string(reask)});
    }
    return out;
  }

  BackendKind backend_kind() const { return backend_->kind(); }
  const GatewayOptions& options() const { return opts_; }
  std::size_t calls() const { return calls_; }

 private:
  std::shared_ptr<ChatBackend> backend_;
  GatewayOptions opts_;
  std::unique_ptr<TranscriptWriter> transcript_;
  std::counting_semaphore<1024> slots_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace dytag
