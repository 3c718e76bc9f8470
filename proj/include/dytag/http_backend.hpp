#pragma once

#include <chrono>
#include <string>

#include "dytag/llm_gateway.hpp"

namespace dytag {

struct HttpOptions {
  /// Base URL such as "https://api.example.com"; "/v1/chat/completions" is
  /// appended unless the URL already ends with it.
  std::string endpoint;
  std::string api_key;
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{8000};
  std::chrono::seconds timeout{120};
};

/// Chat-completion client. Retries timeouts, 429 and 5xx with capped
/// exponential backoff, at most max_attempts calls per request.
class HttpBackend : public ChatBackend {
 public:
  explicit HttpBackend(HttpOptions opts);
  ChatResponse complete(const ChatRequest& r) override;
  BackendKind kind() const override { return BackendKind::http; }
  /// Total HTTP calls issued, retries included.
  std::size_t attempts() const { return attempts_; }

 private:
  HttpOptions opts_;
  std::string host_;
  std::string path_;
  std::atomic<std::size_t> attempts_{0};
};

}  // namespace dytag
