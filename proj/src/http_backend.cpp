#include "dytag/http_backend.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <thread>

namespace dytag {

namespace {

constexpr std::string_view kCompletionsPath = "/v1/chat/completions";

bool transient(int status) { return status == 429 || status >= 500; }

}  // namespace

HttpBackend::HttpBackend(HttpOptions opts) : opts_(std::move(opts)) {
  if (opts_.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
  std::string url = opts_.endpoint;
  while (!url.empty() && url.back() == '/') url.pop_back();
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint must include a scheme: " + opts_.endpoint);
  const auto slash = url.find('/', scheme + 3);
  host_ = url.substr(0, slash);
  path_ = slash == std::string::npos ? std::string{} : url.substr(slash);
  if (path_.size() < kCompletionsPath.size() ||
      path_.compare(path_.size() - kCompletionsPath.size(), kCompletionsPath.size(), kCompletionsPath) != 0)
    path_ += kCompletionsPath;
}

ChatResponse HttpBackend::complete(const ChatRequest& r) {
  nlohmann::json body{{"model", r.model}, {"temperature", r.temperature}, {"max_tokens", r.max_tokens}};
  body["messages"] = nlohmann::json::array();
  for (const auto& m : r.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  const auto payload = body.dump();

  httplib::Client client(host_);
  client.set_connection_timeout(opts_.timeout);
  client.set_read_timeout(opts_.timeout);
  client.set_write_timeout(opts_.timeout);
  httplib::Headers headers;
  if (!opts_.api_key.empty()) headers.emplace("Authorization", "Bearer " + opts_.api_key);

  std::string last_error;
  auto delay = opts_.base_delay;
  for (int attempt = 1; attempt <= opts_.max_attempts; ++attempt) {
    ++attempts_;
    auto res = client.Post(path_, headers, payload, "application/json");
    if (res && res->status == 200) {
      auto j = nlohmann::json::parse(res->body, nullptr, false);
      if (j.is_discarded()) throw TransportError("endpoint returned malformed JSON");
      try {
        ChatResponse out;
        out.backend = BackendKind::http;
        out.content = j.at("choices").at(0).at("message").at("content").get<std::string>();
        return out;
      } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("unexpected completion payload: ") + e.what());
      }
    }
    if (res && !transient(res->status))
      throw TransportError("endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body);
    last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    if (attempt < opts_.max_attempts) {
      spdlog::warn("chat completion attempt {} failed ({}), retrying in {} ms", attempt, last_error,
                   delay.count());
      std::this_thread::sleep_for(delay);
      delay = std::min(delay * 2, opts_.max_delay);
    }
  }
  throw TransportError("chat completion failed after " + std::to_string(opts_.max_attempts) +
                       " attempts: " + last_error);
}

}  // namespace dytag
