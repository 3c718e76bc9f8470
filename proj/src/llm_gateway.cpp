#include "dytag/llm_gateway.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <ctime>

#include "dytag/hashing.hpp"

namespace dytag {

std::string_view backend_name(BackendKind k) {
  switch (k) {
    case BackendKind::http: return "http";
    case BackendKind::mock: return "mock";
    case BackendKind::replay: return "replay";
  }
  return "?";
}

std::optional<BackendKind> parse_backend(std::string_view s) {
  for (auto k : {BackendKind::http, BackendKind::mock, BackendKind::replay})
    if (backend_name(k) == s) return k;
  return std::nullopt;
}

namespace {

std::string normalize_content(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i <= s.size()) {
    auto nl = s.find('\n', i);
    if (nl == std::string_view::npos) nl = s.size();
    auto line = s.substr(i, nl - i);
    const auto last = line.find_last_not_of(" \t\r");
    line = last == std::string_view::npos ? std::string_view{} : line.substr(0, last + 1);
    out.append(line);
    if (nl < s.size()) out.push_back('\n');
    i = nl + 1;
  }
  return out;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json messages_json(const std::vector<ChatMessage>& messages) {
  auto arr = nlohmann::json::array();
  for (const auto& m : messages) arr.push_back({{"role", m.role}, {"content", m.content}});
  return arr;
}

}  // namespace

nlohmann::json canonical_request(const ChatRequest& r) {
  auto msgs = nlohmann::json::array();
  for (const auto& m : r.messages)
    msgs.push_back({{"role", m.role}, {"content", normalize_content(m.content)}});
  return {{"model", r.model},
          {"messages", msgs},
          {"temperature", r.temperature},
          {"max_tokens", r.max_tokens}};
}

std::string request_digest(const ChatRequest& r) { return sha256_hex(canonical_request(r).dump()); }

nlohmann::json to_json(const TranscriptRecord& r) {
  return {{"request_digest", r.request_digest},
          {"request",
           {{"model", r.request.model},
            {"messages", messages_json(r.request.messages)},
            {"temperature", r.request.temperature},
            {"max_tokens", r.request.max_tokens},
            {"expect_structured", r.request.expect_structured},
            {"purpose", r.request.purpose}}},
          {"response",
           {{"content", r.response.content},
            {"latency_ms", r.response.latency_ms},
            {"backend", backend_name(r.response.backend)}}},
          {"wall_time", r.wall_time}};
}

TranscriptRecord transcript_record_from_json(const nlohmann::json& j) {
  TranscriptRecord r;
  r.request_digest = j.at("request_digest").get<std::string>();
  const auto& req = j.at("request");
  r.request.model = req.at("model").get<std::string>();
  for (const auto& m : req.at("messages"))
    r.request.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
  r.request.temperature = req.at("temperature").get<double>();
  r.request.max_tokens = req.at("max_tokens").get<int>();
  r.request.expect_structured = req.value("expect_structured", false);
  r.request.purpose = req.value("purpose", std::string{});
  const auto& resp = j.at("response");
  r.response.content = resp.at("content").get<std::string>();
  r.response.latency_ms = resp.value("latency_ms", std::int64_t{0});
  r.response.backend = parse_backend(resp.value("backend", std::string("mock"))).value_or(BackendKind::mock);
  r.wall_time = j.value("wall_time", std::string{});
  return r;
}

std::vector<TranscriptRecord> read_transcript(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read transcript " + path.string());
  std::vector<TranscriptRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(transcript_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(n) + ": malformed transcript record: " + e.what());
    }
  }
  return out;
}

TranscriptWriter::TranscriptWriter(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_) throw Error("cannot open transcript " + path.string());
}

void TranscriptWriter::append(const TranscriptRecord& r) {
  const auto line = to_json(r).dump() + "\n";
  std::lock_guard lock(mu_);
  out_ << line;
  out_.flush();
}

// ---------------------------------------------------------------------------
// Replay

ReplayBackend::ReplayBackend(const std::filesystem::path& transcript)
    : ReplayBackend(read_transcript(transcript)) {}

ReplayBackend::ReplayBackend(const std::vector<TranscriptRecord>& records) {
  for (const auto& r : records) entries_[r.request_digest].responses.push_back(r.response.content);
}

ChatResponse ReplayBackend::complete(const ChatRequest& r) {
  const auto digest = request_digest(r);
  std::lock_guard lock(mu_);
  auto it = entries_.find(digest);
  if (it == entries_.end()) throw ReplayMissError(digest);
  auto& e = it->second;
  ChatResponse resp;
  resp.backend = BackendKind::replay;
  resp.content = e.responses[std::min(e.next, e.responses.size() - 1)];
  if (e.next < e.responses.size()) ++e.next;
  return resp;
}

// ---------------------------------------------------------------------------
// Gateway

ChatGateway::ChatGateway(std::shared_ptr<ChatBackend> backend, GatewayOptions opts)
    : backend_(std::move(backend)),
      opts_(std::move(opts)),
      slots_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(opts_.max_in_flight, 1, 1024))) {
  if (opts_.transcript) transcript_ = std::make_unique<TranscriptWriter>(*opts_.transcript);
}

ChatRequest ChatGateway::make_request(std::string system, std::string user, std::string purpose) const {
  ChatRequest r;
  r.model = opts_.model;
  r.temperature = opts_.temperature;
  r.max_tokens = opts_.max_tokens;
  r.purpose = std::move(purpose);
  if (!system.empty()) r.messages.push_back({"system", std::move(system)});
  r.messages.push_back({"user", std::move(user)});
  return r;
}

ChatResponse ChatGateway::complete(const ChatRequest& r, std::string* digest_out) {
  if (r.messages.empty()) throw UsageError("chat request has no messages");
  const auto digest = request_digest(r);
  if (digest_out) *digest_out = digest;
  slots_.acquire();
  ChatResponse resp;
  const auto start = std::chrono::steady_clock::now();
  try {
    resp = backend_->complete(r);
  } catch (...) {
    slots_.release();
    throw;
  }
  slots_.release();
  resp.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - start)
                        .count();
  ++calls_;
  if (transcript_) transcript_->append({digest, r, resp, utc_now()});
  return resp;
}

}  // namespace dytag
