#include "icl/gateway.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "icl/hash.hpp"

namespace icl {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::size_t kEmbedBatchLimit = 100;
constexpr std::chrono::milliseconds kBackoffCap{8000};

bool retryable_status(int status) { return status == 429 || (status >= 500 && status < 600); }

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Splits "https://host:port/v1" into the client target and the path prefix.
struct BaseUrl {
  std::string origin;
  std::string path_prefix;
};

BaseUrl split_base_url(const std::string& base_url) {
  const std::size_t scheme = base_url.find("://");
  if (scheme == std::string::npos) {
    throw GatewayError(GatewayError::Kind::NonRetryableStatus,
                       "base_url '" + base_url + "' has no scheme");
  }
  const std::size_t path = base_url.find('/', scheme + 3);
  BaseUrl out;
  if (path == std::string::npos) {
    out.origin = base_url;
  } else {
    out.origin = base_url.substr(0, path);
    out.path_prefix = base_url.substr(path);
    while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  }
  return out;
}

// Bounded counter used to cap outstanding requests.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(int limit) : limit_(limit) {}

  void acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return active_ < limit_; });
    ++active_;
  }
  void release() {
    {
      std::lock_guard lock(mutex_);
      --active_;
    }
    cv_.notify_one();
  }

 private:
  int limit_;
  int active_ = 0;
  std::mutex mutex_;
  std::condition_variable cv_;
};

struct InFlightGuard {
  explicit InFlightGuard(InFlightLimiter& limiter) : limiter(limiter) { limiter.acquire(); }
  ~InFlightGuard() { limiter.release(); }
  InFlightLimiter& limiter;
};

}  // namespace

std::vector<CompletionOutcome> Provider::complete_many(
    const std::vector<CompletionRequest>& requests) {
  std::vector<CompletionOutcome> out(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    try {
      out[i] = {true, complete(requests[i]), ""};
    } catch (const std::exception& e) {
      out[i] = {false, "", e.what()};
      for (std::size_t j = i + 1; j < requests.size(); ++j) {
        out[j] = {false, "", "aborted: earlier request failed"};
      }
      break;
    }
  }
  return out;
}

RequestLog::RequestLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

void RequestLog::record(const std::string& content_hash, const std::string& model, int status,
                        std::int64_t latency_ms) {
  ordered_json line;
  line["timestamp"] = iso8601_now();
  line["content_hash"] = content_hash;
  line["model"] = model;
  line["status"] = status;
  line["latency_ms"] = latency_ms;
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app);
  if (out) out << line.dump() << "\n";
}

struct RemoteProvider::Impl {
  ProviderConfig config;
  BaseUrl base;
  std::unique_ptr<RequestLog> log;
  InFlightLimiter limiter;

  explicit Impl(ProviderConfig cfg)
      : config(std::move(cfg)), base(split_base_url(config.base_url)),
        limiter(std::max(config.max_in_flight, 1)) {
    if (config.max_in_flight < 1) {
      throw GatewayError(GatewayError::Kind::NonRetryableStatus, "max_in_flight must be >= 1");
    }
    if (config.max_retries < 0) {
      throw GatewayError(GatewayError::Kind::NonRetryableStatus, "max_retries must be >= 0");
    }
    if (!config.request_log.empty()) log = std::make_unique<RequestLog>(config.request_log);
  }

  std::string credential() const {
    const char* value =
        config.credential_env_var.empty() ? nullptr : std::getenv(config.credential_env_var.c_str());
    if (value == nullptr || *value == '\0') {
      throw GatewayError(GatewayError::Kind::MissingCredential,
                         "credential environment variable '" + config.credential_env_var +
                             "' is not set");
    }
    return value;
  }

  // One POST with retry/backoff. Returns the parsed response body.
  json post_json(const std::string& route, const ordered_json& body,
                 const std::string& content_hash, const std::string& model) {
    const std::string key = credential();
    const std::string path = base.path_prefix + route;
    std::string last_error;
    int last_status = 0;

    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
      if (attempt > 0) {
        auto delay = config.backoff_base * (1LL << (attempt - 1));
        if (delay > kBackoffCap) delay = kBackoffCap;
        std::this_thread::sleep_for(delay);
      }

      const auto started = std::chrono::steady_clock::now();
      httplib::Result result = [&] {
        InFlightGuard guard(limiter);
        httplib::Client client(base.origin);
        client.set_connection_timeout(config.request_timeout);
        client.set_read_timeout(config.request_timeout);
        client.set_write_timeout(config.request_timeout);
        httplib::Headers headers{{"Authorization", "Bearer " + key}};
        return client.Post(path, headers, body.dump(), "application/json");
      }();
      const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - started)
                               .count();

      if (!result) {
        last_status = 0;
        last_error = "transport error: " + httplib::to_string(result.error());
        if (log) log->record(content_hash, model, 0, latency);
        continue;  // connection failures and timeouts are retryable
      }

      const int status = result->status;
      if (log) log->record(content_hash, model, status, latency);
      if (status >= 200 && status < 300) {
        try {
          return json::parse(result->body);
        } catch (const json::exception& e) {
          throw GatewayError(GatewayError::Kind::MalformedResponse,
                             std::string("malformed response body: ") + e.what(), status);
        }
      }
      if (retryable_status(status)) {
        last_status = status;
        last_error = "HTTP " + std::to_string(status);
        continue;
      }
      if (status == 401 || status == 403) {
        throw GatewayError(GatewayError::Kind::MissingCredential,
                           "provider rejected credential (HTTP " + std::to_string(status) + ")",
                           status);
      }
      throw GatewayError(GatewayError::Kind::NonRetryableStatus,
                         "HTTP " + std::to_string(status) + " from " + route, status);
    }

    throw GatewayError(GatewayError::Kind::RetriesExhausted,
                       "giving up on " + route + " after " + std::to_string(config.max_retries + 1) +
                           " attempts; last error: " + last_error,
                       last_status);
  }
};

RemoteProvider::RemoteProvider(ProviderConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

RemoteProvider::~RemoteProvider() = default;

std::string RemoteProvider::complete(const CompletionRequest& request) {
  if (request.prompt_text.empty()) {
    throw GatewayError(GatewayError::Kind::NonRetryableStatus, "prompt_text is empty");
  }
  ordered_json body;
  body["model"] = request.model;
  body["messages"] = json::array({{{"role", "user"}, {"content", request.prompt_text}}});
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;

  const json response =
      impl_->post_json("/chat/completions", body, sha256_hex(request.prompt_text), request.model);
  try {
    return response.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw GatewayError(GatewayError::Kind::MalformedResponse,
                       std::string("unexpected completion payload: ") + e.what());
  }
}

std::vector<EmbeddingVector> RemoteProvider::embed_texts(const std::vector<std::string>& texts,
                                                         const std::string& model) {
  if (texts.empty()) {
    throw GatewayError(GatewayError::Kind::NonRetryableStatus, "embed: no input texts");
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += kEmbedBatchLimit) {
    const std::size_t end = std::min(start + kEmbedBatchLimit, texts.size());
    ordered_json body;
    body["model"] = model;
    body["input"] = std::vector<std::string>(texts.begin() + start, texts.begin() + end);

    const std::string batch_hash =
        sha256_hex(std::to_string(start) + ":" + std::to_string(end) + ":" + texts[start]);
    const json response = impl_->post_json("/embeddings", body, batch_hash, model);

    std::vector<std::vector<float>> vectors(end - start);
    std::size_t seen = 0;
    try {
      for (const json& item : response.at("data")) {
        const std::size_t index = item.at("index").get<std::size_t>();
        if (index >= vectors.size()) {
          throw GatewayError(GatewayError::Kind::MalformedResponse,
                             "embedding index out of range");
        }
        vectors[index] = item.at("embedding").get<std::vector<float>>();
        ++seen;
      }
    } catch (const json::exception& e) {
      throw GatewayError(GatewayError::Kind::MalformedResponse,
                         std::string("unexpected embeddings payload: ") + e.what());
    }
    if (seen != vectors.size()) {
      throw GatewayError(GatewayError::Kind::CountMismatch,
                         "provider returned " + std::to_string(seen) + " vectors for " +
                             std::to_string(vectors.size()) + " texts");
    }
    for (auto& values : vectors) out.push_back({std::move(values), model});
  }
  return out;
}

std::vector<CompletionOutcome> RemoteProvider::complete_many(
    const std::vector<CompletionRequest>& requests) {
  std::vector<CompletionOutcome> out(requests.size());
  if (requests.empty()) return out;

  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(impl_->config.max_in_flight), requests.size());

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= requests.size()) return;
        if (abort.load()) {
          out[i] = {false, "", "aborted: earlier request failed"};
          continue;
        }
        try {
          out[i] = {true, complete(requests[i]), ""};
        } catch (const std::exception& e) {
          out[i] = {false, "", e.what()};
          abort.store(true);
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  return out;
}

}  // namespace icl
