#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "icl/embeddings.hpp"

namespace icl {

struct CompletionRequest {
  std::string model;
  std::string prompt_text;
  double temperature = 0.0;
  int max_tokens = 8;
};

struct ProviderConfig {
  std::string base_url;
  std::string credential_env_var;
  std::chrono::milliseconds request_timeout{30000};
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{250};
  int max_in_flight = 4;
  std::filesystem::path request_log;  // empty disables logging
};

class GatewayError : public std::runtime_error {
 public:
  enum class Kind {
    MissingCredential,
    RetriesExhausted,
    NonRetryableStatus,
    MalformedResponse,
    CountMismatch,
    Aborted,
  };

  GatewayError(Kind kind, const std::string& message, int status = 0)
      : std::runtime_error(message), kind(kind), status(status) {}

  Kind kind;
  int status;
};

struct CompletionOutcome {
  bool ok = false;
  std::string text;
  std::string error;
};

// Uniform interface over the remote client and the offline mock.
class Provider : public TextEmbedder {
 public:
  virtual std::string complete(const CompletionRequest& request) = 0;
  virtual std::string name() const = 0;

  // One outcome per request, in request order. Stops dispatching after the
  // first failure; undispatched slots report ok=false.
  virtual std::vector<CompletionOutcome> complete_many(
      const std::vector<CompletionRequest>& requests);
};

// Thread-safe line-delimited JSON request log:
// {timestamp, content_hash, model, status, latency_ms}. Credential material
// is never written.
class RequestLog {
 public:
  explicit RequestLog(std::filesystem::path path);
  void record(const std::string& content_hash, const std::string& model, int status,
              std::int64_t latency_ms);

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

// OpenAI-compatible HTTP client: POST {base_url}/chat/completions and
// {base_url}/embeddings with bearer auth from the configured environment
// variable. Transient failures (connect/timeout, 429, 5xx) retry with
// exponential backoff up to max_retries; other 4xx fail immediately. At most
// max_in_flight requests are outstanding at any moment.
class RemoteProvider : public Provider {
 public:
  explicit RemoteProvider(ProviderConfig config);
  ~RemoteProvider() override;

  std::string complete(const CompletionRequest& request) override;
  std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts,
                                           const std::string& model) override;
  std::vector<CompletionOutcome> complete_many(
      const std::vector<CompletionRequest>& requests) override;
  std::string name() const override { return "remote"; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace icl
