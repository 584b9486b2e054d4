#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cdmizer/types.hpp"

namespace cdmizer {

class BackendError : public Error {
 public:
  using Error::Error;
};

// Connection refused, reset, timed out, ... Retried with backoff.
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

class HttpStatusError : public BackendError {
 public:
  HttpStatusError(int status, const std::string& body)
      : BackendError("backend returned HTTP " + std::to_string(status) + ": " + body.substr(0, 300)),
        status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct PromptMeta {
  std::string doc_id;
  ClauseKind clause = ClauseKind::Mta;
  Mode mode = Mode::WithoutRag;
  std::size_t k = 0;
};

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

struct ChatRequest {
  PromptMeta meta;
  std::vector<ChatMessage> messages;
  int attempt = 1;
};

struct Completion {
  std::string text;
  double latency_ms = 0.0;
  std::optional<int> prompt_tokens;
  std::optional<int> completion_tokens;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual Completion complete(const ChatRequest& request) = 0;
  virtual std::string id() const = 0;
};

// Canned responses. File lookup under `dir`, first hit wins:
//   <doc>.<clause>.<mode>.<attempt>.txt, <doc>.<clause>.<mode>.txt, <doc>.<clause>.txt
class MockBackend : public Backend {
 public:
  using Responder = std::function<std::string(const ChatRequest&)>;

  explicit MockBackend(std::filesystem::path dir);
  explicit MockBackend(Responder responder, std::string name = "mock");

  Completion complete(const ChatRequest& request) override;
  std::string id() const override { return name_; }
  std::size_t calls() const { return calls_.load(); }

 private:
  std::optional<std::filesystem::path> dir_;
  Responder responder_;
  std::string name_;
  std::atomic<std::size_t> calls_{0};
};

struct HttpBackendConfig {
  std::string endpoint;  // base URL or full chat-completions URL
  std::string model;
  std::string api_key;
  double timeout_s = 120.0;
  int max_transport_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  int seed = 0;
};

// Chat-completion-compatible HTTP endpoint, temperature 0.
class HttpChatBackend : public Backend {
 public:
  explicit HttpChatBackend(HttpBackendConfig config);

  Completion complete(const ChatRequest& request) override;
  std::string id() const override;
  // Total connection attempts made so far, retries included.
  std::size_t transport_attempts() const { return transport_attempts_.load(); }

  static Json request_body(const HttpBackendConfig& config, const ChatRequest& request);

 private:
  HttpBackendConfig config_;
  std::string url_;
  std::atomic<std::size_t> transport_attempts_{0};
};

// Caps concurrent requests toward the backend.
class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, std::size_t max_in_flight = 4);

  Completion complete(const ChatRequest& request);
  std::string backend_id() const { return backend_->id(); }
  std::size_t max_in_flight() const { return max_in_flight_; }
  std::size_t peak_in_flight() const { return peak_.load(); }

 private:
  std::shared_ptr<Backend> backend_;
  std::size_t max_in_flight_;
  std::mutex mutex_;
  std::condition_variable slot_free_;
  std::size_t in_flight_ = 0;
  std::atomic<std::size_t> peak_{0};
};

}  // namespace cdmizer
