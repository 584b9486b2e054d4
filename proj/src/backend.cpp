#include "cdmizer/backend.hpp"

#include <thread>

#include "cdmizer/corpus.hpp"
#include "http_client.hpp"

namespace fs = std::filesystem;

namespace cdmizer {

MockBackend::MockBackend(fs::path dir) : dir_(std::move(dir)), name_("mock:" + dir_->string()) {
  if (!fs::is_directory(*dir_)) throw BackendError("mock directory '" + dir_->string() + "' does not exist");
}

MockBackend::MockBackend(Responder responder, std::string name)
    : responder_(std::move(responder)), name_(std::move(name)) {}

Completion MockBackend::complete(const ChatRequest& request) {
  ++calls_;
  const auto start = std::chrono::steady_clock::now();
  Completion out;
  if (responder_) {
    out.text = responder_(request);
  } else {
    const std::string base = request.meta.doc_id + "." + std::string(clause_slug(request.meta.clause));
    const std::string with_mode = base + "." + std::string(mode_slug(request.meta.mode));
    const fs::path candidates[] = {
        *dir_ / (with_mode + "." + std::to_string(request.attempt) + ".txt"),
        *dir_ / (with_mode + ".txt"),
        *dir_ / (base + ".txt"),
    };
    bool found = false;
    for (const fs::path& path : candidates) {
      if (fs::is_regular_file(path)) {
        out.text = read_text_file(path);
        found = true;
        break;
      }
    }
    if (!found) throw BackendError("mock backend has no canned response for " + with_mode);
  }
  out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

// ---------------------------------------------------------------------------

HttpChatBackend::HttpChatBackend(HttpBackendConfig config)
    : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw BackendError("no LLM endpoint configured");
  url_ = with_default_path(config_.endpoint, "/v1/chat/completions");
}

std::string HttpChatBackend::id() const {
  return "http:" + (config_.model.empty() ? std::string("default") : config_.model) + "@" + url_;
}

Json HttpChatBackend::request_body(const HttpBackendConfig& config, const ChatRequest& request) {
  Json messages = Json::array();
  for (const ChatMessage& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  Json body = Json::object();
  if (!config.model.empty()) body["model"] = config.model;
  body["messages"] = std::move(messages);
  body["temperature"] = 0;
  body["seed"] = config.seed;
  return body;
}

Completion HttpChatBackend::complete(const ChatRequest& request) {
  const std::string body = request_body(config_, request).dump();
  const auto start = std::chrono::steady_clock::now();

  HttpResponse response;
  std::chrono::milliseconds backoff = config_.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    ++transport_attempts_;
    try {
      response = http_post_json(url_, body, config_.api_key, config_.timeout_s);
      break;
    } catch (const TransportError& e) {
      if (attempt >= config_.max_transport_retries) {
        throw TransportError(std::string(e.what()) + " (after " + std::to_string(attempt) + " retries)");
      }
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  if (response.status < 200 || response.status >= 300) throw HttpStatusError(response.status, response.body);

  Completion out;
  out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  try {
    const Json doc = Json::parse(response.body);
    const Json& content = doc.at("choices").at(0).at("message").at("content");
    out.text = content.is_string() ? content.get<std::string>() : content.dump();
    if (auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
      if (usage->contains("prompt_tokens")) out.prompt_tokens = usage->at("prompt_tokens").get<int>();
      if (usage->contains("completion_tokens")) out.completion_tokens = usage->at("completion_tokens").get<int>();
    }
  } catch (const Json::exception& e) {
    throw BackendError(std::string("unexpected chat completion response: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<Backend> backend, std::size_t max_in_flight)
    : backend_(std::move(backend)), max_in_flight_(max_in_flight == 0 ? 1 : max_in_flight) {
  if (!backend_) throw Error("gateway needs a backend");
}

Completion Gateway::complete(const ChatRequest& request) {
  {
    std::unique_lock lock(mutex_);
    slot_free_.wait(lock, [this] { return in_flight_ < max_in_flight_; });
    ++in_flight_;
    std::size_t peak = peak_.load();
    while (in_flight_ > peak && !peak_.compare_exchange_weak(peak, in_flight_)) {
    }
  }
  struct Release {
    Gateway* self;
    ~Release() {
      {
        std::lock_guard lock(self->mutex_);
        --self->in_flight_;
      }
      self->slot_free_.notify_one();
    }
  } release{this};
  return backend_->complete(request);
}

}  // namespace cdmizer
