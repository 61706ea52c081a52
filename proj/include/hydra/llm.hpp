#pragma once

#include <chrono>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace hydra {

/// Text-in, text-out language model. complete() returns the completion or
/// throws BackendUnavailable; it never blocks past the backend's timeout.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string complete(const std::string& prompt) = 0;
  [[nodiscard]] virtual std::string identity() const = 0;
};

struct ChatEndpointConfig {
  std::string url;  // full chat-completions URL
  std::string model;
  std::string api_key;
  std::chrono::milliseconds timeout{60000};
  int max_attempts = 3;
  std::chrono::milliseconds backoff{500};
  double temperature = 0.7;
};

/// OpenAI-style chat-completions client. Transport errors, 429 and 5xx are
/// retried with linear backoff; other statuses fail immediately.
class HttpChatBackend final : public LlmBackend {
 public:
  explicit HttpChatBackend(ChatEndpointConfig config) : config_(std::move(config)) {}

  std::string complete(const std::string& prompt) override;
  [[nodiscard]] std::string identity() const override { return "chat:" + config_.model; }

 private:
  ChatEndpointConfig config_;
};

/// Replays a fixed queue of completions and records every prompt.
class ScriptedBackend final : public LlmBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> replies, std::string name = "scripted",
                           bool repeat_last = false);

  std::string complete(const std::string& prompt) override;
  [[nodiscard]] std::string identity() const override { return name_; }

  [[nodiscard]] std::vector<std::string> prompts() const;
  [[nodiscard]] std::size_t calls() const;

 private:
  mutable std::mutex mutex_;
  std::deque<std::string> replies_;
  std::string last_;
  std::string name_;
  bool repeat_last_;
  std::vector<std::string> prompts_;
};

/// Completion computed by a callable; used by rule-based mock models.
class FunctionBackend final : public LlmBackend {
 public:
  using Fn = std::function<std::string(const std::string&)>;
  FunctionBackend(Fn fn, std::string name) : fn_(std::move(fn)), name_(std::move(name)) {}

  std::string complete(const std::string& prompt) override { return fn_(prompt); }
  [[nodiscard]] std::string identity() const override { return name_; }

 private:
  Fn fn_;
  std::string name_;
};

}  // namespace hydra
