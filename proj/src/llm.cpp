#include "hydra/llm.hpp"

#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "hydra/error.hpp"
#include "hydra/http.hpp"

namespace hydra {

std::string HttpChatBackend::complete(const std::string& prompt) {
  const nlohmann::json request = {
      {"model", config_.model},
      {"temperature", config_.temperature},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
  std::vector<std::pair<std::string, std::string>> headers;
  if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);

  std::string last_error;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    if (attempt > 1) std::this_thread::sleep_for(config_.backoff * (attempt - 1));
    http::Response res;
    try {
      res = http::post_json(config_.url, request.dump(), headers, config_.timeout);
    } catch (const BackendUnavailable& e) {
      last_error = e.what();
      continue;
    }
    if (res.status == 429 || res.status >= 500) {
      last_error = fmt::format("HTTP {}", res.status);
      continue;
    }
    if (res.status < 200 || res.status >= 300) {
      throw BackendUnavailable(fmt::format("chat endpoint returned HTTP {}: {}", res.status,
                                           res.body.substr(0, 200)));
    }
    auto body = nlohmann::json::parse(res.body, nullptr, false);
    if (body.is_discarded() || !body.contains("choices") || !body["choices"].is_array() ||
        body["choices"].empty()) {
      throw BackendUnavailable("chat endpoint returned an unexpected payload");
    }
    const auto& message = body["choices"][0]["message"];
    if (!message.is_object() || !message.contains("content") || !message["content"].is_string()) {
      throw BackendUnavailable("chat completion without text content");
    }
    return message["content"].get<std::string>();
  }
  throw BackendUnavailable(
      fmt::format("chat endpoint unavailable after {} attempts: {}", config_.max_attempts, last_error));
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> replies, std::string name,
                                 bool repeat_last)
    : replies_(replies.begin(), replies.end()), name_(std::move(name)), repeat_last_(repeat_last) {}

std::string ScriptedBackend::complete(const std::string& prompt) {
  std::lock_guard lock(mutex_);
  prompts_.push_back(prompt);
  if (replies_.empty()) {
    if (repeat_last_ && !last_.empty()) return last_;
    throw BackendUnavailable(name_ + ": scripted replies exhausted");
  }
  last_ = std::move(replies_.front());
  replies_.pop_front();
  return last_;
}

std::vector<std::string> ScriptedBackend::prompts() const {
  std::lock_guard lock(mutex_);
  return prompts_;
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard lock(mutex_);
  return prompts_.size();
}

}  // namespace hydra
