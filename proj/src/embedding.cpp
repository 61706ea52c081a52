#include "hydra/embedding.hpp"

#include <cctype>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "hydra/error.hpp"
#include "hydra/http.hpp"
#include "hydra/random.hpp"

namespace hydra {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    while (!current.empty() && (current.back() == '.' || current.back() == '_')) current.pop_back();
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if ((ch == '.' || ch == '_') && !current.empty()) {
      current += ch;
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

Eigen::VectorXd HashingEmbedding::embed(const std::string& text) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(kEmbeddingDim);
  auto tokens = tokenize(text);
  if (tokens.empty()) tokens.emplace_back("<empty>");
  for (const auto& token : tokens) {
    const std::uint64_t h = fnv1a(token);
    const auto bucket = static_cast<Eigen::Index>(h % kEmbeddingDim);
    v[bucket] += (h >> 63) ? -1.0 : 1.0;
  }
  const double norm = v.norm();
  if (norm == 0.0) {
    // Every token cancelled out; fall back to a fixed unit direction.
    v[0] = 1.0;
    return v;
  }
  return v / norm;
}

Eigen::VectorXd HttpEmbedding::embed(const std::string& text) {
  const nlohmann::json request = {{"model", config_.model}, {"input", text}};
  std::vector<std::pair<std::string, std::string>> headers;
  if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);
  std::string last_error;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    if (attempt > 1) std::this_thread::sleep_for(std::chrono::milliseconds(500 * (attempt - 1)));
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
      throw BackendUnavailable(fmt::format("embedding endpoint returned HTTP {}", res.status));
    }
    auto body = nlohmann::json::parse(res.body, nullptr, false);
    if (body.is_discarded() || !body.contains("data") || body["data"].empty() ||
        !body["data"][0].contains("embedding")) {
      throw BackendUnavailable("embedding endpoint returned an unexpected payload");
    }
    const auto& values = body["data"][0]["embedding"];
    if (!values.is_array() || values.size() != static_cast<std::size_t>(kEmbeddingDim)) {
      throw ShapeError(fmt::format("embedding has {} values, expected {}", values.size(),
                                   kEmbeddingDim));
    }
    Eigen::VectorXd v(kEmbeddingDim);
    for (int i = 0; i < kEmbeddingDim; ++i) v[i] = values[static_cast<std::size_t>(i)].get<double>();
    return v;
  }
  throw BackendUnavailable("embedding endpoint unavailable: " + last_error);
}

std::string serialize_state(const Query& q, const InstructionSet& candidates,
                            const StateMemory& mem, const MetaInfo& meta) {
  const auto rendered = memory_render(mem);
  std::string skills;
  for (const auto& s : meta.skills) {
    if (!skills.empty()) skills += ", ";
    skills += s.name;
  }
  std::string out = fmt::format(
      "Task: {}\nSkills: {}\nQuery: {}\nStep: {}\nInstruction history:\n{}\nCode history:\n{}\n"
      "Feedback history:\n{}\nVariables:\n{}\nCandidates:\n",
      meta.task_description, skills, q.text, candidates.step, rendered.instruction_history,
      rendered.code_history, rendered.feedback_history, rendered.variable_details);
  for (std::size_t i = 0; i < candidates.samples.size(); ++i) {
    out += fmt::format("{}. {} (probability: {})\n", i + 1, candidates.samples[i].text,
                       format_number(candidates.samples[i].confidence));
  }
  return out;
}

Eigen::VectorXd embed_state(const Query& q, const InstructionSet& candidates,
                            const StateMemory& mem, const MetaInfo& meta,
                            EmbeddingProvider& provider) {
  Eigen::VectorXd v = provider.embed(serialize_state(q, candidates, mem, meta));
  if (v.size() != kEmbeddingDim) {
    throw ShapeError(fmt::format("embedding provider returned {} values", v.size()));
  }
  return v;
}

}  // namespace hydra
