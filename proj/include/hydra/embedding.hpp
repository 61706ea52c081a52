#pragma once

#include <chrono>
#include <string>

#include <Eigen/Core>

#include "hydra/memory.hpp"
#include "hydra/types.hpp"

namespace hydra {

inline constexpr int kEmbeddingDim = 1536;

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  /// Length kEmbeddingDim; throws BackendUnavailable on service failure.
  virtual Eigen::VectorXd embed(const std::string& text) = 0;
  [[nodiscard]] virtual std::string identity() const = 0;
};

/// Signed feature hashing of lowercase tokens into kEmbeddingDim buckets,
/// L2-normalised. Deterministic and thread-safe.
class HashingEmbedding final : public EmbeddingProvider {
 public:
  Eigen::VectorXd embed(const std::string& text) override;
  [[nodiscard]] std::string identity() const override { return "hashing-1536"; }
};

struct EmbeddingEndpointConfig {
  std::string url;  // full embeddings URL
  std::string model = "text-embedding-3-small";
  std::string api_key;
  std::chrono::milliseconds timeout{30000};
  int max_attempts = 3;
};

/// OpenAI-style embeddings client.
class HttpEmbedding final : public EmbeddingProvider {
 public:
  explicit HttpEmbedding(EmbeddingEndpointConfig config) : config_(std::move(config)) {}
  Eigen::VectorXd embed(const std::string& text) override;
  [[nodiscard]] std::string identity() const override { return "embedding:" + config_.model; }

 private:
  EmbeddingEndpointConfig config_;
};

/// Lowercase alphanumeric tokens; '.' and '_' are kept inside a token so
/// numbers such as 0.45 survive.
std::vector<std::string> tokenize(std::string_view text);

/// Fixed text serialisation of everything the controller observes.
std::string serialize_state(const Query& q, const InstructionSet& candidates,
                            const StateMemory& mem, const MetaInfo& meta);

Eigen::VectorXd embed_state(const Query& q, const InstructionSet& candidates,
                            const StateMemory& mem, const MetaInfo& meta,
                            EmbeddingProvider& provider);

}  // namespace hydra
