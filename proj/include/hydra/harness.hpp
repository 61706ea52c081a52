#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hydra/orchestrator.hpp"
#include "hydra/scoring.hpp"

namespace hydra {

/// Everything a CLI run needs. Stored as a flat "key = value" file with
/// dotted sections; see to_map() for the key names.
struct RunConfig {
  LoopConfig loop;

  RewardParams reward;
  TrainingParams training;
  ExplorationSchedule schedule;
  std::size_t buffer_capacity = 50000;
  long max_observations = 30000;
  std::size_t max_episodes = 1000000;

  std::string llm_mode = "http";  // http | scripted | synthetic
  std::string llm_endpoint;
  std::string llm_model = "gpt-3.5-turbo";
  std::string llm_api_key_env = "OPENAI_API_KEY";
  double llm_temperature = 0.7;
  long llm_timeout_ms = 60000;
  int llm_max_attempts = 3;
  std::filesystem::path llm_script;  // scripted mode: JSON {planner, coder, summarizer} reply lists

  std::string embedding_mode = "hash";  // hash | http
  std::string embedding_endpoint;
  std::string embedding_model = "text-embedding-3-small";
  std::string embedding_api_key_env = "OPENAI_API_KEY";

  std::string toolkit_mode = "mock";  // mock | http
  std::string toolkit_endpoint;
  int toolkit_max_connections = 4;
  long toolkit_timeout_ms = 30000;

  std::filesystem::path templates_dir;
  std::filesystem::path scenes_dir;

  int eval_workers = 1;

  /// Throws ConfigError on out-of-range values or missing mode requirements.
  void validate() const;

  [[nodiscard]] std::map<std::string, std::string> to_map() const;
  /// Keys absent from `values` keep their defaults; unknown keys throw.
  /// Relative paths are resolved against `base_dir`.
  static RunConfig from_map(const std::map<std::string, std::string>& values,
                            const std::filesystem::path& base_dir = {});

  bool operator==(const RunConfig&) const;
};

RunConfig load_config(const std::filesystem::path& path);
/// Sorted keys, one per line.
void save_config(const std::filesystem::path& path, const RunConfig& config);
/// Parses "key = value" lines; '#' starts a comment line.
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// JSONL rows {id, query, image, task, gold}; gold is a string for vqa and
/// [x1,y1,x2,y2] for grounding. Errors name the row id or line number.
std::vector<LabeledQuery> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::filesystem::path& path, const std::vector<LabeledQuery>& rows);
LabeledQuery dataset_row_from_json(const nlohmann::json& j, std::size_t line);
nlohmann::ordered_json dataset_row_to_json(const LabeledQuery& row);

struct RowResult {
  std::string id;
  TaskKind task = TaskKind::vqa;
  std::string pred;
  std::string gold;
  double score = 0.0;  // exact match (0/1) or IoU
};

struct MetricReport {
  std::optional<double> accuracy;
  std::optional<double> mean_iou;
  std::optional<double> iou_at_50;
  std::vector<RowResult> rows;

  [[nodiscard]] nlohmann::ordered_json to_json() const;
};

/// Aggregates per-row scores; metrics are present only when rows of that
/// task exist.
MetricReport compute_metrics(std::vector<RowResult> rows);

RowResult score_row(const LabeledQuery& row, const Answer& predicted);

/// Backends and shared services assembled from a RunConfig.
struct Runtime {
  RunConfig config;
  PromptLibrary prompts;
  std::unique_ptr<EmbeddingProvider> embedder;
  BackendFactory factory;

  [[nodiscard]] EpisodeContext context(bool record_calls = false) const;
};

std::unique_ptr<Runtime> build_runtime(const RunConfig& config);

/// Runs every row, `workers` at a time, against a read-only selector built
/// per worker. Results are in row order regardless of scheduling.
std::vector<EpisodeResult> run_evaluation(const std::vector<LabeledQuery>& rows, const Runtime& runtime,
                                          const std::function<std::unique_ptr<InstructionSelector>()>& make_selector,
                                          int workers, std::uint64_t seed, bool record_calls = false);

/// Per-episode backend seed used by infer and eval.
std::uint64_t episode_seed(std::uint64_t run_seed, const std::string& row_id);

TrainingConfig training_config(const RunConfig& config, std::uint64_t seed);

/// "episode,reward" with one row per episode.
std::string reward_csv(const std::vector<double>& rewards);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace hydra
