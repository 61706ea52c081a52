#include "hydra/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "hydra/error.hpp"
#include "hydra/perception.hpp"
#include "hydra/synthetic.hpp"

namespace hydra {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_integer(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError(fmt::format("{}: '{}' is not an integer", key, text));
  return value;
}

double parse_double(const std::string& key, const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v)) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, text));
  }
  return v;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& text) {
  if (text.empty()) return {};
  std::filesystem::path p(text);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::filesystem::path&)> set;
};

template <typename T>
Field int_field(const char* key, T RunConfig::*member) {
  return {key, [member](const RunConfig& c) { return std::to_string(c.*member); },
          [key, member](RunConfig& c, const std::string& v, const std::filesystem::path&) {
            c.*member = parse_integer<T>(key, v);
          }};
}

template <typename S, typename T>
Field nested_int(const char* key, S RunConfig::*section, T S::*member) {
  return {key, [=](const RunConfig& c) { return std::to_string(c.*section.*member); },
          [=](RunConfig& c, const std::string& v, const std::filesystem::path&) {
            c.*section.*member = parse_integer<T>(key, v);
          }};
}

template <typename S>
Field nested_double(const char* key, S RunConfig::*section, double S::*member) {
  return {key, [=](const RunConfig& c) { return format_number(c.*section.*member); },
          [=](RunConfig& c, const std::string& v, const std::filesystem::path&) {
            c.*section.*member = parse_double(key, v);
          }};
}

Field double_field(const char* key, double RunConfig::*member) {
  return {key, [member](const RunConfig& c) { return format_number(c.*member); },
          [key, member](RunConfig& c, const std::string& v, const std::filesystem::path&) {
            c.*member = parse_double(key, v);
          }};
}

Field string_field(const char* key, std::string RunConfig::*member) {
  return {key, [member](const RunConfig& c) { return c.*member; },
          [member](RunConfig& c, const std::string& v, const std::filesystem::path&) { c.*member = v; }};
}

Field path_field(const char* key, std::filesystem::path RunConfig::*member) {
  return {key, [member](const RunConfig& c) { return (c.*member).string(); },
          [member](RunConfig& c, const std::string& v, const std::filesystem::path& base) {
            c.*member = resolve(base, v);
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      nested_int("loop.n_samples", &RunConfig::loop, &LoopConfig::n_samples),
      nested_int("loop.max_iterations", &RunConfig::loop, &LoopConfig::max_iterations),
      nested_int("loop.max_rejections_per_step", &RunConfig::loop, &LoopConfig::max_rejections_per_step),
      nested_int("loop.code_retry_limit", &RunConfig::loop, &LoopConfig::code_retry_limit),
      nested_int("loop.planner_retry_limit", &RunConfig::loop, &LoopConfig::planner_retry_limit),
      nested_double("rl.alpha", &RunConfig::reward, &RewardParams::alpha),
      nested_double("rl.r1", &RunConfig::reward, &RewardParams::r1),
      nested_double("rl.gamma", &RunConfig::training, &TrainingParams::gamma),
      nested_double("rl.lr", &RunConfig::training, &TrainingParams::lr),
      nested_int("rl.batch", &RunConfig::training, &TrainingParams::batch),
      {"rl.optimizer",
       [](const RunConfig& c) { return std::string(c.training.optimizer == OptimizerKind::adam ? "adam" : "sgd"); },
       [](RunConfig& c, const std::string& v, const std::filesystem::path&) {
         if (v == "adam") {
           c.training.optimizer = OptimizerKind::adam;
         } else if (v == "sgd") {
           c.training.optimizer = OptimizerKind::sgd;
         } else {
           throw ConfigError("rl.optimizer must be adam or sgd, got " + v);
         }
       }},
      nested_int("rl.learning_start", &RunConfig::schedule, &ExplorationSchedule::learning_start),
      nested_double("rl.eps0", &RunConfig::schedule, &ExplorationSchedule::eps0),
      nested_double("rl.eps_decay", &RunConfig::schedule, &ExplorationSchedule::decay),
      nested_int("rl.eps_interval", &RunConfig::schedule, &ExplorationSchedule::interval),
      int_field("rl.buffer_capacity", &RunConfig::buffer_capacity),
      int_field("rl.max_observations", &RunConfig::max_observations),
      int_field("rl.max_episodes", &RunConfig::max_episodes),
      string_field("llm.mode", &RunConfig::llm_mode),
      string_field("llm.endpoint", &RunConfig::llm_endpoint),
      string_field("llm.model", &RunConfig::llm_model),
      string_field("llm.api_key_env", &RunConfig::llm_api_key_env),
      double_field("llm.temperature", &RunConfig::llm_temperature),
      int_field("llm.timeout_ms", &RunConfig::llm_timeout_ms),
      int_field("llm.max_attempts", &RunConfig::llm_max_attempts),
      path_field("llm.script", &RunConfig::llm_script),
      string_field("embedding.mode", &RunConfig::embedding_mode),
      string_field("embedding.endpoint", &RunConfig::embedding_endpoint),
      string_field("embedding.model", &RunConfig::embedding_model),
      string_field("embedding.api_key_env", &RunConfig::embedding_api_key_env),
      string_field("toolkit.mode", &RunConfig::toolkit_mode),
      string_field("toolkit.endpoint", &RunConfig::toolkit_endpoint),
      int_field("toolkit.max_connections", &RunConfig::toolkit_max_connections),
      int_field("toolkit.timeout_ms", &RunConfig::toolkit_timeout_ms),
      path_field("paths.templates", &RunConfig::templates_dir),
      path_field("paths.scenes", &RunConfig::scenes_dir),
      int_field("eval.workers", &RunConfig::eval_workers),
  };
  return table;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string env_or_empty(const std::string& name) {
  if (name.empty()) return {};
  const char* v = std::getenv(name.c_str());
  return v ? std::string(v) : std::string();
}

}  // namespace

void RunConfig::validate() const {
  loop.validate();
  if (!(reward.alpha > 0)) throw ConfigError("rl.alpha must be positive");
  if (!(training.gamma >= 0 && training.gamma <= 1)) throw ConfigError("rl.gamma must lie in [0, 1]");
  if (!(training.lr > 0)) throw ConfigError("rl.lr must be positive");
  if (training.batch < 1) throw ConfigError("rl.batch must be positive");
  if (schedule.learning_start < 0) throw ConfigError("rl.learning_start must be non-negative");
  if (!(schedule.eps0 > 0) || !(schedule.decay > 0) || schedule.interval < 1) {
    throw ConfigError("rl.eps0, rl.eps_decay and rl.eps_interval must be positive");
  }
  if (buffer_capacity < static_cast<std::size_t>(training.batch)) {
    throw ConfigError("rl.buffer_capacity must hold at least one batch");
  }
  if (max_observations < 1) throw ConfigError("rl.max_observations must be positive");
  if (llm_mode != "http" && llm_mode != "scripted" && llm_mode != "synthetic") {
    throw ConfigError("llm.mode must be http, scripted or synthetic, got " + llm_mode);
  }
  if (llm_mode == "http" && llm_endpoint.empty()) throw ConfigError("llm.mode = http needs llm.endpoint");
  if (llm_mode == "scripted" && llm_script.empty()) throw ConfigError("llm.mode = scripted needs llm.script");
  if (llm_max_attempts < 1 || llm_timeout_ms < 1) throw ConfigError("llm timeouts and attempts must be positive");
  if (embedding_mode != "hash" && embedding_mode != "http") {
    throw ConfigError("embedding.mode must be hash or http, got " + embedding_mode);
  }
  if (embedding_mode == "http" && embedding_endpoint.empty()) {
    throw ConfigError("embedding.mode = http needs embedding.endpoint");
  }
  if (toolkit_mode != "mock" && toolkit_mode != "http") {
    throw ConfigError("toolkit.mode must be mock or http, got " + toolkit_mode);
  }
  if (toolkit_mode == "mock" && scenes_dir.empty()) throw ConfigError("toolkit.mode = mock needs paths.scenes");
  if (toolkit_mode == "http" && toolkit_endpoint.empty()) {
    throw ConfigError("toolkit.mode = http needs toolkit.endpoint");
  }
  if (llm_mode == "synthetic" && toolkit_mode != "mock") throw ConfigError("llm.mode = synthetic needs toolkit.mode = mock");
  if (toolkit_max_connections < 1 || toolkit_timeout_ms < 1) {
    throw ConfigError("toolkit connection limit and timeout must be positive");
  }
  if (templates_dir.empty()) throw ConfigError("paths.templates is required");
  if (eval_workers < 1) throw ConfigError("eval.workers must be positive");
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> out;
  for (const auto& f : fields()) out[f.key] = f.get(*this);
  return out;
}

RunConfig RunConfig::from_map(const std::map<std::string, std::string>& values,
                              const std::filesystem::path& base_dir) {
  RunConfig c;
  for (const auto& [key, value] : values) {
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return key == f.key; });
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->set(c, value, base_dir);
  }
  return c;
}

bool RunConfig::operator==(const RunConfig& o) const { return to_map() == o.to_map(); }

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("config line {}: expected key = value", n));
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ConfigError(fmt::format("config line {}: empty key", n));
    if (!out.emplace(key, trim(std::string_view(t).substr(eq + 1))).second) {
      throw ConfigError(fmt::format("config line {}: duplicate key '{}'", n, key));
    }
  }
  return out;
}

RunConfig load_config(const std::filesystem::path& path) {
  RunConfig c = RunConfig::from_map(parse_key_values(read_file(path)), path.parent_path());
  c.validate();
  return c;
}

void save_config(const std::filesystem::path& path, const RunConfig& config) {
  std::string text;
  for (const auto& [k, v] : config.to_map()) text += fmt::format("{} = {}\n", k, v);
  write_text_file(path, text);
}

LabeledQuery dataset_row_from_json(const nlohmann::json& j, std::size_t line) {
  const std::string where =
      j.is_object() && j.contains("id") && j["id"].is_string() ? "row " + j["id"].get<std::string>()
                                                               : fmt::format("line {}", line);
  try {
    if (!j.is_object()) throw ConfigError("not an object");
    LabeledQuery row;
    row.id = j.at("id").get<std::string>();
    row.query.text = j.at("query").get<std::string>();
    row.query.image_ref = j.at("image").get<std::string>();
    row.query.task = parse_task_kind(j.value("task", std::string("vqa")));
    const auto& gold = j.at("gold");
    if (row.query.task == TaskKind::vqa) {
      if (!gold.is_string()) throw ConfigError("vqa gold must be a string");
      row.gold.text = gold.get<std::string>();
    } else {
      if (!gold.is_array() || gold.size() != 4) throw ConfigError("grounding gold must be [x1,y1,x2,y2]");
      row.gold.box = BoundingBox{gold[0].get<double>(), gold[1].get<double>(), gold[2].get<double>(),
                                 gold[3].get<double>()};
      if (!row.gold.box->valid()) throw ConfigError("gold box is not ordered");
    }
    validate(row);
    return row;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("dataset {}: {}", where, e.what()));
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("dataset {}: {}", where, e.what()));
  }
}

nlohmann::ordered_json dataset_row_to_json(const LabeledQuery& row) {
  nlohmann::ordered_json j;
  j["id"] = row.id;
  j["query"] = row.query.text;
  j["image"] = row.query.image_ref;
  j["task"] = std::string(to_string(row.query.task));
  if (row.gold.box) {
    j["gold"] = {row.gold.box->x1, row.gold.box->y1, row.gold.box->x2, row.gold.box->y2};
  } else {
    j["gold"] = row.gold.text.value_or("");
  }
  return j;
}

std::vector<LabeledQuery> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset " + path.string());
  std::vector<LabeledQuery> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("dataset line {}: invalid JSON ({})", n, e.what()));
    }
    rows.push_back(dataset_row_from_json(j, n));
  }
  return rows;
}

void save_dataset(const std::filesystem::path& path, const std::vector<LabeledQuery>& rows) {
  std::string text;
  for (const auto& r : rows) text += dataset_row_to_json(r).dump() + "\n";
  write_text_file(path, text);
}

RowResult score_row(const LabeledQuery& row, const Answer& predicted) {
  RowResult r;
  r.id = row.id;
  r.task = row.query.task;
  r.pred = answer_text(predicted);
  r.gold = row.gold.box ? answer_text(Answer::from_box(*row.gold.box)) : row.gold.text.value_or("");
  r.score = answer_metric(predicted, row.gold, row.query.task);
  return r;
}

MetricReport compute_metrics(std::vector<RowResult> rows) {
  MetricReport report;
  std::size_t vqa = 0, ground = 0, over_half = 0;
  double correct = 0.0, iou_sum = 0.0;
  for (const auto& r : rows) {
    if (r.task == TaskKind::vqa) {
      ++vqa;
      correct += r.score;
    } else {
      ++ground;
      iou_sum += r.score;
      if (r.score >= 0.5) ++over_half;
    }
  }
  if (vqa > 0) report.accuracy = correct / static_cast<double>(vqa);
  if (ground > 0) {
    report.mean_iou = iou_sum / static_cast<double>(ground);
    report.iou_at_50 = static_cast<double>(over_half) / static_cast<double>(ground);
  }
  report.rows = std::move(rows);
  return report;
}

nlohmann::ordered_json MetricReport::to_json() const {
  nlohmann::ordered_json j;
  if (accuracy) j["accuracy"] = *accuracy;
  if (mean_iou) j["mean_iou"] = *mean_iou;
  if (iou_at_50) j["iou_at_50"] = *iou_at_50;
  auto out = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    out.push_back({{"id", r.id}, {"pred", r.pred}, {"gold", r.gold}, {"score", r.score}});
  }
  j["rows"] = std::move(out);
  return j;
}

EpisodeContext Runtime::context(bool record_calls) const {
  EpisodeContext ctx;
  ctx.prompts = &prompts;
  ctx.embedder = embedder.get();
  ctx.loop = config.loop;
  ctx.record_calls = record_calls;
  return ctx;
}

std::unique_ptr<Runtime> build_runtime(const RunConfig& config) {
  config.validate();
  auto rt = std::make_unique<Runtime>();
  rt->config = config;
  rt->prompts = PromptLibrary::load(config.templates_dir);

  if (config.embedding_mode == "hash") {
    rt->embedder = std::make_unique<HashingEmbedding>();
  } else {
    EmbeddingEndpointConfig ec;
    ec.url = config.embedding_endpoint;
    ec.model = config.embedding_model;
    ec.api_key = env_or_empty(config.embedding_api_key_env);
    rt->embedder = std::make_unique<HttpEmbedding>(ec);
  }

  std::shared_ptr<PerceptionToolkit> toolkit;
  std::shared_ptr<MockToolkit> mock;
  if (config.toolkit_mode == "mock") {
    mock = std::make_shared<MockToolkit>(MockToolkit::from_path(config.scenes_dir));
    toolkit = mock;
  } else {
    ToolkitEndpointConfig tc;
    tc.url = config.toolkit_endpoint;
    tc.max_connections = config.toolkit_max_connections;
    tc.timeout = std::chrono::milliseconds(config.toolkit_timeout_ms);
    toolkit = std::make_shared<HttpToolkit>(tc);
  }

  if (config.llm_mode == "synthetic") {
    rt->factory = synthetic_backend_factory(mock);
  } else if (config.llm_mode == "scripted") {
    const nlohmann::json script = [&] {
      try {
        return nlohmann::json::parse(read_file(config.llm_script));
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("llm.script {}: {}", config.llm_script.string(), e.what()));
      }
    }();
    auto replies = [&](const char* role) {
      std::vector<std::string> out;
      if (script.contains(role)) {
        for (const auto& r : script[role]) out.push_back(r.get<std::string>());
      }
      return out;
    };
    auto planner = replies("planner"), coder = replies("coder"), summarizer = replies("summarizer");
    rt->factory = [=](const LabeledQuery&, std::uint64_t) {
      return EpisodeBackends{std::make_shared<ScriptedBackend>(planner, "scripted-planner"),
                             std::make_shared<ScriptedBackend>(coder, "scripted-coder"),
                             std::make_shared<ScriptedBackend>(summarizer, "scripted-summarizer"), toolkit};
    };
  } else {
    ChatEndpointConfig cc;
    cc.url = config.llm_endpoint;
    cc.model = config.llm_model;
    cc.api_key = env_or_empty(config.llm_api_key_env);
    cc.temperature = config.llm_temperature;
    cc.timeout = std::chrono::milliseconds(config.llm_timeout_ms);
    cc.max_attempts = config.llm_max_attempts;
    auto chat = std::make_shared<HttpChatBackend>(cc);
    rt->factory = [chat, toolkit](const LabeledQuery&, std::uint64_t) {
      return EpisodeBackends{chat, chat, chat, toolkit};
    };
  }
  return rt;
}

std::uint64_t episode_seed(std::uint64_t run_seed, const std::string& row_id) {
  return mix_seed(run_seed, fnv1a(row_id));
}

std::vector<EpisodeResult> run_evaluation(const std::vector<LabeledQuery>& rows, const Runtime& runtime,
                                          const std::function<std::unique_ptr<InstructionSelector>()>& make_selector,
                                          int workers, std::uint64_t seed, bool record_calls) {
  if (workers < 1) throw ConfigError("at least one evaluation worker is required");
  std::vector<EpisodeResult> results(rows.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const EpisodeContext ctx = runtime.context(record_calls);
  auto work = [&] {
    try {
      auto selector = make_selector();
      for (std::size_t i = next++; i < rows.size(); i = next++) {
        const auto backends = runtime.factory(rows[i], episode_seed(seed, rows[i].id));
        results[i] = run_episode(rows[i].query, ctx, backends, *selector);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = rows.size();
    }
  };
  const auto n = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(workers), std::max<std::size_t>(rows.size(), 1)));
  if (n <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

TrainingConfig training_config(const RunConfig& config, std::uint64_t seed) {
  TrainingConfig tc;
  tc.loop = config.loop;
  tc.dqn.reward = config.reward;
  tc.dqn.training = config.training;
  tc.dqn.schedule = config.schedule;
  tc.dqn.buffer_capacity = config.buffer_capacity;
  tc.seed = seed;
  tc.max_observations = config.max_observations;
  tc.max_episodes = config.max_episodes;
  return tc;
}

std::string reward_csv(const std::vector<double>& rewards) {
  std::string out = "episode,reward\n";
  for (std::size_t i = 0; i < rewards.size(); ++i) out += fmt::format("{},{}\n", i + 1, format_number(rewards[i]));
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("write failed for " + path.string());
}

}  // namespace hydra
