#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "hydra/checkpoint.hpp"
#include "hydra/error.hpp"
#include "hydra/harness.hpp"
#include "hydra/orchestrator.hpp"
#include "hydra/synthetic.hpp"

namespace fs = std::filesystem;
using namespace hydra;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUnanswered = 2;
constexpr int kExitUsage = 64;

fs::path rewards_path_for(const fs::path& ckpt) {
  fs::path p = ckpt;
  p.replace_extension(".rewards.csv");
  return p;
}

std::optional<Checkpoint> load_matching_checkpoint(const std::string& path, const RunConfig& cfg) {
  if (path.empty()) return std::nullopt;
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.n_samples != cfg.loop.n_samples) {
    throw ConfigError(fmt::format("checkpoint incompatible: trained for {} samples, config uses {}",
                                  ckpt.n_samples, cfg.loop.n_samples));
  }
  return ckpt;
}

void write_jsonl(const fs::path& path, const std::vector<nlohmann::ordered_json>& lines) {
  std::string text;
  for (const auto& l : lines) text += l.dump() + "\n";
  write_text_file(path, text);
}

struct InferArgs {
  std::string config, query, image, task = "vqa", ckpt, trace;
  std::uint64_t seed = 0;
};

int run_infer(const InferArgs& a) {
  const RunConfig cfg = load_config(a.config);
  auto rt = build_runtime(cfg);
  const auto ckpt = load_matching_checkpoint(a.ckpt, cfg);

  LabeledQuery row;
  row.id = "query";
  row.query = Query{a.query, a.image, parse_task_kind(a.task)};
  validate(row.query);

  std::unique_ptr<InstructionSelector> selector;
  if (ckpt) {
    selector = std::make_unique<DqnSelector>(ckpt->net);
  } else {
    selector = std::make_unique<ConfidenceSelector>();
  }
  const auto backends = rt->factory(row, episode_seed(a.seed, row.id));
  const EpisodeResult r = run_episode(row.query, rt->context(!a.trace.empty()), backends, *selector);
  if (!a.trace.empty()) write_jsonl(a.trace, episode_trace(row.id, r));
  if (r.error) {
    std::cerr << "hydra: " << *r.error << "\n";
    return kExitError;
  }
  if (!r.answer.answered()) {
    std::cerr << "hydra: no answer after " << r.steps_taken << " step(s)\n";
    return kExitUnanswered;
  }
  std::cout << answer_text(r.answer) << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string config, dataset, out;
  std::uint64_t seed = 0;
  bool verbose = false;
};

int run_train(const TrainArgs& a) {
  const RunConfig cfg = load_config(a.config);
  auto rt = build_runtime(cfg);
  const auto rows = load_dataset(a.dataset);
  const TrainingConfig tc = training_config(cfg, a.seed);
  const TrainingResult result = train(rows, rt->context(), rt->factory, tc, [&](std::size_t ep, double) {
    if (a.verbose && (ep + 1) % 500 == 0) std::cerr << "episode " << ep + 1 << "\n";
  });
  save_checkpoint(a.out, result.checkpoint);
  write_text_file(rewards_path_for(a.out), reward_csv(result.episode_rewards));
  std::cerr << fmt::format("trained {} episodes, {} observations{}\n", result.episode_rewards.size(),
                           result.observations, result.converged ? ", reward converged" : "");
  return kExitOk;
}

struct EvalArgs {
  std::string config, dataset, ckpt, metrics, trace;
  std::uint64_t seed = 0;
  int workers = 0;
};

int run_eval(const EvalArgs& a) {
  const RunConfig cfg = load_config(a.config);
  auto rt = build_runtime(cfg);
  const auto ckpt = load_matching_checkpoint(a.ckpt, cfg);
  const auto rows = load_dataset(a.dataset);
  const int workers = a.workers > 0 ? a.workers : cfg.eval_workers;

  auto make_selector = [&]() -> std::unique_ptr<InstructionSelector> {
    if (ckpt) return std::make_unique<DqnSelector>(ckpt->net);
    return std::make_unique<ConfidenceSelector>();
  };
  const auto results = run_evaluation(rows, *rt, make_selector, workers, a.seed, !a.trace.empty());

  std::vector<RowResult> scored;
  std::vector<nlohmann::ordered_json> trace;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    scored.push_back(score_row(rows[i], results[i].answer));
    if (!a.trace.empty()) {
      for (auto& line : episode_trace(rows[i].id, results[i])) trace.push_back(std::move(line));
    }
  }
  const MetricReport report = compute_metrics(std::move(scored));
  write_text_file(a.metrics, report.to_json().dump(2) + "\n");
  if (!a.trace.empty()) write_jsonl(a.trace, trace);
  if (report.accuracy) std::cout << fmt::format("accuracy {:.4f}\n", *report.accuracy);
  if (report.mean_iou) std::cout << fmt::format("mean_iou {:.4f} iou@0.5 {:.4f}\n", *report.mean_iou, *report.iou_at_50);
  return kExitOk;
}

struct SynthArgs {
  std::string out, prefix = "syn", templates;
  std::size_t count = 100;
  std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& a) {
  const SyntheticDataset ds = make_synthetic_dataset(a.count, a.seed, a.prefix);
  const fs::path root(a.out);
  for (const auto& s : ds.scenes) write_text_file(root / "scenes" / (s.id + ".json"), scene_to_json(s).dump(2) + "\n");
  save_dataset(root / "dataset.jsonl", ds.rows);
  if (!a.templates.empty()) {
    RunConfig cfg;
    cfg.llm_mode = "synthetic";
    cfg.toolkit_mode = "mock";
    cfg.scenes_dir = fs::absolute(root / "scenes");
    cfg.templates_dir = fs::absolute(a.templates);
    save_config(root / "synthetic.conf", cfg);
  }
  std::cerr << fmt::format("wrote {} scenes and queries to {}\n", ds.rows.size(), root.string());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compositional visual reasoning loop with a learned instruction controller"};
  app.require_subcommand(1);

  InferArgs infer;
  auto* ci = app.add_subcommand("infer", "Answer one query");
  ci->add_option("--config", infer.config, "Run configuration")->required()->check(CLI::ExistingFile);
  ci->add_option("--query", infer.query, "Question or referring phrase")->required();
  ci->add_option("--image", infer.image, "Image or scene reference")->required();
  ci->add_option("--task", infer.task, "vqa or grounding")->check(CLI::IsMember({"vqa", "grounding"}));
  ci->add_option("--ckpt", infer.ckpt, "Controller checkpoint; highest confidence wins without one")
      ->check(CLI::ExistingFile);
  ci->add_option("--trace", infer.trace, "Write a JSONL trace with every prompt and completion");
  ci->add_option("--seed", infer.seed, "Seed for stochastic mock backends");

  TrainArgs trainer;
  auto* ct = app.add_subcommand("train", "Train the controller");
  ct->add_option("--config", trainer.config, "Run configuration")->required()->check(CLI::ExistingFile);
  ct->add_option("--dataset", trainer.dataset, "JSONL dataset")->required()->check(CLI::ExistingFile);
  ct->add_option("--out", trainer.out, "Checkpoint path; rewards go to <stem>.rewards.csv")->required();
  ct->add_option("--seed", trainer.seed, "Training seed");
  ct->add_flag("--verbose", trainer.verbose, "Report progress");

  EvalArgs eval;
  auto* ce = app.add_subcommand("eval", "Score a dataset");
  ce->add_option("--config", eval.config, "Run configuration")->required()->check(CLI::ExistingFile);
  ce->add_option("--dataset", eval.dataset, "JSONL dataset")->required()->check(CLI::ExistingFile);
  ce->add_option("--ckpt", eval.ckpt, "Controller checkpoint")->check(CLI::ExistingFile);
  ce->add_option("--metrics", eval.metrics, "Metrics JSON output")->required();
  ce->add_option("--trace", eval.trace, "JSONL trace output");
  ce->add_option("--seed", eval.seed, "Seed for stochastic mock backends");
  ce->add_option("--workers", eval.workers, "Parallel episodes (default: eval.workers)");

  SynthArgs synth;
  auto* cs = app.add_subcommand("synth", "Generate a synthetic scene set and dataset");
  cs->add_option("--out", synth.out, "Output directory")->required();
  cs->add_option("--count", synth.count, "Number of scenes");
  cs->add_option("--seed", synth.seed, "Generator seed");
  cs->add_option("--prefix", synth.prefix, "Scene id prefix");
  cs->add_option("--templates", synth.templates, "Templates dir; also writes synthetic.conf");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ci) return run_infer(infer);
    if (*ct) return run_train(trainer);
    if (*ce) return run_eval(eval);
    if (*cs) return run_synth(synth);
  } catch (const std::exception& e) {
    std::cerr << "hydra: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}
