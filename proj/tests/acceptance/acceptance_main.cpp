#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "fixtures.hpp"
#include "hydra/checkpoint.hpp"
#include "hydra/harness.hpp"
#include "hydra/interpreter.hpp"
#include "hydra/script.hpp"
#include "hydra/synthetic.hpp"
#include "hydra/textualizer.hpp"

using namespace hydra;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---- 5: closed-loop learning on the synthetic task family ----

constexpr double kC5MinAccuracy = 0.80;
constexpr double kC5MaxConfidenceAccuracy = 0.45;
constexpr long kC5ObservationBudget = 30000;
constexpr double kC5TimeLimitSeconds = 15 * 60;
constexpr std::size_t kC5ConvergenceWindow = 1000;

double selection_accuracy(const SyntheticDataset& ds, const EpisodeContext& ctx, const BackendFactory& factory,
                          const std::function<std::unique_ptr<InstructionSelector>()>& make_selector) {
  int hits = 0;
  for (std::size_t k = 0; k < ds.rows.size(); ++k) {
    auto selector = make_selector();
    const auto r = run_episode(ds.rows[k].query, ctx, factory(ds.rows[k], mix_seed(99, k)), *selector);
    if (!r.steps.empty() && r.steps.front().chosen_index == static_cast<std::size_t>(ds.kinds[k])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ds.rows.size());
}

Outcome criterion5() {
  const auto start = std::chrono::steady_clock::now();
  const auto train_set = make_synthetic_dataset(600, 20240501, "train");
  const auto test_set = make_synthetic_dataset(300, 20240502, "heldout");
  std::vector<Scene> scenes = train_set.scenes;
  scenes.insert(scenes.end(), test_set.scenes.begin(), test_set.scenes.end());
  auto toolkit = std::make_shared<MockToolkit>(std::move(scenes));
  const auto factory = synthetic_backend_factory(toolkit);

  const auto prompts = testing::shipped_prompts();
  HashingEmbedding embedder;
  EpisodeContext ctx{&prompts, &embedder, LoopConfig{}, false};

  TrainingConfig cfg;
  cfg.seed = 7;
  cfg.max_observations = kC5ObservationBudget;
  cfg.dqn.training.gamma = 0.9;
  cfg.dqn.training.optimizer = OptimizerKind::adam;
  cfg.convergence_window = kC5ConvergenceWindow;
  const auto trained = train(train_set.rows, ctx, factory, cfg);
  const double train_seconds = seconds_since(start);

  const QNet& net = trained.checkpoint.net;
  const double learned = selection_accuracy(test_set, ctx, factory, [&net] {
    return std::make_unique<DqnSelector>(net);
  });
  const double confidence = selection_accuracy(test_set, ctx, factory, [] {
    return std::make_unique<ConfidenceSelector>();
  });
  std::uint64_t random_seed = 5;
  const double random = selection_accuracy(test_set, ctx, factory, [&random_seed] {
    return std::make_unique<testing::RandomSelector>(random_seed++);
  });
  const double total = seconds_since(start);

  Outcome o;
  o.pass = learned >= kC5MinAccuracy && confidence <= kC5MaxConfidenceAccuracy &&
           trained.observations <= kC5ObservationBudget && total < kC5TimeLimitSeconds;
  o.detail = fmt::format(
      "learned {:.3f}, confidence heuristic {:.3f}, random {:.3f}; {} observations over {} episodes, "
      "train {:.0f}s, total {:.0f}s",
      learned, confidence, random, trained.observations, trained.episode_rewards.size(), train_seconds, total);
  return o;
}


// ---- 1: reward traces ----

Outcome criterion1() {
  const RewardParams p{100.0, 100.0};
  // Hand-derived from the reward rule: start at R1, -t per later non-final
  // step, +alpha*m on a related answer, -alpha on an unrelated one.
  RewardTrace one = step_reward({}, 1, true, 1.0, true, p);
  RewardTrace three = step_reward({}, 1, false, 0.0, false, p);
  three = step_reward(three, 2, false, 0.0, false, p);
  three = step_reward(three, 3, true, 1.0, true, p);
  RewardTrace unrelated = step_reward({}, 1, false, 0.0, false, p);
  unrelated = step_reward(unrelated, 2, true, 0.0, false, p);

  const std::vector<double> want_one{100, 200}, want_three{100, 98, 198}, want_unrelated{100, 0};
  Outcome o;
  o.pass = one.values == want_one && three.values == want_three && unrelated.values == want_unrelated;
  auto show = [](const RewardTrace& r) {
    std::string s;
    for (double v : r.values) s += (s.empty() ? "" : "/") + format_number(v);
    return s;
  };
  o.detail = fmt::format("1-step {}, 3-step {}, unrelated {}", show(one), show(three), show(unrelated));
  return o;
}

// ---- 2: exploration schedule ----

Outcome criterion2() {
  const ExplorationSchedule s;
  const std::pair<long, double> table[] = {{1000, 2.0}, {2000, 1.0}, {4000, 0.5}, {10000, 0.2}};
  bool ok = true;
  std::string got;
  for (const auto& [w, want] : table) {
    const double t = s.threshold(w);
    ok = ok && t == want;
    got += fmt::format("{}{}", got.empty() ? "" : ", ", t);
  }

  // Every decision up to learning_start must be a uniformly random action.
  const QNet net = make_controller_network(5, 3);
  InstructionSet set;
  for (int i = 0; i < 5; ++i) set.samples.push_back({fmt::format("step {}", i), 0.2 * (i + 1)});
  Rng rng(11);
  Eigen::VectorXd state = Eigen::VectorXd::Zero(kEmbeddingDim);
  std::vector<int> histogram(6, 0);
  bool all_explored = true;
  for (long w = 1; w <= s.learning_start; ++w) {
    const auto d = select(net, state, set, s, true, w, rng);
    all_explored = all_explored && d.explored && s.explore_probability(w) == 1.0;
    ++histogram[static_cast<std::size_t>(d.action())];
  }
  const bool spread = std::all_of(histogram.begin(), histogram.end(), [](int c) { return c > 100; });
  const bool greedy_after = !select(net, state, set, s, false, 5000, rng).explored;
  Outcome o;
  o.pass = ok && all_explored && spread && greedy_after;
  o.detail = fmt::format("thresholds {}; random for all w <= {}: {}; action histogram {}", got, s.learning_start,
                         all_explored, fmt::join(histogram, " "));
  return o;
}

// ---- 3: gradient check ----

constexpr double kC3MaxRelativeError = 1e-4;
constexpr double kC3TimeLimitSeconds = 60;

double loss_at(const QNet& net, const Eigen::VectorXd& state, int action, double target) {
  const double e = net.action_values(state)[action] - target;
  return e * e;
}

Outcome criterion3() {
  const auto start = std::chrono::steady_clock::now();
  QNet net = make_controller_network(5, 1234);
  Rng rng(99);
  Eigen::VectorXd state(kEmbeddingDim);
  for (Eigen::Index i = 0; i < state.size(); ++i) state[i] = uniform(rng, -1.0, 1.0);
  const int action = 3;
  const double target = 2.5;

  QNet::Gradients grad;
  const Eigen::MatrixXd batch = state;
  const std::vector<int> actions{action};
  net.loss_and_gradients(batch, actions, Eigen::VectorXd::Constant(1, target), grad);

  // Every output-layer parameter plus a random sample of the input layer. Entries
  // whose gradient is exactly zero on both sides (other actions, inactive units)
  // are not counted.
  std::vector<Eigen::Index> indices;
  const Eigen::Index first_layer = net.w1().size() + net.b1().size();
  for (Eigen::Index i = first_layer; i < net.parameter_count(); ++i) indices.push_back(i);
  for (int k = 0; k < 4000; ++k) indices.push_back(static_cast<Eigen::Index>(uniform_index(rng, first_layer)));

  const double h = 1e-5;
  double worst = 0.0;
  int compared = 0;
  for (Eigen::Index i : indices) {
    double& w = net.parameter(i);
    const double saved = w;
    w = saved + h;
    const double up = loss_at(net, state, action, target);
    w = saved - h;
    const double down = loss_at(net, state, action, target);
    w = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = QNet::gradient(grad, i);
    const double scale = std::max(std::abs(numeric), std::abs(analytic));
    if (scale < 1e-10) continue;
    worst = std::max(worst, std::abs(numeric - analytic) / scale);
    ++compared;
  }
  const double library = gradient_check(net, state, action, target, 5);
  const double elapsed = seconds_since(start);
  Outcome o;
  o.pass = worst < kC3MaxRelativeError && library < kC3MaxRelativeError && elapsed < kC3TimeLimitSeconds &&
           compared >= 1000;
  o.detail = fmt::format("1536->512->6, {} parameters compared, max rel error {:.2e} (library check {:.2e}), {:.1f}s",
                         compared, worst, library, elapsed);
  return o;
}

// ---- 4: softmax and selection properties ----

Outcome criterion4() {
  Rng rng(2024);
  int failures = 0;
  std::string first_failure;
  auto fail = [&](const std::string& what) {
    if (failures++ == 0) first_failure = what;
  };
  for (int c = 0; c < 10000; ++c) {
    const int n = 1 + static_cast<int>(uniform_index(rng, 9));
    const double spread = std::pow(10.0, uniform(rng, -2, 2.5));
    Eigen::VectorXd logits(n + 1);
    for (int i = 0; i <= n; ++i) logits[i] = uniform(rng, -spread, spread);
    InstructionSet set;
    const bool tied = c % 4 == 0;
    for (int i = 0; i < n; ++i) {
      set.samples.push_back({fmt::format("i{}", i), tied ? 0.5 : std::round(uniform(rng, 0, 1) * 20) / 20});
    }
    if (tied) logits.head(n).setConstant(logits[0]);

    const Eigen::VectorXd scores = softmax(logits);
    if (std::abs(scores.sum() - 1.0) > 1e-9) fail(fmt::format("case {}: sum {}", c, scores.sum()));
    const Eigen::VectorXd shifted = softmax((logits.array() + uniform(rng, -500, 500)).matrix());
    if ((shifted - scores).cwiseAbs().maxCoeff() > 1e-9) fail(fmt::format("case {}: shift changed scores", c));

    // Oracle: plain loop, first strictly larger product wins.
    int best = 0;
    for (int i = 1; i < n; ++i) {
      if (scores[i] * set.samples[i].confidence > scores[best] * set.samples[best].confidence) best = i;
    }
    const bool reject = scores[n] > scores[best] * set.samples[best].confidence;
    const int want = reject ? n : best;

    const auto d = decide(scores, set);
    if (d.action() != want) fail(fmt::format("case {}: action {} want {}", c, d.action(), want));
    const double k = std::pow(10.0, uniform(rng, -3, 3));
    const auto scaled = decide(scores * k, set);
    if (scaled.action() != d.action()) fail(fmt::format("case {}: scaling by {} changed the action", c, k));
    if (tied && !reject && d.action() != 0) fail(fmt::format("case {}: tie went to {}", c, d.action()));
  }
  Outcome o;
  o.pass = failures == 0;
  o.detail = failures == 0 ? "10000 cases, sum/shift/scale/tie properties hold"
                           : fmt::format("{} failures, first: {}", failures, first_failure);
  return o;
}

// ---- 6: feedback template fidelity ----

const std::vector<std::pair<std::string, std::string>>& feedback_catalogue() {
  static const std::vector<std::pair<std::string, std::string>> scripts = {
      {"find_count", "girl_patches = image_patch.find(\"girl\")"},
      {"find_one", "bus_patches = image_patch.find(\"bus\")"},
      {"find_none", "dog_patches = image_patch.find(\"dog\")"},
      {"existence", "has_bus = image_patch.exists(\"bus\")\nhas_dog = image_patch.exists(\"dog\")"},
      {"verify",
       "bus_patches = image_patch.find(\"bus\")\nbus_patch = bus_patches[0]\n"
       "is_yellow = bus_patch.verify_property(\"bus\", \"yellow\")\nis_red = bus_patch.verify_property(\"bus\", \"red\")"},
      {"caption", "desc = image_patch.caption()"},
      {"simple_answer", "bus_color = image_patch.simple_query(\"What color is the bus?\")"},
      {"depth",
       "bus_patches = image_patch.find(\"bus\")\nbus_patch = bus_patches[0]\nbus_depth = bus_patch.compute_depth()\n"
       "scene_depth = image_patch.compute_depth()"},
      {"llm_answer", "answer = llm_query(\"What do people carry when it rains?\", \"weather\")"},
      {"sort_middle",
       "girl_patches = image_patch.find(\"girl\")\nsorted_girls = sort_horizontal(girl_patches)\n"
       "mid = middle(sorted_girls)"},
      {"closest_farthest",
       "girl_patches = image_patch.find(\"girl\")\nbus_patches = image_patch.find(\"bus\")\nbus_patch = bus_patches[0]\n"
       "near = closest(girl_patches, bus_patch)\nfar = farthest(girl_patches, bus_patch)"},
      {"variables", "n = 2\nratio = 0.5\nflag = True\nfinal_answer = \"umbrella\""},
  };
  return scripts;
}

std::string render_catalogue() {
  std::string out;
  for (const auto& [label, source] : feedback_catalogue()) {
    MockToolkit toolkit({testing::fig3_scene()});
    const auto trace = interpret(parse_script(source), toolkit, toolkit.root("fig3"));
    out += "== " + label + "\n" + render_feedback(trace, 1).text + "\n";
  }
  return out;
}

Outcome criterion6() {
  const std::string golden = read_text_file(std::filesystem::path(HYDRA_TEST_DATA_DIR) / "golden/feedback_catalogue.txt");
  const std::string rendered = render_catalogue();
  const bool stable = render_catalogue() == rendered;

  std::vector<EventKind> seen;
  for (const auto& [label, source] : feedback_catalogue()) {
    MockToolkit toolkit({testing::fig3_scene()});
    for (const auto& e : interpret(parse_script(source), toolkit, toolkit.root("fig3")).events) seen.push_back(e.kind);
  }
  const EventKind all[] = {EventKind::find,     EventKind::exists, EventKind::verify,  EventKind::caption,
                           EventKind::simple_query, EventKind::depth, EventKind::llm_query, EventKind::sort,
                           EventKind::middle,   EventKind::closest, EventKind::farthest, EventKind::variable};
  const bool covered = std::all_of(std::begin(all), std::end(all), [&seen](EventKind k) {
    return std::find(seen.begin(), seen.end(), k) != seen.end();
  });

  Outcome o;
  o.pass = rendered == golden && stable && covered;
  if (rendered == golden) {
    o.detail = fmt::format("{} catalogue entries byte-identical ({} bytes); every event kind covered: {}",
                           feedback_catalogue().size(), golden.size(), covered);
  } else {
    std::size_t at = 0;
    while (at < golden.size() && at < rendered.size() && golden[at] == rendered[at]) ++at;
    o.detail = fmt::format("mismatch at byte {}: golden '{}' vs rendered '{}'", at, golden.substr(at, 60),
                           rendered.substr(at, 60));
  }
  return o;
}

// ---- 7: parser round trip and positioned errors ----

class ScriptGenerator {
 public:
  explicit ScriptGenerator(std::uint64_t seed) : rng_(seed) {}

  std::string script() {
    const int n = 1 + static_cast<int>(uniform_index(rng_, 8));
    std::string out;
    for (int i = 0; i < n; ++i) {
      if (chance(0.15)) out += pad() + "# note " + ident() + "\n";
      if (chance(0.1)) out += pad() + "\n";
      const std::string target = i + 1 == n && chance(0.5) ? kFinalAnswer : ident();
      out += pad() + target + pad() + "=" + pad() + expression(0) + pad();
      if (chance(0.2)) out += "  # trailing";
      out += "\n";
    }
    return out;
  }

 private:
  bool chance(double p) { return uniform01(rng_) < p; }
  std::string pick(const std::vector<std::string>& from) {
    return from[static_cast<std::size_t>(uniform_index(rng_, from.size()))];
  }
  std::string pad() { return std::string(static_cast<std::size_t>(uniform_index(rng_, 3)), ' '); }

  std::string ident() {
    static const std::vector<std::string> names = {"girl_patches", "bus", "x", "patch_2", "_tmp", "image_patch",
                                                   "Answer", "left_girl", "k9"};
    return pick(names);
  }

  std::string string_literal() {
    static const std::vector<std::string> pieces = {"girl", " ", "what's this?", "a \\\"quoted\\\" word",
                                                    "tab\\there", "line\\nbreak", "back\\\\slash", "#hash", ""};
    return "\"" + pick(pieces) + pick(pieces) + "\"";
  }

  std::string number_literal() {
    switch (uniform_index(rng_, 5)) {
      case 0: return std::to_string(uniform_index(rng_, 1000));
      case 1: return fmt::format("-{}", uniform_index(rng_, 50));
      case 2: return fmt::format("{}.{}", uniform_index(rng_, 100), uniform_index(rng_, 1000));
      case 3: return fmt::format("{}e{}", 1 + uniform_index(rng_, 9), static_cast<int>(uniform_index(rng_, 20)) - 10);
      default: return fmt::format("{}", uniform(rng_, -1e6, 1e6));
    }
  }

  std::string expression(int depth) {
    const auto kind = uniform_index(rng_, depth >= 3 ? 4 : 6);
    switch (kind) {
      case 0: return string_literal();
      case 1: return number_literal();
      case 2: return chance(0.5) ? pick({"True", "False", "true", "false"}) : ident();
      case 3: return ident() + "[" + std::to_string(uniform_index(rng_, 12)) + "]";
      default: {
        std::string call = chance(0.5) ? ident() + "." : "";
        call += pick({"find", "exists", "verify_property", "simple_query", "crop", "middle", "closest", "count"});
        call += "(";
        const int args = static_cast<int>(uniform_index(rng_, 4));
        for (int a = 0; a < args; ++a) call += (a ? "," + pad() : "") + expression(depth + 1);
        return call + ")";
      }
    }
  }

  Rng rng_;
};

struct MalformedCase {
  std::string source;
  int line;
  int column;
};

const std::vector<MalformedCase>& malformed_fixtures() {
  static const std::vector<MalformedCase> cases = {
      {"x = image_patch.find(\"girl\"", 1, 28},
      {"x = \"unterminated", 1, 18},
      {"= 5", 1, 1},
      {"x 5", 1, 3},
      {"ok = 1\nx = image_patch.find(\"a\") )", 2, 27},
      {"x = y[-1]", 1, 7},
      {"x = $", 1, 5},
      {"final_answer = 1\nfinal_answer = 2", 2, 1},
      {"x = \"bad \\q escape\"", 1, 10},
      {"", 1, 1},
      {"\n# only a comment", 2, 1},
      {"x = a.(1)", 1, 7},
      {"x = f(1,)", 1, 9},
      {"x = 1e999", 1, 5},
      {"True = 1", 1, 1},
      {"a = 1\n  b = image_patch.find(\"x\")\n c = d[", 3, 8},
      {"a = 1\n  final_answer = a\n  final_answer = a", 3, 3},
      {"x = f(1 2)", 1, 9},
  };
  return cases;
}

Outcome criterion7() {
  ScriptGenerator gen(77);
  int round_trip_failures = 0;
  std::string first;
  for (int i = 0; i < 1000; ++i) {
    const std::string source = gen.script();
    try {
      const ActionScript a = parse_script(source);
      const std::string printed = pretty_print(a);
      const ActionScript b = parse_script(printed);
      if (!(a == b) || pretty_print(b) != printed) {
        if (round_trip_failures++ == 0) first = source;
      }
    } catch (const ParseError& e) {
      if (round_trip_failures++ == 0) first = fmt::format("{} ({}:{} {})", source, e.line(), e.column(), e.what());
    }
  }

  int position_failures = 0;
  std::string first_position;
  for (const auto& c : malformed_fixtures()) {
    try {
      (void)parse_script(c.source);
      if (position_failures++ == 0) first_position = fmt::format("'{}' parsed", c.source);
    } catch (const ParseError& e) {
      if (e.line() != c.line || e.column() != c.column) {
        if (position_failures++ == 0) {
          first_position = fmt::format("'{}' at {}:{}, want {}:{}", c.source, e.line(), e.column(), c.line, c.column);
        }
      }
    }
  }
  Outcome o;
  o.pass = round_trip_failures == 0 && position_failures == 0;
  o.detail = fmt::format("1000 generated scripts, {} round-trip failures{}; {} malformed fixtures, {} mispositioned{}",
                         round_trip_failures, first.empty() ? "" : " (first: " + first + ")",
                         malformed_fixtures().size(), position_failures,
                         first_position.empty() ? "" : " (first: " + first_position + ")");
  return o;
}

// ---- 8: IoU against raster counting ----

double raster_iou(const BoundingBox& a, const BoundingBox& b) {
  long inter = 0, uni = 0;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const double cx = x + 0.5, cy = y + 0.5;
      const bool in_a = cx > a.x1 && cx < a.x2 && cy > a.y1 && cy < a.y2;
      const bool in_b = cx > b.x1 && cx < b.x2 && cy > b.y1 && cy < b.y2;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

Outcome criterion8() {
  Rng rng(8);
  auto random_box = [&rng] {
    const double xa = static_cast<double>(uniform_index(rng, 65)), xb = static_cast<double>(uniform_index(rng, 65));
    const double ya = static_cast<double>(uniform_index(rng, 65)), yb = static_cast<double>(uniform_index(rng, 65));
    return BoundingBox{std::min(xa, xb), std::min(ya, yb), std::max(xa, xb), std::max(ya, yb)};
  };
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const BoundingBox a = random_box();
    // Every fourth pair overlaps by construction so the comparison is not dominated by zeros.
    BoundingBox b = random_box();
    if (i % 4 == 0) b = {a.x1 + (b.x1 - a.x1) / 2, a.y1 + (b.y1 - a.y1) / 2, b.x2, b.y2};
    if (b.x1 > b.x2) std::swap(b.x1, b.x2);
    if (b.y1 > b.y2) std::swap(b.y1, b.y2);
    b = {std::floor(b.x1), std::floor(b.y1), std::ceil(b.x2), std::ceil(b.y2)};
    worst = std::max(worst, std::abs(iou(a, b) - raster_iou(a, b)));
  }
  const double seventh = iou({0, 0, 2, 2}, {1, 1, 3, 3});
  Outcome o;
  o.pass = worst <= 1e-9 && std::abs(seventh - 1.0 / 7.0) <= 1e-15;
  o.detail = fmt::format("1000 random pairs, max |iou - raster| {:.1e}; [0,0,2,2]/[1,1,3,3] = {:.17g}", worst, seventh);
  return o;
}

// ---- 9: loop bounds under adversarial backends ----

class ThrowingBackend final : public LlmBackend {
 public:
  std::string complete(const std::string&) override {
    ++calls;
    throw BackendUnavailable("connection refused");
  }
  [[nodiscard]] std::string identity() const override { return "down"; }
  int calls = 0;
};

Outcome criterion9() {
  const auto prompts = testing::shipped_prompts();
  HashingEmbedding embedder;
  LoopConfig loop;
  EpisodeContext ctx{&prompts, &embedder, loop, false};
  const Query q{"What is the girl on the right holding?", "fig3", TaskKind::vqa};
  const std::string plan = testing::plan_with_lead("Find the girls");
  const std::string broken = "final_answer = image_patch.find(";

  std::vector<std::string> problems;
  auto within = [&](const std::string& name, const EpisodeResult& r) {
    if (r.answer.answered()) problems.push_back(name + ": answered");
    if (r.steps_taken > loop.max_iterations) problems.push_back(name + ": too many steps");
    if (r.planner_calls > loop.planner_call_budget()) problems.push_back(name + ": planner budget");
    if (r.coder_calls > loop.coder_call_budget()) problems.push_back(name + ": coder budget");
    if (r.summarizer_calls > loop.summarizer_call_budget()) problems.push_back(name + ": summarizer budget");
  };

  // Controller that rejects everything, with broken code and a summarizer that never answers.
  auto e1 = testing::scripted({plan}, {broken}, {"continue"}, {testing::fig3_scene()}, true);
  testing::RejectingSelector rejecting;
  const auto r1 = run_episode(q, ctx, e1.backends(), rejecting);
  within("always-reject", r1);
  int forced = 0;
  for (const auto& d : r1.decisions) forced += d.forced;
  if (forced != loop.max_iterations || rejecting.calls != loop.max_iterations * loop.max_rejections_per_step) {
    problems.push_back(fmt::format("always-reject: {} forced, {} rejections", forced, rejecting.calls));
  }

  // Sensible controller, code that never parses.
  auto e2 = testing::scripted({plan}, {broken}, {"continue"}, {testing::fig3_scene()}, true);
  ConfidenceSelector confident;
  const auto r2 = run_episode(q, ctx, e2.backends(), confident);
  within("broken-code", r2);
  if (r2.coder_calls != loop.coder_call_budget()) problems.push_back("broken-code: retries not exhausted");

  // Planner that never produces a parseable list.
  auto e3 = testing::scripted({"I am not sure what to do."}, {broken}, {"continue"}, {testing::fig3_scene()}, true);
  const auto r3 = run_episode(q, ctx, e3.backends(), confident);
  within("planner-garbage", r3);
  if (!r3.error) problems.push_back("planner-garbage: no error recorded");

  // Every model endpoint down.
  auto down = std::make_shared<ThrowingBackend>();
  EpisodeBackends e4{down, down, down, std::make_shared<MockToolkit>(std::vector<Scene>{testing::fig3_scene()})};
  const auto r4 = run_episode(q, ctx, e4, confident);
  within("backend-down", r4);
  if (!r4.error) problems.push_back("backend-down: no error recorded");

  Outcome o;
  o.pass = problems.empty();
  o.detail = problems.empty()
                 ? fmt::format("always-reject {} planner/{} coder calls, broken-code {} coder calls, garbage and "
                               "outage end unanswered (budgets {}/{}/{})",
                               r1.planner_calls, r1.coder_calls, r2.coder_calls, loop.planner_call_budget(),
                               loop.coder_call_budget(), loop.summarizer_call_budget())
                 : fmt::format("{}", fmt::join(problems, "; "));
  return o;
}

// ---- 10: deterministic training via the CLI ----

int run_command(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion10() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / fmt::format("hydra_c10_{}", ::getpid());
  fs::remove_all(root);
  const std::string cli = HYDRA_CLI_PATH;
  if (run_command(fmt::format("'{}' synth --out '{}' --count 60 --seed 3 --templates '{}'", cli, root.string(),
                              HYDRA_TEMPLATES_DIR)) != 0) {
    return {false, "synth failed"};
  }
  RunConfig cfg = load_config(root / "synthetic.conf");
  cfg.max_observations = 1400;
  save_config(root / "synthetic.conf", cfg);

  for (const char* run : {"a", "b"}) {
    const auto cmd = fmt::format("'{}' train --config '{}' --dataset '{}' --out '{}' --seed 7", cli,
                                 (root / "synthetic.conf").string(), (root / "dataset.jsonl").string(),
                                 (root / run / "ckpt.json").string());
    if (run_command(cmd) != 0) return {false, fmt::format("train run {} failed", run)};
  }
  const std::string ckpt_a = slurp(root / "a/ckpt.json"), ckpt_b = slurp(root / "b/ckpt.json");
  const std::string csv_a = slurp(root / "a/ckpt.rewards.csv"), csv_b = slurp(root / "b/ckpt.rewards.csv");
  const Checkpoint ck = load_checkpoint(root / "a/ckpt.json");
  const auto dims = checkpoint_to_json(ck)["layer_dims"];
  fs::remove_all(root);

  Outcome o;
  o.pass = !ckpt_a.empty() && ckpt_a == ckpt_b && !csv_a.empty() && csv_a == csv_b && dims.dump() == "[1536,512,6]";
  o.detail = fmt::format("checkpoint {} bytes identical: {}; reward csv {} bytes identical: {}; layer_dims {}",
                         ckpt_a.size(), ckpt_a == ckpt_b, csv_a.size(), csv_a == csv_b, dims.dump());
  return o;
}

// ---- 11: two-step end-to-end episode ----

Outcome criterion11() {
  const auto prompts = testing::shipped_prompts();
  HashingEmbedding embedder;
  EpisodeContext ctx{&prompts, &embedder, LoopConfig{}, true};
  const Query q{"What is the girl on the right holding?", "fig3", TaskKind::vqa};
  auto e = testing::scripted(
      {testing::plan_with_lead("Find the girls in the image"),
       testing::plan_with_lead("Take the girl on the right and ask what she is holding")},
      {"girl_patches = image_patch.find(\"girl\")",
       "```\nsorted_girls = sort_horizontal(girl_patches)\nright_girl = sorted_girls[1]\n"
       "final_answer = right_girl.simple_query(\"What is the girl holding?\")\n```"},
      {"umbrella"}, {testing::fig3_scene()});
  ConfidenceSelector selector;
  const auto r = run_episode(q, ctx, e.backends(), selector);

  const auto planner_prompts = e.planner->prompts();
  const bool second_prompt_has_history =
      planner_prompts.size() == 2 &&
      planner_prompts[1].find("Detection result: 2 girl have been detected in image_patch.") != std::string::npos &&
      planner_prompts[0].find("Detection result") == std::string::npos;

  Outcome o;
  o.pass = r.answer.text == std::optional<std::string>("umbrella") && r.steps_taken == 2 && !r.error &&
           second_prompt_has_history && r.summarizer_calls == 1;
  o.detail = fmt::format("answer '{}', {} steps, {} planner / {} coder / {} summarizer calls, history carried: {}",
                         answer_text(r.answer), r.steps_taken, r.planner_calls, r.coder_calls, r.summarizer_calls,
                         second_prompt_has_history);
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

  const std::vector<Criterion> criteria = {
      {1, "reward traces", criterion1},
      {2, "exploration schedule", criterion2},
      {3, "gradient check", criterion3},
      {4, "softmax and selection", criterion4},
      {5, "closed-loop learning", criterion5},
      {6, "feedback templates", criterion6},
      {7, "parser", criterion7},
      {8, "iou oracle", criterion8},
      {9, "loop bounds", criterion9},
      {10, "determinism", criterion10},
      {11, "two-step episode", criterion11},
  };

  bool all = true;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    all = all && o.pass;
    fmt::print("{} criterion {:>2} ({}): {}\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail);
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
