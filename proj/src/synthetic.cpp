#include "hydra/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include <fmt/format.h>

#include "hydra/error.hpp"
#include "hydra/llm.hpp"
#include "hydra/planner.hpp"

namespace hydra {

namespace {

const std::vector<std::string> kObjects = {"dog", "cat", "bus", "car", "girl", "boy", "tree", "bike"};
const std::vector<std::string> kColors = {"red", "blue", "yellow", "green", "white", "black"};

constexpr double kWidth = 640;
constexpr double kHeight = 480;

std::string pick(const std::vector<std::string>& from, Rng& rng) {
  return from[static_cast<std::size_t>(uniform_index(rng, from.size()))];
}

double round1(double x) { return std::round(x * 10.0) / 10.0; }

SceneObject random_object(const std::string& name, Rng& rng) {
  SceneObject o;
  o.name = name;
  const double w = std::round(uniform(rng, 30, 160));
  const double h = std::round(uniform(rng, 30, 160));
  const double x1 = std::round(uniform(rng, 0, kWidth - w));
  const double y1 = std::round(uniform(rng, 0, kHeight - h));
  o.box = {x1, y1, x1 + w, y1 + h};
  o.attributes["color"] = pick(kColors, rng);
  o.depth = round1(uniform(rng, 1.0, 20.0));
  return o;
}

std::string escape_regex(const std::string& s) {
  static const std::regex special(R"([.^$|()\[\]{}*+?\\])");
  return std::regex_replace(s, special, R"(\$&)");
}

std::string feedback_section(const std::string& prompt) {
  static const std::string open = "Execution Feedback (Details of the known visual information in the image):\n";
  const auto b = prompt.find(open);
  if (b == std::string::npos) return prompt;
  const auto start = b + open.size();
  const auto e = prompt.find("\n\nThe question is", start);
  return prompt.substr(start, e == std::string::npos ? std::string::npos : e - start);
}

std::optional<std::string> last_match(const std::string& text, const std::regex& re) {
  std::optional<std::string> out;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
    out = (*it)[1].str();
  }
  return out;
}

}  // namespace

std::string synthetic_query_text(SyntheticKind kind, const std::string& object) {
  switch (kind) {
    case SyntheticKind::existence: return fmt::format("Is there a {} in the image?", object);
    case SyntheticKind::count: return fmt::format("How many {} are there?", object);
    case SyntheticKind::color: return fmt::format("What color is the {}?", object);
    case SyntheticKind::caption: return "What is happening in this image?";
    case SyntheticKind::depth: return fmt::format("How far away is the {}?", object);
  }
  throw ConfigError("unknown synthetic kind");
}

std::optional<std::pair<SyntheticKind, std::string>> parse_synthetic_query(const std::string& text) {
  static const std::regex existence(R"(^Is there a (\w+) in the image\?$)");
  static const std::regex count(R"(^How many (\w+) are there\?$)");
  static const std::regex color(R"(^What color is the (\w+)\?$)");
  static const std::regex depth(R"(^How far away is the (\w+)\?$)");
  std::smatch m;
  if (std::regex_match(text, m, existence)) return std::pair{SyntheticKind::existence, m[1].str()};
  if (std::regex_match(text, m, count)) return std::pair{SyntheticKind::count, m[1].str()};
  if (std::regex_match(text, m, color)) return std::pair{SyntheticKind::color, m[1].str()};
  if (std::regex_match(text, m, depth)) return std::pair{SyntheticKind::depth, m[1].str()};
  if (text == "What is happening in this image?") return std::pair{SyntheticKind::caption, std::string()};
  return std::nullopt;
}

std::vector<std::string> synthetic_instructions(const std::string& object) {
  return {
      fmt::format("Check whether a {} exists in the image", object),
      fmt::format("Count the {} objects in the image", object),
      fmt::format("Ask what color the {} is", object),
      "Describe what is happening in the image",
      fmt::format("Measure the depth of the {}", object),
  };
}

std::string synthetic_script(const std::string& instruction) {
  static const std::regex exists(R"(^Check whether a (\w+) exists in the image$)");
  static const std::regex count(R"(^Count the (\w+) objects in the image$)");
  static const std::regex color(R"(^Ask what color the (\w+) is$)");
  static const std::regex depth(R"(^Measure the depth of the (\w+)$)");
  std::smatch m;
  if (std::regex_match(instruction, m, exists)) {
    return fmt::format("final_answer = image_patch.exists(\"{}\")", m[1].str());
  }
  if (std::regex_match(instruction, m, count)) {
    return fmt::format("{0}_patches = image_patch.find(\"{0}\")\nfinal_answer = count({0}_patches)", m[1].str());
  }
  if (std::regex_match(instruction, m, color)) {
    return fmt::format("final_answer = image_patch.simple_query(\"what color is the {}?\")", m[1].str());
  }
  if (instruction == "Describe what is happening in the image") {
    return "final_answer = image_patch.caption()";
  }
  if (std::regex_match(instruction, m, depth)) {
    return fmt::format(
        "{0}_patches = image_patch.find(\"{0}\")\n{0}_patch = {0}_patches[0]\nfinal_answer = {0}_patch.compute_depth()",
        m[1].str());
  }
  return {};
}

std::string synthetic_planner_reply(SyntheticKind kind, const std::string& object, Rng& rng,
                                    const SyntheticPlannerConfig& config) {
  const auto texts = synthetic_instructions(object);
  std::vector<double> conf(texts.size());
  for (auto& c : conf) c = std::round(uniform(rng, config.confidence_lo, config.confidence_hi) * 100.0) / 100.0;
  const auto correct = static_cast<std::size_t>(kind);
  const bool on_top = uniform01(rng) < config.correct_on_top;
  const auto top = static_cast<std::size_t>(std::max_element(conf.begin(), conf.end()) - conf.begin());
  if (on_top) {
    std::swap(conf[correct], conf[top]);
  } else if (top == correct || conf[correct] == conf[top]) {
    // Hand the top value to some other instruction and make it strictly larger.
    std::size_t other = static_cast<std::size_t>(uniform_index(rng, texts.size() - 1));
    if (other >= correct) ++other;
    std::swap(conf[correct], conf[other]);
    if (conf[correct] >= conf[other]) conf[other] = std::min(1.0, conf[correct] + 0.01);
    if (conf[correct] >= conf[other]) conf[correct] = conf[other] - 0.01;
  }
  InstructionSet set;
  for (std::size_t i = 0; i < texts.size(); ++i) set.samples.push_back({texts[i], conf[i]});
  return format_instruction_list(set);
}

std::string synthetic_summary(SyntheticKind kind, const std::string& object, const std::string& prompt) {
  const std::string fb = feedback_section(prompt);
  const std::string o = escape_regex(object);
  std::optional<std::string> found;
  switch (kind) {
    case SyntheticKind::existence: {
      const std::regex re(fmt::format(R"(The existence of {} in image patch \S+ is: (True|False)\.)", o));
      found = last_match(fb, re);
      if (found) found = *found == "True" ? "yes" : "no";
      break;
    }
    case SyntheticKind::count:
      found = last_match(fb, std::regex(R"((?:^|\n)final_answer: (\d+)(?:\n|$))"));
      break;
    case SyntheticKind::color:
      found = last_match(fb, std::regex(fmt::format(
                                 R"(in response to the question 'what color is the {}\?' is: ([^\n]+))", o)));
      break;
    case SyntheticKind::caption:
      found = last_match(fb, std::regex(R"(The caption for image patch image_patch is: ([^\n]+)\.)"));
      break;
    case SyntheticKind::depth:
      found = last_match(fb, std::regex(fmt::format(R"(The median depth for image patch {}_\d+ is: ([^\n]+))", o)));
      break;
  }
  return found.value_or("continue");
}

SyntheticDataset make_synthetic_dataset(std::size_t count, std::uint64_t seed, const std::string& prefix) {
  SyntheticDataset ds;
  Rng rng(seed);
  for (std::size_t k = 0; k < count; ++k) {
    const auto kind = static_cast<SyntheticKind>(uniform_index(rng, kSyntheticInstructions));
    const std::string target = pick(kObjects, rng);
    const bool present = kind != SyntheticKind::existence || uniform01(rng) < 0.5;

    Scene scene;
    scene.id = fmt::format("{}{}", prefix, k);
    scene.width = kWidth;
    scene.height = kHeight;
    const auto n_objects = static_cast<std::size_t>(2 + uniform_index(rng, 5));
    if (present) scene.objects.push_back(random_object(target, rng));
    while (scene.objects.size() < n_objects) {
      std::string name = pick(kObjects, rng);
      if (!present && name == target) continue;
      scene.objects.push_back(random_object(name, rng));
    }
    // Shuffle so the target is not always first.
    for (std::size_t i = scene.objects.size(); i > 1; --i) {
      std::swap(scene.objects[i - 1], scene.objects[static_cast<std::size_t>(uniform_index(rng, i))]);
    }
    std::string caption = "a scene with";
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      const auto& o = scene.objects[i];
      caption += fmt::format("{} a {} {}", i == 0 ? "" : (i + 1 == scene.objects.size() ? " and" : ","),
                             o.attributes.at("color"), o.name);
    }
    scene.caption = caption;

    MockToolkit oracle({scene});
    const Patch root = oracle.root(scene.id);
    const PatchList hits = oracle.find(root, target);
    if (!hits.empty()) {
      for (const auto& o : scene.objects) {
        if (o.box == hits.front().box && o.name == target) {
          scene.qa[normalize_question(fmt::format("what color is the {}?", target))] = o.attributes.at("color");
          break;
        }
      }
    }
    MockToolkit final_oracle({scene});

    std::string gold;
    switch (kind) {
      case SyntheticKind::existence: gold = hits.empty() ? "no" : "yes"; break;
      case SyntheticKind::count: gold = format_number(static_cast<double>(hits.size())); break;
      case SyntheticKind::color: gold = final_oracle.simple_query(root, fmt::format("what color is the {}?", target)); break;
      case SyntheticKind::caption: gold = scene.caption; break;
      case SyntheticKind::depth: gold = format_number(final_oracle.compute_depth(hits.front())); break;
    }

    LabeledQuery row;
    row.id = scene.id;
    row.query = Query{synthetic_query_text(kind, target), scene.id, TaskKind::vqa};
    row.gold.text = gold;
    ds.rows.push_back(std::move(row));
    ds.kinds.push_back(kind);
    ds.scenes.push_back(std::move(scene));
  }
  return ds;
}

BackendFactory synthetic_backend_factory(std::shared_ptr<MockToolkit> toolkit, SyntheticPlannerConfig config) {
  return [toolkit = std::move(toolkit), config](const LabeledQuery& example, std::uint64_t seed) {
    const auto parsed = parse_synthetic_query(example.query.text);
    if (!parsed) throw ConfigError("not a synthetic query: " + example.query.text);
    const SyntheticKind kind = parsed->first;
    std::string object = parsed->second;
    if (object.empty()) {
      // Caption queries name no object; the instructions mention the first one in the scene.
      const Scene& s = toolkit->scene(example.query.image_ref);
      object = s.objects.empty() ? "object" : s.objects.front().name;
    }
    auto rng = std::make_shared<Rng>(seed);
    EpisodeBackends b;
    b.planner = std::make_shared<FunctionBackend>(
        [kind, object, rng, config](const std::string&) {
          return synthetic_planner_reply(kind, object, *rng, config);
        },
        "synthetic-planner");
    b.coder = std::make_shared<FunctionBackend>(
        [](const std::string& prompt) {
          static const std::regex line(R"((?:^|\n)Current Instruction: ([^\n]*))");
          std::smatch m;
          if (!std::regex_search(prompt, m, line)) return std::string("final_answer = unknown_skill()");
          const std::string script = synthetic_script(m[1].str());
          return script.empty() ? std::string("final_answer = unknown_skill()") : script;
        },
        "synthetic-coder");
    b.summarizer = std::make_shared<FunctionBackend>(
        [kind, object](const std::string& prompt) { return synthetic_summary(kind, object, prompt); },
        "synthetic-summarizer");
    b.toolkit = toolkit;
    return b;
  };
}

}  // namespace hydra
