#include "hydra/prompt_template.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "hydra/error.hpp"

namespace hydra {

namespace {

// Length of a placeholder token starting at text[pos], or 0.
std::size_t placeholder_length(std::string_view text, std::size_t pos) {
  if (text[pos] != '[' || pos + 2 >= text.size()) return 0;
  std::size_t i = pos + 1;
  if (!std::isupper(static_cast<unsigned char>(text[i]))) return 0;
  while (i < text.size() && (std::isupper(static_cast<unsigned char>(text[i])) ||
                             std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '_')) {
    ++i;
  }
  if (i >= text.size() || text[i] != ']') return 0;
  return i - pos + 1;
}

std::string trim_trailing_newlines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

}  // namespace

std::vector<std::string> find_placeholders(std::string_view text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (auto len = placeholder_length(text, i)) {
      out.emplace_back(text.substr(i + 1, len - 2));
      i += len - 1;
    }
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  return PromptTemplate(read_text_file(path));
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  std::string out;
  out.reserve(text_.size() * 2);
  const std::string_view text = text_;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (auto len = placeholder_length(text, i)) {
      const std::string key(text.substr(i + 1, len - 2));
      auto it = values.find(key);
      if (it == values.end()) {
        throw TemplateError(fmt::format("no value for placeholder [{}]", key));
      }
      out += it->second;
      i += len - 1;
    } else {
      out += text[i];
    }
  }
  return out;
}

std::string_view query_type_label(TaskKind kind) {
  return kind == TaskKind::vqa ? "visual question answering" : "visual grounding";
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  PromptLibrary lib;
  lib.planner = PromptTemplate::load(dir / "planner_prompt.txt");
  lib.coder = PromptTemplate::load(dir / "code_prompt.txt");
  lib.summarizer = PromptTemplate::load(dir / "summarizer_prompt.txt");
  lib.api_reference = trim_trailing_newlines(read_text_file(dir / "api_reference.txt"));

  std::istringstream skills(read_text_file(dir / "skills.txt"));
  std::string line;
  while (std::getline(skills, line)) {
    if (line.empty() || line.front() == '#') continue;
    // name | capability | usage
    SkillDescriptor d;
    auto a = line.find('|');
    auto b = a == std::string::npos ? a : line.find('|', a + 1);
    auto field = [](std::string s) {
      auto f = s.find_first_not_of(' ');
      auto l = s.find_last_not_of(' ');
      return f == std::string::npos ? std::string{} : s.substr(f, l - f + 1);
    };
    if (a == std::string::npos) throw ConfigError("malformed skills line: " + line);
    d.name = field(line.substr(0, a));
    d.capability = field(line.substr(a + 1, b == std::string::npos ? b : b - a - 1));
    if (b != std::string::npos) d.usage = field(line.substr(b + 1));
    lib.skills.push_back(std::move(d));
  }

  for (TaskKind kind : {TaskKind::vqa, TaskKind::grounding}) {
    const std::string k(to_string(kind));
    lib.task_descriptions[kind] = trim_trailing_newlines(read_text_file(dir / ("task_" + k + ".txt")));
    lib.planner_examples[kind] =
        trim_trailing_newlines(read_text_file(dir / ("example_planner_" + k + ".txt")));
    lib.code_examples[kind] =
        trim_trailing_newlines(read_text_file(dir / ("example_code_" + k + ".txt")));
  }
  lib.meta(TaskKind::vqa).validate();
  return lib;
}

MetaInfo PromptLibrary::meta(TaskKind kind) const {
  MetaInfo m;
  m.skills = skills;
  auto it = task_descriptions.find(kind);
  if (it != task_descriptions.end()) m.task_description = it->second;
  return m;
}

}  // namespace hydra
