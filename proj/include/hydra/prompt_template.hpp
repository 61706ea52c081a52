#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hydra/types.hpp"

namespace hydra {

/// Every "[UPPER_CASE]" token in `text`, in order of appearance.
std::vector<std::string> find_placeholders(std::string_view text);

/// Prompt text with bracketed placeholders such as [QUERY]. Substitution is a
/// single pass: inserted values are never rescanned.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  explicit PromptTemplate(std::string text) : text_(std::move(text)) {}

  /// Throws ConfigError if the file cannot be read.
  static PromptTemplate load(const std::filesystem::path& path);

  /// Throws TemplateError if the template names a placeholder missing from
  /// `values`.
  [[nodiscard]] std::string render(const std::map<std::string, std::string>& values) const;

  [[nodiscard]] const std::string& text() const { return text_; }

 private:
  std::string text_;
};

/// The shipped prompt set: planner, code generator and summarizer templates,
/// the action-language reference, skills and per-task examples.
struct PromptLibrary {
  PromptTemplate planner;
  PromptTemplate coder;
  PromptTemplate summarizer;
  std::string api_reference;
  std::vector<SkillDescriptor> skills;
  std::map<TaskKind, std::string> task_descriptions;
  std::map<TaskKind, std::string> planner_examples;
  std::map<TaskKind, std::string> code_examples;

  /// Reads the fixed file layout under `dir`; throws ConfigError on any
  /// missing file.
  static PromptLibrary load(const std::filesystem::path& dir);

  [[nodiscard]] MetaInfo meta(TaskKind kind) const;
};

/// Short label substituted for [QUERY_TYPE].
std::string_view query_type_label(TaskKind kind);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace hydra
