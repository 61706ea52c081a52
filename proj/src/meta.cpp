#include <cmath>
#include <set>

#include <fmt/format.h>

#include "hydra/error.hpp"
#include "hydra/types.hpp"

namespace hydra {

std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::vqa ? "vqa" : "grounding";
}

TaskKind parse_task_kind(std::string_view text) {
  if (text == "vqa") return TaskKind::vqa;
  if (text == "grounding") return TaskKind::grounding;
  throw ConfigError(fmt::format("unknown task kind '{}'", text));
}

void validate(const Query& q) {
  if (q.text.empty()) throw ConfigError("query text is empty");
}

bool BoundingBox::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
         x1 <= x2 && y1 <= y2;
}

std::string format_number(double value) {
  if (value == 0.0) return "0";
  return fmt::format("{}", value);
}

std::string format_box(const BoundingBox& box) {
  return fmt::format("[{},{},{},{}]", format_number(box.x1), format_number(box.y1),
                     format_number(box.x2), format_number(box.y2));
}

Answer Answer::from_text(std::string value) {
  Answer a;
  a.kind = Kind::text;
  a.text = std::move(value);
  return a;
}

Answer Answer::from_box(const BoundingBox& value) {
  Answer a;
  a.kind = Kind::box;
  a.box = value;
  return a;
}

std::string MetaInfo::render() const {
  std::string out = "Task: " + task_description + "\n\nAvailable skills:";
  for (const auto& s : skills) {
    out += fmt::format("\n- {}: {}", s.name, s.capability);
    if (!s.usage.empty()) out += fmt::format(" Usage: {}", s.usage);
  }
  return out;
}

void MetaInfo::validate() const {
  std::set<std::string> seen;
  for (const auto& s : skills) {
    if (s.name.empty()) throw ConfigError("skill with empty name");
    if (!seen.insert(s.name).second) throw ConfigError("duplicate skill name '" + s.name + "'");
  }
}

}  // namespace hydra
