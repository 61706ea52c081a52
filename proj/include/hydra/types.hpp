#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hydra {

enum class TaskKind { vqa, grounding };

std::string_view to_string(TaskKind kind);
/// Accepts "vqa" or "grounding"; throws ConfigError otherwise.
TaskKind parse_task_kind(std::string_view text);

/// A question (vqa) or referring phrase (grounding) about one image.
struct Query {
  std::string text;
  std::string image_ref;
  TaskKind task = TaskKind::vqa;
};

/// Throws ConfigError when the query text is empty.
void validate(const Query& q);

struct BoundingBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  [[nodiscard]] double width() const { return x2 - x1; }
  [[nodiscard]] double height() const { return y2 - y1; }
  [[nodiscard]] double area() const { return width() * height(); }
  [[nodiscard]] double center_x() const { return 0.5 * (x1 + x2); }
  [[nodiscard]] double center_y() const { return 0.5 * (y1 + y2); }
  /// x1 <= x2, y1 <= y2 and all coordinates finite.
  [[nodiscard]] bool valid() const;
  [[nodiscard]] bool contains_point(double x, double y) const {
    return x >= x1 && x <= x2 && y >= y1 && y <= y2;
  }

  bool operator==(const BoundingBox&) const = default;
};

/// "[x1,y1,x2,y2]" with shortest round-trip numbers.
std::string format_box(const BoundingBox& box);

struct Answer {
  enum class Kind { text, box, unanswered };

  Kind kind = Kind::unanswered;
  std::optional<std::string> text;
  std::optional<BoundingBox> box;

  static Answer from_text(std::string value);
  static Answer from_box(const BoundingBox& value);
  static Answer none() { return {}; }

  [[nodiscard]] bool answered() const { return kind != Kind::unanswered; }
};

struct InstructionSample {
  std::string text;
  double confidence = 0.0;

  bool operator==(const InstructionSample&) const = default;
};

/// The planner's N candidates for step `step`, in planner order.
struct InstructionSet {
  std::vector<InstructionSample> samples;
  int step = 1;

  [[nodiscard]] std::size_t size() const { return samples.size(); }
  bool operator==(const InstructionSet&) const = default;
};

struct FeedbackEntry {
  int step = 1;
  std::string text;
};

struct SkillDescriptor {
  std::string name;
  std::string capability;
  std::string usage;
};

/// Episode-constant context: the skills on offer and what the task asks for.
struct MetaInfo {
  std::vector<SkillDescriptor> skills;
  std::string task_description;

  [[nodiscard]] std::string render() const;
  /// Throws ConfigError on duplicate skill names.
  void validate() const;
};

}  // namespace hydra

namespace hydra {

/// Shortest round-trip decimal rendering; integral values print without a
/// fractional part ("10", "2.5").
std::string format_number(double value);

}  // namespace hydra
