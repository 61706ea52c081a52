#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "hydra/types.hpp"

namespace hydra {

/// Lowercase, trim, collapse whitespace, drop terminal punctuation and a
/// leading article (a, an, the).
std::string normalize_answer(std::string_view text);

/// Expected answer for a labelled query: text for vqa, a box for grounding.
struct Gold {
  std::optional<std::string> text;
  std::optional<BoundingBox> box;
};

struct LabeledQuery {
  std::string id;
  Query query;
  Gold gold;
};

/// Throws ConfigError unless the gold value matches the task kind.
void validate(const LabeledQuery& row);

/// m in [0, 1]: normalised exact match for vqa, IoU for grounding; 0 for an
/// unanswered or type-mismatched prediction.
double answer_metric(const Answer& predicted, const Gold& gold, TaskKind task);

/// vqa: m == 1; grounding: IoU > 0.
bool answer_related(double m, TaskKind task);

/// Text for display and reports: the answer text, "x1,y1,x2,y2" for boxes,
/// empty when unanswered.
std::string answer_text(const Answer& a);

}  // namespace hydra
