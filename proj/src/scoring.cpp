#include "hydra/scoring.hpp"

#include <cctype>

#include <fmt/format.h>

#include "hydra/error.hpp"
#include "hydra/perception.hpp"

namespace hydra {

std::string normalize_answer(std::string_view text) {
  std::string s;
  bool space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !s.empty();
      continue;
    }
    if (space) s += ' ';
    space = false;
    s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  while (!s.empty() && std::ispunct(static_cast<unsigned char>(s.back()))) s.pop_back();
  while (!s.empty() && s.back() == ' ') s.pop_back();
  for (std::string_view article : {"a ", "an ", "the "}) {
    if (s.size() > article.size() && s.compare(0, article.size(), article) == 0) {
      s.erase(0, article.size());
      break;
    }
  }
  return s;
}

void validate(const LabeledQuery& row) {
  validate(row.query);
  if (row.query.task == TaskKind::vqa && !row.gold.text) {
    throw ConfigError(fmt::format("row {}: vqa rows need a text gold answer", row.id));
  }
  if (row.query.task == TaskKind::grounding && !row.gold.box) {
    throw ConfigError(fmt::format("row {}: grounding rows need a gold box", row.id));
  }
}

double answer_metric(const Answer& predicted, const Gold& gold, TaskKind task) {
  if (task == TaskKind::vqa) {
    if (!predicted.text || !gold.text) return 0.0;
    return normalize_answer(*predicted.text) == normalize_answer(*gold.text) ? 1.0 : 0.0;
  }
  if (!predicted.box || !gold.box) return 0.0;
  return iou(*predicted.box, *gold.box);
}

bool answer_related(double m, TaskKind task) {
  return task == TaskKind::vqa ? m == 1.0 : m > 0.0;
}

std::string answer_text(const Answer& a) {
  if (a.box) {
    return fmt::format("{},{},{},{}", format_number(a.box->x1), format_number(a.box->y1),
                       format_number(a.box->x2), format_number(a.box->y2));
  }
  return a.text.value_or("");
}

}  // namespace hydra
