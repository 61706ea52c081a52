#include "hydra/runtime.hpp"

#include <fmt/format.h>

namespace hydra {

std::string describe(const RuntimeValue& value) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Patch>) {
          return fmt::format("{} {}", v.name, format_box(v.box));
        } else if constexpr (std::is_same_v<T, PatchList>) {
          std::string out = "[";
          for (std::size_t i = 0; i < v.size(); ++i) {
            if (i > 0) out += ", ";
            out += v[i].name;
          }
          return out + "]";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return v;
        } else if constexpr (std::is_same_v<T, bool>) {
          return v ? "True" : "False";
        } else {
          return format_number(v);
        }
      },
      value);
}

std::string_view type_name(const RuntimeValue& value) {
  static constexpr std::string_view names[] = {"patch", "patch list", "text", "number", "boolean"};
  return names[value.index()];
}

}  // namespace hydra
