#pragma once

#include <string>
#include <variant>
#include <vector>

#include "hydra/types.hpp"

namespace hydra {

/// A region of one image. `name` is the display name used in feedback
/// ("girl_1", or "image_patch" for the whole image).
struct Patch {
  std::string image;
  BoundingBox box;
  std::string name;

  bool operator==(const Patch&) const = default;
};

using PatchList = std::vector<Patch>;

using RuntimeValue = std::variant<Patch, PatchList, std::string, double, bool>;

inline constexpr const char* kRootPatchName = "image_patch";

/// Human-readable value for feedback and variable details: patches print
/// their name and box, lists print "[a, b]", booleans "True"/"False".
std::string describe(const RuntimeValue& value);

std::string_view type_name(const RuntimeValue& value);

}  // namespace hydra
