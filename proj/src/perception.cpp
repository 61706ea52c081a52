#include "hydra/perception.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "hydra/error.hpp"
#include "hydra/random.hpp"

namespace hydra {

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::string normalize_question(std::string_view text) {
  std::string out;
  bool space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::string llm_query_key(std::string_view question, std::string_view context) {
  return normalize_question(fmt::format("{} context: {}", question, context));
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

BoundingBox box_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 4) throw ConfigError(what + ": box must be [x1,y1,x2,y2]");
  for (const auto& x : j) {
    if (!x.is_number()) throw ConfigError(what + ": box coordinates must be numbers");
  }
  BoundingBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!b.valid()) throw ConfigError(what + ": box is not ordered " + format_box(b));
  return b;
}

std::map<std::string, std::string> qa_from_json(const nlohmann::json& j, const std::string& what) {
  std::map<std::string, std::string> out;
  if (j.is_null()) return out;
  if (!j.is_object()) throw ConfigError(what + ": qa must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) throw ConfigError(what + ": qa answers must be strings");
    out[normalize_question(k)] = v.get<std::string>();
  }
  return out;
}

std::string require_scene_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw ConfigError(fmt::format("scene field '{}' must be a string", key));
  }
  return j[key].get<std::string>();
}

}  // namespace

Scene scene_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("scene must be a JSON object");
  Scene s;
  s.id = require_scene_string(doc, "id");
  if (!doc.contains("width") || !doc["width"].is_number() || !doc.contains("height") ||
      !doc["height"].is_number()) {
    throw ConfigError("scene " + s.id + ": width and height are required numbers");
  }
  s.width = doc["width"].get<double>();
  s.height = doc["height"].get<double>();
  if (!(s.width > 0 && s.height > 0)) throw ConfigError("scene " + s.id + ": empty image");
  s.caption = doc.value("caption", std::string());
  s.qa = qa_from_json(doc.value("qa", nlohmann::json()), "scene " + s.id);
  const BoundingBox bounds = s.bounds();
  for (const auto& o : doc.value("objects", nlohmann::json::array())) {
    SceneObject obj;
    obj.name = o.value("name", std::string());
    const std::string what = fmt::format("scene {} object '{}'", s.id, obj.name);
    if (obj.name.empty()) throw ConfigError(fmt::format("scene {}: object without a name", s.id));
    obj.box = box_from_json(o.value("box", nlohmann::json()), what);
    if (obj.box.x1 < bounds.x1 || obj.box.y1 < bounds.y1 || obj.box.x2 > bounds.x2 ||
        obj.box.y2 > bounds.y2) {
      throw ConfigError(what + ": box " + format_box(obj.box) + " outside the image");
    }
    const auto attributes = o.value("attributes", nlohmann::json::object());
    for (const auto& [k, v] : attributes.items()) {
      if (!v.is_string()) throw ConfigError(what + ": attribute values must be strings");
      obj.attributes[k] = v.get<std::string>();
    }
    obj.depth = o.value("depth", 0.0);
    obj.qa = qa_from_json(o.value("qa", nlohmann::json()), what);
    s.objects.push_back(std::move(obj));
  }
  return s;
}

nlohmann::ordered_json scene_to_json(const Scene& scene) {
  nlohmann::ordered_json doc;
  doc["id"] = scene.id;
  doc["width"] = scene.width;
  doc["height"] = scene.height;
  doc["caption"] = scene.caption;
  doc["qa"] = scene.qa;
  auto objects = nlohmann::ordered_json::array();
  for (const auto& o : scene.objects) {
    nlohmann::ordered_json j;
    j["name"] = o.name;
    j["box"] = {o.box.x1, o.box.y1, o.box.x2, o.box.y2};
    j["attributes"] = o.attributes;
    j["depth"] = o.depth;
    if (!o.qa.empty()) j["qa"] = o.qa;
    objects.push_back(std::move(j));
  }
  doc["objects"] = std::move(objects);
  return doc;
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scene " + path.string());
  try {
    return scene_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("scene {}: {}", path.string(), e.what()));
  }
}

Patch PerceptionToolkit::crop(const Patch& patch, const BoundingBox& box) {
  if (!box.valid()) throw ToolkitProtocolError("crop box is not ordered: " + format_box(box));
  BoundingBox clipped{std::max(box.x1, patch.box.x1), std::max(box.y1, patch.box.y1),
                      std::min(box.x2, patch.box.x2), std::min(box.y2, patch.box.y2)};
  if (!(clipped.x2 > clipped.x1 && clipped.y2 > clipped.y1)) {
    throw ToolkitProtocolError("crop " + format_box(box) + " lies outside " + patch.name);
  }
  return Patch{patch.image, clipped, patch.name + "_crop"};
}

MockToolkit::MockToolkit(std::vector<Scene> scenes) {
  for (auto& s : scenes) {
    const std::string id = s.id;
    if (!scenes_.emplace(id, std::move(s)).second) throw ConfigError("duplicate scene id " + id);
  }
}

MockToolkit MockToolkit::from_path(const std::filesystem::path& path) {
  std::vector<Scene> scenes;
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) scenes.push_back(load_scene(f));
  } else {
    scenes.push_back(load_scene(path));
  }
  return MockToolkit(std::move(scenes));
}

const Scene& MockToolkit::scene(const std::string& image_ref) const {
  const auto it = scenes_.find(image_ref);
  if (it == scenes_.end()) throw ToolkitUnavailable("no scene for image '" + image_ref + "'");
  return it->second;
}

bool MockToolkit::has_scene(const std::string& image_ref) const {
  return scenes_.count(image_ref) != 0;
}

std::uint64_t MockToolkit::state_hash() const {
  std::uint64_t h = 0;
  for (const auto& [id, s] : scenes_) h = mix_seed(h, fnv1a(scene_to_json(s).dump()));
  return h;
}

std::vector<const SceneObject*> MockToolkit::contained(const Scene& scene, const Patch& patch) const {
  std::vector<const SceneObject*> out;
  for (const auto& o : scene.objects) {
    if (patch.box.contains_point(o.box.center_x(), o.box.center_y())) out.push_back(&o);
  }
  return out;
}

Patch MockToolkit::root(const std::string& image_ref) {
  return Patch{image_ref, scene(image_ref).bounds(), kRootPatchName};
}

PatchList MockToolkit::find(const Patch& patch, const std::string& name) {
  const Scene& s = scene(patch.image);
  const std::string wanted = lower(name);
  std::vector<const SceneObject*> hits;
  for (const auto* o : contained(s, patch)) {
    if (lower(o->name) == wanted) hits.push_back(o);
  }
  std::stable_sort(hits.begin(), hits.end(), [](const SceneObject* a, const SceneObject* b) {
    if (a->box.x1 != b->box.x1) return a->box.x1 < b->box.x1;
    return a->box.y1 < b->box.y1;
  });
  PatchList out;
  for (std::size_t k = 0; k < hits.size(); ++k) {
    out.push_back(Patch{patch.image, hits[k]->box, fmt::format("{}_{}", name, k + 1)});
  }
  return out;
}

bool MockToolkit::exists(const Patch& patch, const std::string& name) {
  return !find(patch, name).empty();
}

bool MockToolkit::verify_property(const Patch& patch, const std::string& name,
                                  const std::string& attribute) {
  const Scene& s = scene(patch.image);
  const std::string wanted = lower(name);
  const std::string attr = lower(attribute);
  for (const auto* o : contained(s, patch)) {
    if (lower(o->name) != wanted) continue;
    for (const auto& [k, v] : o->attributes) {
      if (lower(k) == attr || lower(v) == attr) return true;
    }
  }
  return false;
}

std::string MockToolkit::caption(const Patch& patch) {
  const Scene& s = scene(patch.image);
  if (patch.box == s.bounds() && !s.caption.empty()) return s.caption;
  std::string out;
  for (const auto* o : contained(s, patch)) {
    std::string part;
    for (const auto& [k, v] : o->attributes) part += v + " ";
    part += o->name;
    if (!out.empty()) out += ", ";
    out += part;
  }
  return out.empty() ? "an empty region" : out;
}

std::string MockToolkit::simple_query(const Patch& patch, const std::string& question) {
  const Scene& s = scene(patch.image);
  const std::string key = normalize_question(question);
  const auto objs = contained(s, patch);
  for (const auto* o : objs) {
    if (o->box == patch.box) {
      if (auto it = o->qa.find(key); it != o->qa.end()) return it->second;
    }
  }
  for (const auto* o : objs) {
    if (auto it = o->qa.find(key); it != o->qa.end()) return it->second;
  }
  if (auto it = s.qa.find(key); it != s.qa.end()) return it->second;
  return "unknown";
}

double MockToolkit::compute_depth(const Patch& patch) {
  const Scene& s = scene(patch.image);
  std::vector<double> depths;
  for (const auto* o : contained(s, patch)) depths.push_back(o->depth);
  if (depths.empty()) return 0.0;
  std::sort(depths.begin(), depths.end());
  const std::size_t n = depths.size();
  return n % 2 == 1 ? depths[n / 2] : 0.5 * (depths[n / 2 - 1] + depths[n / 2]);
}

std::string MockToolkit::llm_query(const std::string& question, const std::string& context) {
  const std::string key = llm_query_key(question, context);
  for (const auto& [id, s] : scenes_) {
    if (auto it = s.qa.find(key); it != s.qa.end()) return it->second;
  }
  return "unknown";
}

}  // namespace hydra
