#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <semaphore>
#include <string>

#include <json.hpp>

#include "hydra/runtime.hpp"
#include "hydra/types.hpp"

namespace hydra {

/// Intersection over union; 0 when the union has no area.
double iou(const BoundingBox& a, const BoundingBox& b);

struct SceneObject {
  std::string name;
  BoundingBox box;
  std::map<std::string, std::string> attributes;
  double depth = 0.0;  // larger is farther
  std::map<std::string, std::string> qa;  // questions about this object, normalised keys
};

struct Scene {
  std::string id;
  double width = 0, height = 0;
  std::vector<SceneObject> objects;
  std::string caption;
  std::map<std::string, std::string> qa;  // normalised question -> answer

  [[nodiscard]] BoundingBox bounds() const { return {0, 0, width, height}; }
};

/// Lowercase, trim, collapse internal whitespace.
std::string normalize_question(std::string_view text);

/// Throws ConfigError on missing fields, empty names or boxes outside the image.
Scene scene_from_json(const nlohmann::json& doc);
nlohmann::ordered_json scene_to_json(const Scene& scene);
Scene load_scene(const std::filesystem::path& path);

class PerceptionToolkit {
 public:
  virtual ~PerceptionToolkit() = default;

  /// Whole-image patch named image_patch.
  virtual Patch root(const std::string& image_ref) = 0;
  virtual PatchList find(const Patch& patch, const std::string& name) = 0;
  virtual bool exists(const Patch& patch, const std::string& name) = 0;
  virtual bool verify_property(const Patch& patch, const std::string& name,
                               const std::string& attribute) = 0;
  virtual std::string caption(const Patch& patch) = 0;
  virtual std::string simple_query(const Patch& patch, const std::string& question) = 0;
  virtual double compute_depth(const Patch& patch) = 0;
  virtual std::string llm_query(const std::string& question, const std::string& context) = 0;

  /// Sub-patch clipped to the parent. Throws ToolkitProtocolError when the
  /// result would be empty or the box is invalid.
  virtual Patch crop(const Patch& patch, const BoundingBox& box);
};

/// Ground-truth toolkit over in-memory scenes, keyed by image reference.
/// Immutable after construction, so concurrent calls are safe.
class MockToolkit final : public PerceptionToolkit {
 public:
  MockToolkit() = default;
  explicit MockToolkit(std::vector<Scene> scenes);

  /// Loads every *.json scene in a directory (or a single file).
  static MockToolkit from_path(const std::filesystem::path& path);

  Patch root(const std::string& image_ref) override;
  PatchList find(const Patch& patch, const std::string& name) override;
  bool exists(const Patch& patch, const std::string& name) override;
  bool verify_property(const Patch& patch, const std::string& name,
                       const std::string& attribute) override;
  std::string caption(const Patch& patch) override;
  std::string simple_query(const Patch& patch, const std::string& question) override;
  double compute_depth(const Patch& patch) override;
  std::string llm_query(const std::string& question, const std::string& context) override;

  [[nodiscard]] const Scene& scene(const std::string& image_ref) const;
  [[nodiscard]] bool has_scene(const std::string& image_ref) const;
  /// Stable hash of all scene content.
  [[nodiscard]] std::uint64_t state_hash() const;

 private:
  std::vector<const SceneObject*> contained(const Scene& scene, const Patch& patch) const;

  std::map<std::string, Scene> scenes_;
};

/// The key MockToolkit uses for llm_query lookups in Scene::qa.
std::string llm_query_key(std::string_view question, std::string_view context);

struct ToolkitEndpointConfig {
  std::string url;                                  // default endpoint for every skill
  std::map<std::string, std::string> skill_urls;    // per-skill overrides
  std::chrono::milliseconds timeout{30000};
  int max_connections = 4;
};

/// One request to a model server: POST {format_version, skill, image, args},
/// response {ok, value}. Value shapes: find -> [[x1,y1,x2,y2], ...],
/// exists/verify_property -> bool, caption/simple_query/llm_query -> string,
/// compute_depth -> number, image_size -> [width, height].
/// Transport failures and non-2xx map to ToolkitUnavailable, malformed
/// replies (or ok = false) to ToolkitProtocolError.
nlohmann::json http_toolkit_call(const ToolkitEndpointConfig& config, const std::string& skill,
                                 const std::string& image_ref, const nlohmann::json& args);

class HttpToolkit final : public PerceptionToolkit {
 public:
  explicit HttpToolkit(ToolkitEndpointConfig config);

  Patch root(const std::string& image_ref) override;
  PatchList find(const Patch& patch, const std::string& name) override;
  bool exists(const Patch& patch, const std::string& name) override;
  bool verify_property(const Patch& patch, const std::string& name,
                       const std::string& attribute) override;
  std::string caption(const Patch& patch) override;
  std::string simple_query(const Patch& patch, const std::string& question) override;
  double compute_depth(const Patch& patch) override;
  std::string llm_query(const std::string& question, const std::string& context) override;

 private:
  nlohmann::json call(const std::string& skill, const std::string& image, nlohmann::json args);

  ToolkitEndpointConfig config_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
};

}  // namespace hydra
