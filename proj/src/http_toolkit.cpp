#include "hydra/perception.hpp"

#include <fmt/format.h>

#include "hydra/error.hpp"
#include "hydra/http.hpp"

namespace hydra {

namespace {

constexpr int kWireVersion = 1;

nlohmann::json box_json(const BoundingBox& b) { return {b.x1, b.y1, b.x2, b.y2}; }

BoundingBox box_value(const nlohmann::json& j, const std::string& skill) {
  if (!j.is_array() || j.size() != 4) {
    throw ToolkitProtocolError(skill + ": expected [x1,y1,x2,y2], got " + j.dump());
  }
  for (const auto& x : j) {
    if (!x.is_number()) throw ToolkitProtocolError(skill + ": non-numeric box coordinate");
  }
  BoundingBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!b.valid()) throw ToolkitProtocolError(skill + ": unordered box " + format_box(b));
  return b;
}

template <typename T>
T typed(const nlohmann::json& v, const std::string& skill, bool ok) {
  if (!ok) throw ToolkitProtocolError(fmt::format("{}: unexpected value {}", skill, v.dump()));
  return v.get<T>();
}

}  // namespace

nlohmann::json http_toolkit_call(const ToolkitEndpointConfig& config, const std::string& skill,
                                 const std::string& image_ref, const nlohmann::json& args) {
  const auto it = config.skill_urls.find(skill);
  const std::string& url = it != config.skill_urls.end() ? it->second : config.url;
  if (url.empty()) throw ToolkitUnavailable("no endpoint configured for skill " + skill);

  nlohmann::ordered_json body;
  body["format_version"] = kWireVersion;
  body["skill"] = skill;
  body["image"] = image_ref;
  body["args"] = args;

  http::Response resp;
  try {
    resp = http::post_json(url, body.dump(), {}, config.timeout);
  } catch (const BackendUnavailable& e) {
    throw ToolkitUnavailable(fmt::format("{}: {}", skill, e.what()));
  }
  if (resp.status < 200 || resp.status >= 300) {
    throw ToolkitUnavailable(fmt::format("{}: HTTP {}", skill, resp.status));
  }
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(resp.body);
  } catch (const nlohmann::json::exception&) {
    throw ToolkitProtocolError(skill + ": response is not JSON");
  }
  if (!reply.is_object() || !reply.contains("ok") || !reply["ok"].is_boolean()) {
    throw ToolkitProtocolError(skill + ": response lacks a boolean 'ok'");
  }
  if (!reply["ok"].get<bool>()) {
    throw ToolkitProtocolError(fmt::format("{}: server reported failure {}", skill,
                                           reply.value("error", nlohmann::json()).dump()));
  }
  if (!reply.contains("value")) throw ToolkitProtocolError(skill + ": response lacks 'value'");
  return reply["value"];
}

HttpToolkit::HttpToolkit(ToolkitEndpointConfig config) : config_(std::move(config)) {
  if (config_.max_connections < 1) throw ConfigError("toolkit max_connections must be positive");
  slots_ = std::make_unique<std::counting_semaphore<>>(config_.max_connections);
}

nlohmann::json HttpToolkit::call(const std::string& skill, const std::string& image,
                                 nlohmann::json args) {
  slots_->acquire();
  struct Release {
    std::counting_semaphore<>* s;
    ~Release() { s->release(); }
  } release{slots_.get()};
  return http_toolkit_call(config_, skill, image, args);
}

Patch HttpToolkit::root(const std::string& image_ref) {
  const auto v = call("image_size", image_ref, nlohmann::json::object());
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ToolkitProtocolError("image_size: expected [width, height]");
  }
  return Patch{image_ref, BoundingBox{0, 0, v[0].get<double>(), v[1].get<double>()}, kRootPatchName};
}

PatchList HttpToolkit::find(const Patch& patch, const std::string& name) {
  const auto v = call("find", patch.image, {{"box", box_json(patch.box)}, {"name", name}});
  if (!v.is_array()) throw ToolkitProtocolError("find: expected a list of boxes");
  PatchList out;
  for (const auto& b : v) {
    out.push_back(Patch{patch.image, box_value(b, "find"), fmt::format("{}_{}", name, out.size() + 1)});
  }
  return out;
}

bool HttpToolkit::exists(const Patch& patch, const std::string& name) {
  const auto v = call("exists", patch.image, {{"box", box_json(patch.box)}, {"name", name}});
  return typed<bool>(v, "exists", v.is_boolean());
}

bool HttpToolkit::verify_property(const Patch& patch, const std::string& name,
                                  const std::string& attribute) {
  const auto v = call("verify_property", patch.image,
                      {{"box", box_json(patch.box)}, {"name", name}, {"attribute", attribute}});
  return typed<bool>(v, "verify_property", v.is_boolean());
}

std::string HttpToolkit::caption(const Patch& patch) {
  const auto v = call("caption", patch.image, {{"box", box_json(patch.box)}});
  return typed<std::string>(v, "caption", v.is_string());
}

std::string HttpToolkit::simple_query(const Patch& patch, const std::string& question) {
  const auto v =
      call("simple_query", patch.image, {{"box", box_json(patch.box)}, {"question", question}});
  return typed<std::string>(v, "simple_query", v.is_string());
}

double HttpToolkit::compute_depth(const Patch& patch) {
  const auto v = call("compute_depth", patch.image, {{"box", box_json(patch.box)}});
  return typed<double>(v, "compute_depth", v.is_number());
}

std::string HttpToolkit::llm_query(const std::string& question, const std::string& context) {
  const auto v = call("llm_query", "", {{"question", question}, {"context", context}});
  return typed<std::string>(v, "llm_query", v.is_string());
}

}  // namespace hydra
