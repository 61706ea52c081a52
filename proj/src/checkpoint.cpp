#include "hydra/checkpoint.hpp"

#include <fstream>

#include <fmt/format.h>

#include "hydra/error.hpp"

namespace hydra {

namespace {

constexpr int kFormatVersion = 1;

nlohmann::ordered_json matrix_rows(const QNet::Matrix& m) {
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::ordered_json vector_values(const QNet::Vector& v) {
  auto out = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

[[noreturn]] void incompatible(const std::string& why) {
  throw ConfigError("checkpoint incompatible: " + why);
}

void read_matrix(const nlohmann::json& rows, QNet::Matrix& m, const char* name) {
  if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != m.rows()) {
    incompatible(fmt::format("{} should have {} rows", name, m.rows()));
  }
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m.cols()) {
      incompatible(fmt::format("{} row {} should have {} columns", name, r, m.cols()));
    }
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const auto& x = row[static_cast<std::size_t>(c)];
      if (!x.is_number()) incompatible(fmt::format("{} holds a non-number", name));
      m(r, c) = x.get<double>();
    }
  }
}

void read_vector(const nlohmann::json& values, QNet::Vector& v, const char* name) {
  if (!values.is_array() || static_cast<Eigen::Index>(values.size()) != v.size()) {
    incompatible(fmt::format("{} should have {} entries", name, v.size()));
  }
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto& x = values[static_cast<std::size_t>(i)];
    if (!x.is_number()) incompatible(fmt::format("{} holds a non-number", name));
    v[i] = x.get<double>();
  }
}

}  // namespace

nlohmann::ordered_json checkpoint_to_json(const Checkpoint& ckpt) {
  const QNet& net = ckpt.net;
  if (!net.all_finite()) throw StateCorruption("refusing to save non-finite weights");
  nlohmann::ordered_json doc;
  doc["format_version"] = kFormatVersion;
  doc["layer_dims"] = {net.input_dim(), net.hidden_dim(), net.output_dim()};
  doc["n_samples"] = ckpt.n_samples;
  doc["seed"] = ckpt.seed;
  doc["weights"] = {matrix_rows(net.w1()), matrix_rows(net.w2())};
  doc["biases"] = {vector_values(net.b1()), vector_values(net.b2())};
  return doc;
}

Checkpoint checkpoint_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) incompatible("not a JSON object");
  if (doc.value("format_version", -1) != kFormatVersion) incompatible("unknown format_version");
  const auto dims = doc.value("layer_dims", nlohmann::json::array());
  const int n = doc.value("n_samples", -1);
  if (n < 1) incompatible("n_samples missing");
  const std::vector<long> expected = {kEmbeddingDim, kHiddenDim, n + 1};
  if (!dims.is_array() || dims.size() != 3) incompatible("layer_dims must have three entries");
  for (std::size_t i = 0; i < 3; ++i) {
    if (!dims[i].is_number_integer() || dims[i].get<long>() != expected[i]) {
      incompatible(fmt::format("layer_dims {} != [{}, {}, {}]", dims.dump(), expected[0],
                               expected[1], expected[2]));
    }
  }
  const auto& w = doc.at("weights");
  const auto& b = doc.at("biases");
  if (!w.is_array() || w.size() != 2 || !b.is_array() || b.size() != 2) {
    incompatible("weights and biases must hold two layers");
  }
  Checkpoint ckpt{QNet(kEmbeddingDim, kHiddenDim, n + 1), n, doc.value("seed", std::uint64_t{0})};
  read_matrix(w[0], ckpt.net.w1(), "W1");
  read_matrix(w[1], ckpt.net.w2(), "W2");
  read_vector(b[0], ckpt.net.b1(), "b1");
  read_vector(b[1], ckpt.net.b2(), "b2");
  if (!ckpt.net.all_finite()) incompatible("non-finite parameters");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string text = checkpoint_to_json(ckpt).dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << text << '\n';
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("checkpoint {} is not valid JSON: {}", path.string(), e.what()));
  }
  try {
    return checkpoint_from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    incompatible(e.what());
  }
}

}  // namespace hydra
