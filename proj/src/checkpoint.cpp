#include "vbllbo/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace vbllbo {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json to_json(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Matrix matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw std::runtime_error("checkpoint: matrix payload size mismatch");
  }
  Matrix m(rows, cols);
  std::size_t idx = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[idx++].get<double>();
  return m;
}

Vector vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json checkpoint_to_json(const SurrogateModel& model, std::uint64_t config_hash) {
  json layers = json::array();
  for (std::size_t l = 0; l < model.backbone.num_layers(); ++l) {
    layers.push_back({{"weight", to_json(model.backbone.weights[l])}, {"bias", to_json(model.backbone.biases[l])}});
  }
  json posteriors = json::array();
  for (const auto& post : model.head.posteriors) {
    posteriors.push_back({{"mean", to_json(post.mean)},
                          {"precision_chol", to_json(post.precision_chol.matrix())},
                          {"natural_mean", to_json(post.natural_mean)}});
  }
  return {
      {"format", "vbllbo-checkpoint"},
      {"version", kFormatVersion},
      {"config_hash", config_hash},
      {"layer_dims", model.backbone.layer_dims},
      {"layers", layers},
      {"head",
       {{"posteriors", posteriors},
        {"prior_scale", model.head.prior.scale},
        {"log_sigma2", to_json(model.head.noise.log_sigma2)},
        {"wishart_scale", model.head.noise.wishart_scale},
        {"dof", model.head.noise.dof}}},
      {"standardizer", {{"mean", to_json(model.standardizer.mean)}, {"scale", to_json(model.standardizer.scale)}}},
      {"bounds", {{"lower", to_json(model.bounds.lower)}, {"upper", to_json(model.bounds.upper)}}},
      {"fit_seconds", model.fit_seconds},
  };
}

SurrogateModel checkpoint_from_json(const json& j, std::uint64_t* config_hash) {
  if (j.value("format", "") != "vbllbo-checkpoint" || j.value("version", 0) != kFormatVersion) {
    throw std::runtime_error("checkpoint: unrecognized format");
  }
  SurrogateModel model;
  model.backbone.layer_dims = j.at("layer_dims").get<std::vector<int>>();
  for (const auto& layer : j.at("layers")) {
    model.backbone.weights.push_back(matrix_from(layer.at("weight")));
    model.backbone.biases.push_back(vector_from(layer.at("bias")));
  }
  if (model.backbone.weights.size() + 1 != model.backbone.layer_dims.size()) {
    throw std::runtime_error("checkpoint: layer count does not match layer_dims");
  }
  for (std::size_t l = 0; l < model.backbone.num_layers(); ++l) {
    if (model.backbone.weights[l].rows() != model.backbone.layer_dims[l + 1] ||
        model.backbone.weights[l].cols() != model.backbone.layer_dims[l] ||
        model.backbone.biases[l].size() != model.backbone.layer_dims[l + 1]) {
      throw std::runtime_error("checkpoint: layer shape does not match layer_dims");
    }
  }
  const auto& head = j.at("head");
  model.head.prior.scale = head.at("prior_scale").get<double>();
  model.head.noise.log_sigma2 = vector_from(head.at("log_sigma2"));
  model.head.noise.wishart_scale = head.at("wishart_scale").get<double>();
  model.head.noise.dof = head.at("dof").get<double>();
  for (const auto& post : head.at("posteriors")) {
    VariationalPosterior p;
    p.mean = vector_from(post.at("mean"));
    p.precision_chol = LowerTriangular(matrix_from(post.at("precision_chol")));
    p.natural_mean = vector_from(post.at("natural_mean"));
    model.head.posteriors.push_back(std::move(p));
  }
  model.standardizer.mean = vector_from(j.at("standardizer").at("mean"));
  model.standardizer.scale = vector_from(j.at("standardizer").at("scale"));
  model.bounds.lower = vector_from(j.at("bounds").at("lower"));
  model.bounds.upper = vector_from(j.at("bounds").at("upper"));
  model.fit_seconds = j.value("fit_seconds", 0.0);
  if (config_hash) *config_hash = j.at("config_hash").get<std::uint64_t>();
  return model;
}

void save_checkpoint(const std::string& path, const SurrogateModel& model, std::uint64_t config_hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << checkpoint_to_json(model, config_hash).dump();
}

SurrogateModel load_checkpoint(const std::string& path, std::uint64_t* config_hash) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  return checkpoint_from_json(json::parse(in), config_hash);
}

}  // namespace vbllbo
