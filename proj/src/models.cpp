#include "patchstart/models.hpp"

#include <json.hpp>

#include "patchstart/errors.hpp"
#include "patchstart/fsutil.hpp"

namespace patchstart {

using json = nlohmann::json;

namespace {

void require_input(const Shape& expected, const Image& img) {
  if (img.shape() != expected) {
    throw InvalidArgument("image shape " + img.shape().str() + " does not match model input " +
                          expected.str());
  }
}

void require_class(std::size_t num_classes, Label c) {
  if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
    throw InvalidArgument("class " + std::to_string(c) + " out of range [0, " +
                          std::to_string(num_classes) + ")");
  }
}

// Forward pass keeping pre-activations for the backward sweep.
std::vector<std::vector<double>> forward_trace(const MlpModel& model, const Image& img) {
  std::vector<std::vector<double>> pre;
  pre.reserve(model.layers.size());
  std::vector<double> act(img.data().begin(), img.data().end());
  for (const auto& layer : model.layers) {
    std::vector<double> z(layer.rows);
    for (std::size_t r = 0; r < layer.rows; ++r) {
      double acc = layer.bias[r];
      const double* w = layer.weights.data() + r * layer.cols;
      for (std::size_t k = 0; k < layer.cols; ++k) acc += w[k] * act[k];
      z[r] = acc;
    }
    act = z;
    if (layer.activation == Activation::relu) {
      for (double& v : act) v = v > 0.0 ? v : 0.0;
    }
    pre.push_back(std::move(z));
  }
  return pre;
}

// --- JSON ----------------------------------------------------------------

const json& field(const json& j, const char* name, const std::string& where) {
  if (!j.is_object() || !j.contains(name)) {
    throw FormatError("missing field '" + where + name + "'");
  }
  return j.at(name);
}

std::size_t as_count(const json& j, const std::string& name) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    throw FormatError("field '" + name + "' must be a nonnegative integer");
  }
  return j.get<std::size_t>();
}

std::vector<double> as_reals(const json& j, const std::string& name) {
  if (!j.is_array()) throw FormatError("field '" + name + "' must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw FormatError("field '" + name + "' must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

Shape parse_shape(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw FormatError("field 'input_shape' must be [H, W, C]");
  }
  return Shape{as_count(j[0], "input_shape[0]"), as_count(j[1], "input_shape[1]"),
               as_count(j[2], "input_shape[2]")};
}

json shape_json(const Shape& s) { return json::array({s.height, s.width, s.channels}); }

}  // namespace

double centroid_score(const CentroidModel& model, const Image& img, Label c) {
  require_class(model.num_classes(), c);
  require_input(model.input_shape, img);
  const auto x = img.data();
  const auto mu = model.centroids[static_cast<std::size_t>(c)].data();
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mu[i];
    acc += d * d;
  }
  return -acc;
}

Image centroid_gradient(const CentroidModel& model, const Image& img, Label c) {
  require_class(model.num_classes(), c);
  require_input(model.input_shape, img);
  Image g(img.shape());
  const auto x = img.data();
  const auto mu = model.centroids[static_cast<std::size_t>(c)].data();
  auto out = g.data();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = -2.0 * (x[i] - mu[i]);
  return g;
}

std::vector<double> mlp_forward(const MlpModel& model, const Image& img) {
  if (model.layers.empty()) throw InvalidArgument("mlp has no layers");
  if (img.size() != model.layers.front().cols) {
    throw InvalidArgument("flattened input length " + std::to_string(img.size()) +
                          " does not match first layer width " +
                          std::to_string(model.layers.front().cols));
  }
  auto pre = forward_trace(model, img);
  std::vector<double> out = std::move(pre.back());
  if (model.layers.back().activation == Activation::relu) {
    for (double& v : out) v = v > 0.0 ? v : 0.0;
  }
  return out;
}

Image mlp_gradient(const MlpModel& model, const Image& img, Label c) {
  if (model.layers.empty()) throw InvalidArgument("mlp has no layers");
  if (img.size() != model.layers.front().cols) {
    throw InvalidArgument("flattened input length does not match first layer width");
  }
  require_class(model.num_classes(), c);
  const auto pre = forward_trace(model, img);

  std::vector<double> upstream(model.layers.back().rows, 0.0);
  upstream[static_cast<std::size_t>(c)] = 1.0;
  for (std::size_t li = model.layers.size(); li-- > 0;) {
    const auto& layer = model.layers[li];
    if (layer.activation == Activation::relu) {
      for (std::size_t r = 0; r < layer.rows; ++r) {
        if (!(pre[li][r] > 0.0)) upstream[r] = 0.0;
      }
    }
    std::vector<double> down(layer.cols, 0.0);
    for (std::size_t r = 0; r < layer.rows; ++r) {
      const double u = upstream[r];
      if (u == 0.0) continue;
      const double* w = layer.weights.data() + r * layer.cols;
      for (std::size_t k = 0; k < layer.cols; ++k) down[k] += u * w[k];
    }
    upstream = std::move(down);
  }
  return Image(img.shape(), std::move(upstream));
}

void validate(const CentroidModel& model) {
  if (model.centroids.empty()) throw ValidationError("centroid model has no classes");
  if (model.input_shape.size() == 0) throw ValidationError("input_shape must be positive");
  for (std::size_t k = 0; k < model.centroids.size(); ++k) {
    if (model.centroids[k].shape() != model.input_shape) {
      throw ValidationError("centroids[" + std::to_string(k) + "] has " +
                            std::to_string(model.centroids[k].size()) + " values, expected " +
                            std::to_string(model.input_shape.size()));
    }
  }
}

void validate(const MlpModel& model) {
  if (model.layers.empty()) throw ValidationError("mlp model has no layers");
  if (model.input_shape.size() == 0) throw ValidationError("input_shape must be positive");
  std::size_t width = model.input_shape.size();
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.layers[i];
    const std::string where = "layers[" + std::to_string(i) + "]";
    if (l.cols != width) {
      throw ValidationError(where + ".cols = " + std::to_string(l.cols) + " but previous width is " +
                            std::to_string(width));
    }
    if (l.rows == 0) throw ValidationError(where + ".rows must be positive");
    if (l.weights.size() != l.rows * l.cols) {
      throw ValidationError(where + ".weights has " + std::to_string(l.weights.size()) +
                            " values, expected rows*cols = " + std::to_string(l.rows * l.cols));
    }
    if (l.bias.size() != l.rows) {
      throw ValidationError(where + ".bias has " + std::to_string(l.bias.size()) +
                            " values, expected " + std::to_string(l.rows));
    }
    width = l.rows;
  }
}

Model::Model(CentroidModel m) : impl_(std::move(m)) { validate(std::get<CentroidModel>(impl_)); }

Model::Model(MlpModel m) : impl_(std::move(m)) { validate(std::get<MlpModel>(impl_)); }

const Shape& Model::input_shape() const {
  return std::visit([](const auto& m) -> const Shape& { return m.input_shape; }, impl_);
}

std::size_t Model::num_classes() const {
  return std::visit([](const auto& m) { return m.num_classes(); }, impl_);
}

std::vector<double> Model::scores(const Image& img) const {
  if (const auto* cm = as_centroid()) {
    require_input(cm->input_shape, img);
    std::vector<double> s(cm->num_classes());
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = centroid_score(*cm, img, static_cast<Label>(k));
    return s;
  }
  const auto& mm = std::get<MlpModel>(impl_);
  require_input(mm.input_shape, img);
  return mlp_forward(mm, img);
}

Image Model::gradient(const Image& img, Label c) const {
  if (const auto* cm = as_centroid()) return centroid_gradient(*cm, img, c);
  const auto& mm = std::get<MlpModel>(impl_);
  require_input(mm.input_shape, img);
  return mlp_gradient(mm, img, c);
}

Label Model::classify(const Image& img) const {
  const auto s = scores(img);
  std::size_t best = 0;
  for (std::size_t k = 1; k < s.size(); ++k) {
    if (s[k] > s[best]) best = k;
  }
  return static_cast<Label>(best);
}

Model parse_model(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("model file is not valid JSON: ") + e.what());
  }
  const auto& kind_j = field(doc, "kind", "");
  if (!kind_j.is_string()) throw FormatError("field 'kind' must be a string");
  const std::string kind = kind_j.get<std::string>();
  const Shape shape = parse_shape(field(doc, "input_shape", ""));
  const std::size_t num_classes = as_count(field(doc, "num_classes", ""), "num_classes");

  if (kind == "centroid") {
    const auto& cs = field(doc, "centroids", "");
    if (!cs.is_array()) throw FormatError("field 'centroids' must be an array");
    CentroidModel m;
    m.input_shape = shape;
    for (std::size_t k = 0; k < cs.size(); ++k) {
      const std::string name = "centroids[" + std::to_string(k) + "]";
      auto values = as_reals(cs[k], name);
      if (values.size() != shape.size()) {
        throw ValidationError(name + " has " + std::to_string(values.size()) +
                              " values, expected " + std::to_string(shape.size()));
      }
      m.centroids.emplace_back(shape, std::move(values));
    }
    if (m.num_classes() != num_classes) {
      throw ValidationError("num_classes = " + std::to_string(num_classes) + " but " +
                            std::to_string(m.num_classes()) + " centroids given");
    }
    return Model(std::move(m));
  }
  if (kind == "mlp") {
    const auto& ls = field(doc, "layers", "");
    if (!ls.is_array()) throw FormatError("field 'layers' must be an array");
    MlpModel m;
    m.input_shape = shape;
    for (std::size_t i = 0; i < ls.size(); ++i) {
      const std::string where = "layers[" + std::to_string(i) + "].";
      DenseLayer layer;
      layer.rows = as_count(field(ls[i], "rows", where), where + "rows");
      layer.cols = as_count(field(ls[i], "cols", where), where + "cols");
      layer.weights = as_reals(field(ls[i], "weights", where), where + "weights");
      layer.bias = as_reals(field(ls[i], "bias", where), where + "bias");
      const auto& act = field(ls[i], "activation", where);
      const std::string a = act.is_string() ? act.get<std::string>() : "";
      if (a == "relu") {
        layer.activation = Activation::relu;
      } else if (a == "identity") {
        layer.activation = Activation::identity;
      } else {
        throw FormatError("field '" + where + "activation' must be \"relu\" or \"identity\"");
      }
      m.layers.push_back(std::move(layer));
    }
    validate(m);
    if (m.num_classes() != num_classes) {
      throw ValidationError("num_classes = " + std::to_string(num_classes) +
                            " but final layer has " + std::to_string(m.num_classes()) + " rows");
    }
    return Model(std::move(m));
  }
  throw FormatError("field 'kind' must be \"centroid\" or \"mlp\", got \"" + kind + "\"");
}

Model load_model(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_model(text);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string model_to_json(const Model& model) {
  json doc;
  doc["input_shape"] = shape_json(model.input_shape());
  doc["num_classes"] = model.num_classes();
  if (const auto* cm = model.as_centroid()) {
    doc["kind"] = "centroid";
    json cs = json::array();
    for (const auto& c : cm->centroids) cs.push_back(c.values());
    doc["centroids"] = std::move(cs);
  } else {
    const auto* mm = model.as_mlp();
    doc["kind"] = "mlp";
    json ls = json::array();
    for (const auto& l : mm->layers) {
      ls.push_back({{"rows", l.rows},
                    {"cols", l.cols},
                    {"weights", l.weights},
                    {"bias", l.bias},
                    {"activation", l.activation == Activation::relu ? "relu" : "identity"}});
    }
    doc["layers"] = std::move(ls);
  }
  return doc.dump();
}

void save_model(const Model& model, const std::filesystem::path& path) {
  write_file_atomic(path, model_to_json(model));
}

}  // namespace patchstart
