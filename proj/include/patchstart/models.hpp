#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "patchstart/image.hpp"

namespace patchstart {

using Label = int;

// Nearest-centroid classifier. Class c scores -||x - centroid_c||^2.
struct CentroidModel {
  Shape input_shape;
  std::vector<Image> centroids;

  std::size_t num_classes() const { return centroids.size(); }
};

enum class Activation { identity, relu };

struct DenseLayer {
  std::size_t rows = 0;  // output width
  std::size_t cols = 0;  // input width
  std::vector<double> weights;  // rows x cols, row-major
  std::vector<double> bias;     // rows
  Activation activation = Activation::identity;
};

// Fully connected network over the flattened (y, x, channel) image.
struct MlpModel {
  Shape input_shape;
  std::vector<DenseLayer> layers;

  std::size_t num_classes() const { return layers.empty() ? 0 : layers.back().rows; }
};

double centroid_score(const CentroidModel& model, const Image& img, Label c);
// Gradient of centroid_score: -2 (img - centroid_c).
Image centroid_gradient(const CentroidModel& model, const Image& img, Label c);

std::vector<double> mlp_forward(const MlpModel& model, const Image& img);
// Reverse-mode gradient of score c; the relu derivative at 0 is taken as 0.
Image mlp_gradient(const MlpModel& model, const Image& img, Label c);

// Throws ValidationError if the layer chain or centroid shapes are inconsistent.
void validate(const CentroidModel& model);
void validate(const MlpModel& model);

// Either model kind behind one value type. Immutable after construction.
class Model {
 public:
  Model(CentroidModel m);
  Model(MlpModel m);

  const Shape& input_shape() const;
  std::size_t num_classes() const;
  bool is_centroid() const { return std::holds_alternative<CentroidModel>(impl_); }
  const CentroidModel* as_centroid() const { return std::get_if<CentroidModel>(&impl_); }
  const MlpModel* as_mlp() const { return std::get_if<MlpModel>(&impl_); }

  std::vector<double> scores(const Image& img) const;
  Image gradient(const Image& img, Label c) const;
  // argmax of scores; ties go to the lowest class index.
  Label classify(const Image& img) const;

 private:
  std::variant<CentroidModel, MlpModel> impl_;
};

// Weight file: JSON with kind, input_shape, num_classes and either centroids
// or layers. See README for the schema.
Model load_model(const std::filesystem::path& path);
Model parse_model(const std::string& json_text);
std::string model_to_json(const Model& model);
void save_model(const Model& model, const std::filesystem::path& path);

}  // namespace patchstart
