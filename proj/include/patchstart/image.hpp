#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace patchstart {

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const { return height * width * channels; }
  std::size_t pixels() const { return height * width; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

// Dense H x W x C array stored row-major as (y, x, channel).
//
// Pixel images hold values in [0, 1]; clip() restores that after arithmetic.
// Gradients and perturbations reuse the same container and may hold any
// finite value.
class Image {
 public:
  Image() = default;
  explicit Image(Shape shape, double fill = 0.0);
  Image(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(std::size_t y, std::size_t x, std::size_t c) const {
    return (y * shape_.width + x) * shape_.channels + c;
  }
  double& at(std::size_t y, std::size_t x, std::size_t c) { return data_[index(y, x, c)]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const { return data_[index(y, x, c)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  // Clamps every element into [0, 1]; NaN becomes 0.
  Image& clip();
  Image clipped() const;

  bool operator==(const Image&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Single-channel H x W field with values in [0, 1].
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t height, std::size_t width, double fill = 0.0);
  Mask(std::size_t height, std::size_t width, std::vector<double> data);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t y, std::size_t x) { return data_[y * width_ + x]; }
  double at(std::size_t y, std::size_t x) const { return data_[y * width_ + x]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double max() const;

  bool operator==(const Mask&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

double l2_distance(const Image& a, const Image& b);
double linf_distance(const Image& a, const Image& b);

// Radius of the l2 ball that matches a uniform l-infinity perturbation of
// eps_inf on every entry: eps_inf * sqrt(H * W * C).
double success_threshold(std::size_t height, std::size_t width, std::size_t channels,
                         double eps_inf);
double success_threshold(const Shape& shape, double eps_inf);

// Separable Gaussian blur with half-sample symmetric reflection at the borders.
// The kernel is truncated at radius ceil(3 sigma) and renormalized; sigma == 0
// returns the input.
Mask gaussian_blur(const Mask& m, double sigma);
// Same filter applied independently to each channel.
Image gaussian_blur(const Image& img, double sigma);

// Corner-aligned bilinear resampling: output index k samples input coordinate
// k * (in - 1) / (out - 1), or the input center when out == 1.
Image resample_bilinear(const Image& img, std::size_t out_height, std::size_t out_width);
Mask resample_bilinear(const Mask& m, std::size_t out_height, std::size_t out_width);

struct Components {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<int> labels;          // 0 = background, components are 1..count()
  std::vector<std::size_t> sizes;   // sizes[k - 1] is the pixel count of component k

  std::size_t count() const { return sizes.size(); }
  int label(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
};

// 4-connected labelling of {m >= threshold}. Labels are assigned in raster
// order of each component's first pixel.
Components connected_components(const Mask& m, double threshold);

}  // namespace patchstart
