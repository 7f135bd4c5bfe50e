#include "patchstart/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "patchstart/errors.hpp"

namespace patchstart {

std::string Shape::str() const {
  return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
}

Image::Image(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Image::Image(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw InvalidArgument("image data length " + std::to_string(data_.size()) +
                          " does not match shape " + shape_.str());
  }
}

Image& Image::clip() {
  for (double& v : data_) {
    v = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
  }
  return *this;
}

Image Image::clipped() const {
  Image out = *this;
  out.clip();
  return out;
}

Mask::Mask(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), data_(height * width, fill) {}

Mask::Mask(std::size_t height, std::size_t width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (data_.size() != height_ * width_) {
    throw InvalidArgument("mask data length does not match " + std::to_string(height_) + "x" +
                          std::to_string(width_));
  }
}

double Mask::max() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, v);
  return m;
}

namespace {

void require_same_shape(const Image& a, const Image& b) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument("shape mismatch: " + a.shape().str() + " vs " + b.shape().str());
  }
}

// Half-sample symmetric reflection: ... c b a | a b c ... | c b a ...
std::size_t reflect(long i, long n) {
  const long period = 2 * n;
  long r = i % period;
  if (r < 0) r += period;
  if (r >= n) r = period - 1 - r;
  return static_cast<std::size_t>(r);
}

std::vector<double> gaussian_kernel(double sigma) {
  const long radius = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (long j = -radius; j <= radius; ++j) {
    const double v = std::exp(-0.5 * static_cast<double>(j * j) / (sigma * sigma));
    k[j + radius] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

// Blurs one plane of a (height, width, stride) interleaved buffer in place.
void blur_plane(std::span<double> data, std::size_t height, std::size_t width,
                std::size_t stride, std::size_t offset, const std::vector<double>& kernel) {
  const long radius = static_cast<long>(kernel.size() / 2);
  const long h = static_cast<long>(height);
  const long w = static_cast<long>(width);
  std::vector<double> tmp(height * width);

  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long j = -radius; j <= radius; ++j) {
        acc += kernel[j + radius] * data[(y * w + reflect(x + j, w)) * stride + offset];
      }
      tmp[y * w + x] = acc;
    }
  }
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long j = -radius; j <= radius; ++j) {
        acc += kernel[j + radius] * tmp[reflect(y + j, h) * w + x];
      }
      data[(y * w + x) * stride + offset] = acc;
    }
  }
}

struct Tap {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  for (std::size_t k = 0; k < out; ++k) {
    double pos = out > 1 ? static_cast<double>(k) * static_cast<double>(in - 1) /
                               static_cast<double>(out - 1)
                         : 0.5 * static_cast<double>(in - 1);
    pos = std::clamp(pos, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[k] = {lo, hi, pos - static_cast<double>(lo)};
  }
  return taps;
}

void resample_planes(std::span<const double> src, std::size_t in_h, std::size_t in_w,
                     std::span<double> dst, std::size_t out_h, std::size_t out_w,
                     std::size_t channels) {
  const auto ty = bilinear_taps(in_h, out_h);
  const auto tx = bilinear_taps(in_w, out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const Tap& a = ty[y];
    for (std::size_t x = 0; x < out_w; ++x) {
      const Tap& b = tx[x];
      for (std::size_t c = 0; c < channels; ++c) {
        const double v00 = src[(a.lo * in_w + b.lo) * channels + c];
        const double v01 = src[(a.lo * in_w + b.hi) * channels + c];
        const double v10 = src[(a.hi * in_w + b.lo) * channels + c];
        const double v11 = src[(a.hi * in_w + b.hi) * channels + c];
        const double top = v00 + b.frac * (v01 - v00);
        const double bottom = v10 + b.frac * (v11 - v10);
        double v = top + a.frac * (bottom - top);
        // convex combination; clamp away rounding drift past the corner values
        const double lo = std::min({v00, v01, v10, v11});
        const double hi = std::max({v00, v01, v10, v11});
        dst[(y * out_w + x) * channels + c] = std::clamp(v, lo, hi);
      }
    }
  }
}

}  // namespace

double l2_distance(const Image& a, const Image& b) {
  require_same_shape(a, b);
  double acc = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double linf_distance(const Image& a, const Image& b) {
  require_same_shape(a, b);
  double m = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) m = std::max(m, std::abs(da[i] - db[i]));
  return m;
}

double success_threshold(std::size_t height, std::size_t width, std::size_t channels,
                         double eps_inf) {
  if (height == 0 || width == 0 || channels == 0) {
    throw InvalidArgument("success_threshold: dimensions must be positive");
  }
  if (!(eps_inf > 0.0)) throw InvalidArgument("success_threshold: eps_inf must be positive");
  return eps_inf * std::sqrt(static_cast<double>(height * width * channels));
}

double success_threshold(const Shape& shape, double eps_inf) {
  return success_threshold(shape.height, shape.width, shape.channels, eps_inf);
}

Mask gaussian_blur(const Mask& m, double sigma) {
  if (sigma < 0.0) throw InvalidArgument("gaussian_blur: sigma must be >= 0");
  if (sigma == 0.0 || m.size() == 0) return m;
  Mask out = m;
  blur_plane(out.data(), m.height(), m.width(), 1, 0, gaussian_kernel(sigma));
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma < 0.0) throw InvalidArgument("gaussian_blur: sigma must be >= 0");
  if (sigma == 0.0 || img.empty()) return img;
  Image out = img;
  const auto kernel = gaussian_kernel(sigma);
  for (std::size_t c = 0; c < img.channels(); ++c) {
    blur_plane(out.data(), img.height(), img.width(), img.channels(), c, kernel);
  }
  return out;
}

Image resample_bilinear(const Image& img, std::size_t out_height, std::size_t out_width) {
  if (out_height == 0 || out_width == 0) {
    throw InvalidArgument("resample_bilinear: output dimensions must be positive");
  }
  if (img.empty()) throw InvalidArgument("resample_bilinear: empty input");
  if (out_height == img.height() && out_width == img.width()) return img;
  Image out(Shape{out_height, out_width, img.channels()});
  resample_planes(img.data(), img.height(), img.width(), out.data(), out_height, out_width,
                  img.channels());
  return out;
}

Mask resample_bilinear(const Mask& m, std::size_t out_height, std::size_t out_width) {
  if (out_height == 0 || out_width == 0) {
    throw InvalidArgument("resample_bilinear: output dimensions must be positive");
  }
  if (m.size() == 0) throw InvalidArgument("resample_bilinear: empty input");
  if (out_height == m.height() && out_width == m.width()) return m;
  Mask out(out_height, out_width);
  resample_planes(m.data(), m.height(), m.width(), out.data(), out_height, out_width, 1);
  return out;
}

Components connected_components(const Mask& m, double threshold) {
  Components out;
  out.height = m.height();
  out.width = m.width();
  out.labels.assign(m.size(), 0);

  const std::size_t h = m.height();
  const std::size_t w = m.width();
  std::vector<std::size_t> stack;
  int next = 0;
  for (std::size_t start = 0; start < m.size(); ++start) {
    if (out.labels[start] != 0 || !(m.data()[start] >= threshold)) continue;
    ++next;
    std::size_t count = 0;
    out.labels[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++count;
      const std::size_t y = p / w;
      const std::size_t x = p % w;
      auto visit = [&](std::size_t q) {
        if (out.labels[q] == 0 && m.data()[q] >= threshold) {
          out.labels[q] = next;
          stack.push_back(q);
        }
      };
      if (y > 0) visit(p - w);
      if (y + 1 < h) visit(p + w);
      if (x > 0) visit(p - 1);
      if (x + 1 < w) visit(p + 1);
    }
    out.sizes.push_back(count);
  }
  return out;
}

}  // namespace patchstart
