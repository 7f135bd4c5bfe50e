#include "patchstart/perlin.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "patchstart/errors.hpp"

namespace patchstart {

namespace {

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

}  // namespace

Image perlin_raw(std::size_t height, std::size_t width, std::size_t freq, Rng& rng) {
  if (freq < 1) throw InvalidArgument("sample_perlin: freq must be >= 1");
  const std::size_t corners = freq + 1;
  std::vector<double> gx(corners * corners);
  std::vector<double> gy(corners * corners);
  for (std::size_t i = 0; i < gx.size(); ++i) {
    const double angle = 2.0 * std::numbers::pi * rng.uniform();
    gx[i] = std::cos(angle);
    gy[i] = std::sin(angle);
  }

  Image field(Shape{height, width, 1});
  const double fy = static_cast<double>(freq) / static_cast<double>(height);
  const double fx = static_cast<double>(freq) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    const double v = static_cast<double>(y) * fy;
    const auto cy = static_cast<std::size_t>(std::floor(v));
    const double ty = v - static_cast<double>(cy);
    for (std::size_t x = 0; x < width; ++x) {
      const double u = static_cast<double>(x) * fx;
      const auto cx = static_cast<std::size_t>(std::floor(u));
      const double tx = u - static_cast<double>(cx);

      auto corner = [&](std::size_t dy, std::size_t dx) {
        const std::size_t k = (cy + dy) * corners + (cx + dx);
        return gx[k] * (tx - static_cast<double>(dx)) + gy[k] * (ty - static_cast<double>(dy));
      };
      const double sx = smoothstep(tx);
      const double sy = smoothstep(ty);
      const double top = corner(0, 0) + sx * (corner(0, 1) - corner(0, 0));
      const double bottom = corner(1, 0) + sx * (corner(1, 1) - corner(1, 0));
      field.at(y, x, 0) = top + sy * (bottom - top);
    }
  }
  return field;
}

Image sample_perlin(std::size_t height, std::size_t width, std::size_t freq, Rng& rng) {
  Image field = perlin_raw(height, width, freq, rng);
  double peak = 0.0;
  for (double v : field.data()) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : field.data()) v /= peak;
  }
  return field;
}

}  // namespace patchstart
