#include <doctest.h>

#include <cmath>
#include <numbers>

#include "patchstart/errors.hpp"
#include "patchstart/image.hpp"
#include "patchstart/rng.hpp"

using namespace patchstart;

namespace {

Image random_image(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Image img(s);
  for (double& v : img.data()) v = rng.uniform();
  return img;
}

// Plain flood fill over explicit neighbour lists.
std::size_t flood_fill_count(const Mask& m, double threshold) {
  const std::size_t h = m.height(), w = m.width();
  std::vector<char> seen(h * w, 0);
  std::size_t count = 0;
  for (std::size_t start = 0; start < h * w; ++start) {
    if (seen[start] || m.data()[start] < threshold) continue;
    ++count;
    std::vector<std::size_t> todo{start};
    seen[start] = 1;
    while (!todo.empty()) {
      const std::size_t i = todo.back();
      todo.pop_back();
      const std::size_t y = i / w, x = i % w;
      std::vector<std::size_t> nb;
      if (y > 0) nb.push_back(i - w);
      if (y + 1 < h) nb.push_back(i + w);
      if (x > 0) nb.push_back(i - 1);
      if (x + 1 < w) nb.push_back(i + 1);
      for (std::size_t j : nb) {
        if (!seen[j] && m.data()[j] >= threshold) {
          seen[j] = 1;
          todo.push_back(j);
        }
      }
    }
  }
  return count;
}

}  // namespace

TEST_CASE("l2 distance") {
  CHECK(l2_distance(Image({2, 2, 1}, 0.0), Image({2, 2, 1}, 1.0)) == doctest::Approx(2.0));

  const Image a = random_image({8, 8, 3}, 1), b = random_image({8, 8, 3}, 2);
  double acc = 0.0;
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x)
      for (std::size_t c = 0; c < 3; ++c) acc += std::pow(a.at(y, x, c) - b.at(y, x, c), 2);
  CHECK(l2_distance(a, b) == doctest::Approx(std::sqrt(acc)).epsilon(1e-9));

  CHECK_THROWS_AS(l2_distance(Image({2, 2, 1}), Image({2, 2, 3})), InvalidArgument);
}

TEST_CASE("linf distance") {
  const Image a = random_image({5, 7, 3}, 3), b = random_image({5, 7, 3}, 4);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  CHECK(linf_distance(a, b) == m);
  CHECK_THROWS_AS(linf_distance(Image({1, 1, 1}), Image({1, 2, 1})), InvalidArgument);
}

TEST_CASE("success threshold") {
  CHECK(success_threshold(299, 299, 3, 0.05) == doctest::Approx(25.89).epsilon(0.01 / 25.89));
  CHECK(success_threshold(2, 2, 1, 0.5) == doctest::Approx(1.0));
  CHECK(success_threshold(Shape{32, 32, 3}, 0.05) == doctest::Approx(0.05 * std::sqrt(3072.0)));
}

TEST_CASE("gaussian blur kernel center") {
  Mask m(9, 9);
  m.at(4, 4) = 1.0;
  const Mask b = gaussian_blur(m, 1.0);
  // 1-D kernel, radius 3, renormalized; 2-D center is its square
  double sum = 0.0;
  for (int k = -3; k <= 3; ++k) sum += std::exp(-0.5 * k * k);
  const double center = 1.0 / sum;
  CHECK(b.at(4, 4) == doctest::Approx(center * center).epsilon(1e-6));
}

TEST_CASE("gaussian blur preserves mass and constants") {
  Mask m(7, 11, 0.3);
  const Mask b = gaussian_blur(m, 2.5);
  for (double v : b.data()) CHECK(v == doctest::Approx(0.3));

  Mask spot(10, 10);
  spot.at(0, 0) = 1.0;
  spot.at(5, 7) = 1.0;
  double before = 0.0, after = 0.0;
  for (double v : spot.data()) before += v;
  const Mask blurred = gaussian_blur(spot, 1.5);
  for (double v : blurred.data()) after += v;
  CHECK(after == doctest::Approx(before));

  CHECK(gaussian_blur(spot, 0.0) == spot);
}

TEST_CASE("bilinear resampling") {
  const Image img({2, 1, 1}, std::vector<double>{0.0, 1.0});
  const Image up = resample_bilinear(img, 3, 1);
  REQUIRE(up.shape() == Shape{3, 1, 1});
  CHECK(up.data()[0] == doctest::Approx(0.0));
  CHECK(up.data()[1] == doctest::Approx(0.5));
  CHECK(up.data()[2] == doctest::Approx(1.0));

  const Image r = random_image({6, 5, 3}, 9);
  CHECK(resample_bilinear(r, 6, 5) == r);
  const Image small = resample_bilinear(r, 3, 4);
  // corners map onto corners
  CHECK(small.at(0, 0, 1) == doctest::Approx(r.at(0, 0, 1)));
  CHECK(small.at(2, 3, 2) == doctest::Approx(r.at(5, 4, 2)));
}

TEST_CASE("connected components") {
  Mask board(4, 4);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) board.at(y, x) = (y + x) % 2 == 0 ? 1.0 : 0.0;
  const Components cc = connected_components(board, 0.5);
  CHECK(cc.count() == 8);
  CHECK(cc.count() == flood_fill_count(board, 0.5));

  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Mask m(12, 9);
    for (double& v : m.data()) v = rng.uniform();
    const Components c = connected_components(m, 0.6);
    CHECK(c.count() == flood_fill_count(m, 0.6));
    std::size_t total = 0, above = 0;
    for (std::size_t s : c.sizes) total += s;
    for (double v : m.data()) above += v >= 0.6;
    CHECK(total == above);
  }
}
