#include "patchstart/attack.hpp"

#include <algorithm>
#include <cmath>

#include "patchstart/errors.hpp"
#include "patchstart/perlin.hpp"
#include "patchstart/rng.hpp"

namespace patchstart {

namespace {

constexpr double kStepFloor = 1e-6;
constexpr double kStepCeil = 0.999;

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

Image draw_noise(const Shape& shape, const AttackConfig& config, Rng& rng) {
  const std::size_t planes = config.per_channel_noise ? shape.channels : 1;
  if (config.low_frequency) {
    if (planes == 1) return sample_perlin(shape.height, shape.width, config.perlin_freq, rng);
    Image noise(Shape{shape.height, shape.width, planes});
    for (std::size_t c = 0; c < planes; ++c) {
      const Image plane = sample_perlin(shape.height, shape.width, config.perlin_freq, rng);
      for (std::size_t p = 0; p < shape.pixels(); ++p) noise.data()[p * planes + c] = plane.data()[p];
    }
    return noise;
  }
  Image noise(Shape{shape.height, shape.width, planes});
  for (double& v : noise.data()) v = rng.normal();
  return noise;
}

}  // namespace

void AttackConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("attack: epsilon must be in (0, 1)");
  if (!(delta > 0.0)) throw InvalidArgument("attack: delta must be positive");
  if (!(threshold > 0.0)) throw InvalidArgument("attack: threshold must be positive");
  if (perlin_freq < 1) throw InvalidArgument("attack: perlin_freq must be >= 1");
  if (window < 1) throw InvalidArgument("attack: window must be >= 1");
}

Mask regional_mask(const Image& current, const Image& original) {
  if (current.shape() != original.shape()) {
    throw InvalidArgument("regional_mask: shape mismatch " + current.shape().str() + " vs " +
                          original.shape().str());
  }
  Mask m(current.height(), current.width());
  for (std::size_t y = 0; y < current.height(); ++y) {
    for (std::size_t x = 0; x < current.width(); ++x) {
      double v = 0.0;
      for (std::size_t c = 0; c < current.channels(); ++c) {
        v = std::max(v, std::abs(current.at(y, x, c) - original.at(y, x, c)));
      }
      m.at(y, x) = v;
    }
  }
  const double peak = m.max();
  if (peak == 0.0) return Mask(m.height(), m.width(), 1.0);
  for (double& v : m.data()) v /= peak;
  return m;
}

Proposal propose_candidate(const Image& current, const Image& original, const Image& noise,
                           double delta, double epsilon, bool use_regional_mask) {
  if (current.shape() != original.shape()) {
    throw InvalidArgument("propose_candidate: shape mismatch");
  }
  const Shape& shape = current.shape();
  if (noise.height() != shape.height || noise.width() != shape.width ||
      (noise.channels() != 1 && noise.channels() != shape.channels)) {
    throw InvalidArgument("propose_candidate: noise field " + noise.shape().str() +
                          " does not fit image " + shape.str());
  }

  const std::size_t n = shape.size();
  const std::size_t ch = shape.channels;
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = current.data()[i] - original.data()[i];
  const double d2 = dot(u, u);
  if (d2 == 0.0) throw InvalidArgument("propose_candidate: current equals original");
  const double d = std::sqrt(d2);

  Proposal out;
  out.perturbation = Image(shape);
  auto p = out.perturbation.data();
  const Mask mask = use_regional_mask ? regional_mask(current, original) : Mask();
  for (std::size_t px = 0; px < shape.pixels(); ++px) {
    const double m = use_regional_mask ? mask.data()[px] : 1.0;
    for (std::size_t c = 0; c < ch; ++c) {
      const double v = noise.channels() == 1 ? noise.data()[px] : noise.data()[px * ch + c];
      p[px * ch + c] = v * m;
    }
  }

  out.orthogonal = out.perturbation;
  auto q = out.orthogonal.data();
  const double along = dot(q, u) / d2;
  for (std::size_t i = 0; i < n; ++i) q[i] -= along * u[i];
  const double qn = std::sqrt(dot(q, q));
  if (qn > 0.0) {
    const double s = delta * d / qn;
    for (double& v : q) v *= s;
  }

  std::vector<double> dir(n);
  for (std::size_t i = 0; i < n; ++i) dir[i] = u[i] + q[i];
  const double dn = std::sqrt(dot(dir, dir));
  const double radial = d / dn * (1.0 - epsilon);

  out.unclipped = Image(shape);
  auto c = out.unclipped.data();
  for (std::size_t i = 0; i < n; ++i) c[i] = original.data()[i] + radial * dir[i];
  out.candidate = out.unclipped.clipped();
  return out;
}

std::pair<double, double> adapt_steps(const std::vector<bool>& window, double delta, double epsilon,
                                      const AttackConfig& config) {
  if (window.size() < config.window) return {delta, epsilon};
  const auto accepted = std::count(window.begin(), window.end(), true);
  const double rate = static_cast<double>(accepted) / static_cast<double>(window.size());
  double factor = 1.0;
  if (rate > config.target_acceptance) {
    factor = config.step_up;
  } else if (rate < config.target_acceptance / 2.0) {
    factor = config.step_down;
  }
  return {std::clamp(delta * factor, kStepFloor, kStepCeil),
          std::clamp(epsilon * factor, kStepFloor, kStepCeil)};
}

AttackTrace run_attack(OracleSession& session, const Image& original, const StartingPoint& start,
                       Label target_class, const AttackConfig& config) {
  config.validate();
  if (start.image.shape() != original.shape()) {
    throw InvalidArgument("run_attack: start and original differ in shape");
  }

  AttackTrace trace;
  trace.provenance = start.provenance;
  trace.init_queries = start.init_queries;
  trace.queries_used = start.init_queries;
  trace.best_image = start.image;
  trace.best_distance = l2_distance(start.image, original);
  trace.records.push_back({trace.queries_used, trace.best_distance, true});

  std::vector<std::uint64_t> marks = config.snapshot_marks;
  std::sort(marks.begin(), marks.end());
  std::size_t next_mark = 0;
  auto take_snapshots = [&] {
    while (next_mark < marks.size() && marks[next_mark] <= trace.queries_used) {
      trace.snapshots.emplace_back(marks[next_mark], trace.best_image);
      ++next_mark;
    }
  };
  take_snapshots();

  if (trace.best_distance < config.threshold) {
    trace.success_query = trace.queries_used;
    return trace;
  }

  Rng rng(config.seed);
  double delta = config.delta;
  double epsilon = config.epsilon;
  std::vector<bool> window;
  window.reserve(config.window);

  while (trace.queries_used < config.budget) {
    if (trace.best_distance == 0.0) break;
    const Image noise = draw_noise(original.shape(), config, rng);
    const Proposal prop =
        propose_candidate(trace.best_image, original, noise, delta, epsilon, config.regional_mask);

    Label label;
    try {
      label = session.classify(prop.candidate);
    } catch (const TransportError& e) {
      trace.error = TraceError{trace.queries_used + 1, e.what()};
      break;
    } catch (const ProtocolError& e) {
      trace.error = TraceError{trace.queries_used + 1, e.what()};
      break;
    }
    ++trace.queries_used;

    const double dist = l2_distance(prop.candidate, original);
    const bool accepted = label == target_class && dist < trace.best_distance;
    if (config.log_queries) trace.queries.push_back({trace.queries_used, dist, label, accepted});

    window.push_back(accepted);
    if (window.size() >= config.window) {
      std::tie(delta, epsilon) = adapt_steps(window, delta, epsilon, config);
      window.clear();
    }

    if (accepted) {
      trace.best_image = prop.candidate;
      trace.best_distance = dist;
      trace.records.push_back({trace.queries_used, dist, true});
    }
    take_snapshots();
    if (accepted && dist < config.threshold) {
      trace.success_query = trace.queries_used;
      break;
    }
  }
  return trace;
}

}  // namespace patchstart
