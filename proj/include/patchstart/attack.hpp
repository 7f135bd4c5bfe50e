#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "patchstart/image.hpp"
#include "patchstart/initgen.hpp"
#include "patchstart/oracle.hpp"

namespace patchstart {

struct AttackConfig {
  std::uint64_t budget = 5000;
  double threshold = 1.0;
  double delta = 0.1;     // orthogonal step, as a fraction of the current distance
  double epsilon = 0.05;  // step towards the original, as a fraction
  std::size_t perlin_freq = 12;
  bool low_frequency = true;
  bool regional_mask = true;
  bool per_channel_noise = false;
  std::size_t window = 30;
  double target_acceptance = 0.25;
  double step_up = 1.3;
  double step_down = 0.7;
  std::uint64_t seed = 0;
  // Record every query (label and distance), not only accepted steps.
  bool log_queries = false;
  // Query counts at which the best image so far is kept for export.
  std::vector<std::uint64_t> snapshot_marks;

  void validate() const;
};

struct Proposal {
  Image candidate;  // clipped to [0, 1]
  Image unclipped;
  Image perturbation;  // noise after masking, before projection
  Image orthogonal;    // projected and rescaled perturbation
};

// Regional-mask bias: per-pixel channel max of |current - original| divided by
// its maximum. Identical images give an all-ones mask.
Mask regional_mask(const Image& current, const Image& original);

// One combined boundary step: an orthogonal move of length delta * d on the
// sphere of radius d = |current - original| around the original, followed by a
// contraction of the offset by (1 - epsilon). `noise` has one channel (shared
// across image channels) or as many channels as the image.
Proposal propose_candidate(const Image& current, const Image& original, const Image& noise,
                           double delta, double epsilon, bool use_regional_mask);

// Step-size adaptation over a full window of accept/reject outcomes. Returns
// the inputs unchanged until `window` holds config.window outcomes.
std::pair<double, double> adapt_steps(const std::vector<bool>& window, double delta, double epsilon,
                                      const AttackConfig& config);

struct TraceRecord {
  std::uint64_t query = 0;
  double distance = 0.0;
  bool accepted = true;
};

struct QueryRecord {
  std::uint64_t query = 0;
  double distance = 0.0;
  Label label = 0;
  bool accepted = false;
};

struct TraceError {
  std::uint64_t query = 0;
  std::string message;
};

struct AttackTrace {
  Provenance provenance = Provenance::copy_paste;
  std::uint64_t init_queries = 0;
  std::uint64_t queries_used = 0;
  // Accepted states in query order; the first entry is the starting point.
  std::vector<TraceRecord> records;
  std::vector<QueryRecord> queries;
  Image best_image;
  double best_distance = 0.0;
  std::optional<std::uint64_t> success_query;
  std::optional<TraceError> error;
  std::vector<std::pair<std::uint64_t, Image>> snapshots;
};

// Boundary random walk from an adversarial start. Queries used before the call
// (start.init_queries) count towards config.budget. Oracle transport or
// protocol failures end the run and are recorded in trace.error.
AttackTrace run_attack(OracleSession& session, const Image& original, const StartingPoint& start,
                       Label target_class, const AttackConfig& config);

}  // namespace patchstart
