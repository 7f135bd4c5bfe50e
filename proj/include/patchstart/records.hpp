#pragma once

#include <cstdint>

#include <json.hpp>

#include "patchstart/attack.hpp"
#include "patchstart/initgen.hpp"

namespace patchstart {

nlohmann::json placement_json(const Placement& p);

// Sidecar for a starting point. The exact pixel values are embedded so the
// attack can resume from the same doubles the initializer produced (the PNG
// next to it is 8-bit and for inspection only).
nlohmann::json starting_point_json(const StartingPoint& start, Label target_class,
                                   std::uint64_t seed);
StartingPoint starting_point_from_json(const nlohmann::json& j, Label* target_class = nullptr);

// Sidecar written when every candidate (and the fallback, if enabled) failed.
nlohmann::json init_failure_json(const InitResult& result, Label target_class,
                                 std::uint64_t seed);

// One document per attack run: config echo, provenance, init_queries, the
// accepted-step records, success_query (nullable) and the final distance.
nlohmann::json trace_json(const AttackTrace& trace, const nlohmann::json& config_echo);

}  // namespace patchstart
