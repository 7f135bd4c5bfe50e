#include "patchstart/records.hpp"

#include "patchstart/errors.hpp"

namespace patchstart {

using json = nlohmann::json;

json placement_json(const Placement& p) {
  return {{"patch_index", p.patch_index}, {"scale", p.scale}, {"row", p.row}, {"col", p.col}};
}

json starting_point_json(const StartingPoint& start, Label target_class, std::uint64_t seed) {
  const Shape& s = start.image.shape();
  return {{"status", "ok"},
          {"provenance", to_string(start.provenance)},
          {"distance", start.distance},
          {"init_queries", start.init_queries},
          {"placement", start.placement ? placement_json(*start.placement) : json(nullptr)},
          {"donor", start.donor},
          {"target_class", target_class},
          {"seed", seed},
          {"shape", {s.height, s.width, s.channels}},
          {"pixels", start.image.values()}};
}

StartingPoint starting_point_from_json(const json& j, Label* target_class) {
  try {
    if (j.value("status", "ok") != "ok") {
      throw ValidationError("starting point sidecar records a failed initialization");
    }
    StartingPoint sp;
    sp.provenance = provenance_from_string(j.at("provenance").get<std::string>());
    sp.distance = j.at("distance").get<double>();
    sp.init_queries = j.at("init_queries").get<std::uint64_t>();
    sp.donor = j.value("donor", "");
    const auto& pl = j.at("placement");
    if (!pl.is_null()) {
      sp.placement = Placement{pl.at("patch_index").get<std::size_t>(),
                               pl.at("scale").get<double>(), pl.at("row").get<std::size_t>(),
                               pl.at("col").get<std::size_t>()};
    }
    const auto& sh = j.at("shape");
    const Shape shape{sh.at(0).get<std::size_t>(), sh.at(1).get<std::size_t>(),
                      sh.at(2).get<std::size_t>()};
    sp.image = Image(shape, j.at("pixels").get<std::vector<double>>());
    if (target_class != nullptr) *target_class = j.at("target_class").get<Label>();
    return sp;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed starting point sidecar: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("malformed starting point sidecar: ") + e.what());
  }
}

json init_failure_json(const InitResult& result, Label target_class, std::uint64_t seed) {
  return {{"status", "failure"},
          {"provenance", nullptr},
          {"init_queries", result.queries},
          {"rounds", result.rounds},
          {"target_class", target_class},
          {"seed", seed}};
}

json trace_json(const AttackTrace& trace, const json& config_echo) {
  json records = json::array();
  for (const auto& r : trace.records) {
    records.push_back({{"query", r.query}, {"distance", r.distance}});
  }
  json doc = {{"config", config_echo},
              {"provenance", to_string(trace.provenance)},
              {"init_queries", trace.init_queries},
              {"queries_used", trace.queries_used},
              {"records", std::move(records)},
              {"success_query",
               trace.success_query ? json(*trace.success_query) : json(nullptr)},
              {"final_distance", trace.best_distance}};
  if (!trace.queries.empty()) {
    json qs = json::array();
    for (const auto& q : trace.queries) {
      qs.push_back({{"query", q.query},
                    {"distance", q.distance},
                    {"label", q.label},
                    {"accepted", q.accepted}});
    }
    doc["queries"] = std::move(qs);
  }
  if (trace.error) {
    doc["error"] = {{"query", trace.error->query}, {"message", trace.error->message}};
  }
  return doc;
}

}  // namespace patchstart
