#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "patchstart/attack.hpp"
#include "patchstart/config.hpp"
#include "patchstart/initgen.hpp"
#include "patchstart/models.hpp"
#include "patchstart/oracle.hpp"

namespace patchstart {

struct ManifestCase {
  std::size_t id = 0;  // zero-based line index among non-empty lines
  std::filesystem::path original;
  Label true_label = 0;
  Label target_label = 0;
};

struct ExperimentManifest {
  std::vector<ManifestCase> cases;
  ExperimentConfig config;
  nlohmann::json settings;  // effective settings, echoed into reports
};

// Reads JSON Lines cases: {"original": path, "true_label": int, "target_label": int}.
// Relative image paths resolve against the manifest's directory. Throws
// ValidationError naming the case on a missing/undecodable image, a label
// outside [0, num_classes) or target == true label.
std::vector<ManifestCase> load_cases(const std::filesystem::path& path,
                                     std::optional<std::size_t> num_classes = std::nullopt);

// Loads the cases plus a config file (may be empty for defaults) and validates
// labels against the oracle's class count.
ExperimentManifest load_manifest(const std::filesystem::path& manifest_path,
                                 const std::filesystem::path& config_path = {},
                                 const nlohmann::json& overrides = nlohmann::json::object());

// Donor directory layout: <dir>/<label>/<name>.png, read in sorted order.
std::vector<LabeledImage> load_donors(const std::filesystem::path& dir);

struct CaseRow {
  std::size_t case_id = 0;
  std::optional<std::string> provenance;
  std::uint64_t init_queries = 0;
  std::optional<std::uint64_t> success_query;
  std::optional<double> final_distance;
  std::uint64_t queries_used = 0;
  std::uint64_t session_queries = 0;
  std::optional<std::string> error;
};

struct Summary {
  std::vector<std::uint64_t> marks;
  std::vector<std::optional<double>> success_rates;  // null when there are no cases
  std::optional<double> median_queries;
  std::size_t successes = 0;
  std::size_t failures = 0;
};

// Success rate at mark Q is the fraction of rows with success_query <= Q. The
// median is taken over successful rows only (mean of the two central values
// for even counts); failures are reported separately.
Summary summarize(const std::vector<CaseRow>& rows, const std::vector<std::uint64_t>& marks);

struct Report {
  std::vector<CaseRow> rows;  // sorted by case id
  Summary summary;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::vector<nlohmann::json> traces;  // per case, same order as rows
};

// Per-case seed: a stable hash of (global seed, case id).
std::uint64_t case_seed(std::uint64_t global_seed, std::size_t case_id);

// Runs every case with a fresh oracle session. Per-case failures are recorded
// in the row and never abort the batch. `backend` replaces the configured
// oracle when given.
Report run_experiment(const ExperimentManifest& manifest,
                      std::shared_ptr<const OracleBackend> backend = nullptr);

nlohmann::json report_json(const Report& report);
std::string report_csv(const Report& report);
std::string success_curve_csv(const Report& report);

// report.json, report.csv, success_curve_<strategy>.csv and traces/case_<id>.json.
void write_report(const Report& report, const std::filesystem::path& out_dir);

}  // namespace patchstart
