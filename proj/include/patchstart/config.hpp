#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "patchstart/attack.hpp"
#include "patchstart/initgen.hpp"

namespace patchstart {

enum class Strategy { copy_paste, closest_image };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

// Every tunable of an experiment, resolved. Built from a settings tree
// (defaults <- config file <- command-line flags).
struct ExperimentConfig {
  std::string oracle;
  std::string surrogate;
  std::filesystem::path donors_dir;
  Strategy strategy = Strategy::copy_paste;
  std::uint64_t budget = 5000;
  std::optional<double> threshold;  // unset: success_threshold(shape, eps_inf)
  double eps_inf = 0.05;
  std::vector<std::uint64_t> marks{500, 1000, 2500, 5000, 10000, 15000};
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  AttackConfig attack;
  InitParams init;

  double threshold_for(const Shape& shape) const;
};

// The complete default settings tree; documents every accepted key.
nlohmann::json default_settings();

// Parses a config file. Files ending in .json are JSON; anything else is read
// as flat TOML-style key/value text:
//
//   # comment
//   budget = 5000
//   strategy = "copy_paste"
//   marks = [500, 1000, 2500]
//   [attack]
//   delta = 0.1
//
// Dotted keys (attack.delta = 0.1) are accepted at top level.
nlohmann::json parse_config_file(const std::filesystem::path& path);
nlohmann::json parse_key_value_text(const std::string& text);

// Recursively overlays `overrides` onto `base`. Keys absent from `base` are
// rejected with ValidationError naming the key.
void merge_settings(nlohmann::json& base, const nlohmann::json& overrides,
                    const std::string& prefix = "");

// Rewrites relative oracle/surrogate/donors_dir paths against `dir`.
void resolve_paths(nlohmann::json& settings, const std::filesystem::path& dir);

ExperimentConfig config_from_settings(const nlohmann::json& settings);

nlohmann::json attack_config_json(const AttackConfig& c);
nlohmann::json init_params_json(const InitParams& p);

}  // namespace patchstart
