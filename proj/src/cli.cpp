#include "patchstart/cli.hpp"

#include <csignal>
#include <iostream>
#include <optional>
#include <thread>

#include <pthread.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "patchstart/attack.hpp"
#include "patchstart/config.hpp"
#include "patchstart/errors.hpp"
#include "patchstart/fsutil.hpp"
#include "patchstart/harness.hpp"
#include "patchstart/initgen.hpp"
#include "patchstart/oracle.hpp"
#include "patchstart/oracle_server.hpp"
#include "patchstart/png_codec.hpp"
#include "patchstart/records.hpp"
#include "patchstart/rng.hpp"
#include "patchstart/saliency.hpp"

namespace patchstart {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Flags {
  std::optional<std::string> oracle;
  std::optional<std::string> surrogate;
  std::optional<std::string> donors;
  std::optional<std::string> original;
  std::optional<std::string> start;
  std::optional<std::string> manifest;
  std::optional<std::string> config;
  std::optional<std::string> out;
  std::optional<std::string> strategy;
  std::optional<std::string> threshold;
  std::optional<int> target_class;
  std::optional<std::uint64_t> candidates;
  std::optional<std::uint64_t> budget;
  std::optional<std::uint64_t> seed;
  std::string host = "127.0.0.1";
  int port = 8080;
};

std::string require(const std::optional<std::string>& v, const char* flag) {
  if (!v || v->empty()) throw ValidationError(std::string("missing required flag ") + flag);
  return *v;
}

std::string require(const std::string& v, const char* flag) {
  if (v.empty()) throw ValidationError(std::string("missing required flag ") + flag);
  return v;
}

// defaults <- config file <- flags
json effective_settings(const Flags& f) {
  json s = default_settings();
  if (f.config) {
    json file = parse_config_file(*f.config);
    resolve_paths(file, fs::path(*f.config).parent_path());
    merge_settings(s, file);
  }
  if (f.oracle) s["oracle"] = *f.oracle;
  if (f.surrogate) s["surrogate"] = *f.surrogate;
  if (f.donors) s["donors_dir"] = *f.donors;
  if (f.strategy) s["strategy"] = *f.strategy;
  if (f.budget) s["budget"] = *f.budget;
  if (f.seed) s["seed"] = *f.seed;
  if (f.candidates) s["init"]["candidates"] = *f.candidates;
  if (f.threshold) {
    if (*f.threshold == "auto") {
      s["threshold"] = "auto";
    } else {
      try {
        std::size_t used = 0;
        const double v = std::stod(*f.threshold, &used);
        if (used != f.threshold->size()) throw std::invalid_argument("");
        s["threshold"] = v;
      } catch (const std::exception&) {
        throw ValidationError("--threshold must be a number or 'auto'");
      }
    }
  }
  return s;
}

void write_json(const fs::path& path, const json& doc) {
  write_file_atomic(path, doc.dump(2) + "\n");
}

Label resolve_target(const Flags& f, std::size_t num_classes) {
  if (!f.target_class) throw ValidationError("missing required flag --target-class");
  const int t = *f.target_class;
  if (t < 0 || static_cast<std::size_t>(t) >= num_classes) {
    throw ValidationError("--target-class " + std::to_string(t) + " out of range [0, " +
                          std::to_string(num_classes) + ")");
  }
  return t;
}

int cmd_saliency(const Flags& f, std::ostream& out) {
  const json settings = effective_settings(f);
  const ExperimentConfig cfg = config_from_settings(settings);
  const fs::path dir = require(f.out, "--out");
  const Model surrogate = load_model(require(f.surrogate, "--surrogate"));
  const Image img = load_png(require(f.original, "--original"));
  const Label label = resolve_target(f, surrogate.num_classes());

  const SaliencyParams& sp = cfg.init.saliency;
  const Mask raw = saliency_map(surrogate, img, label);
  const Mask smooth = smooth_amplify(raw, sp.sigma_for(img.shape()), sp.gain);
  write_json(dir / "config.json", settings);
  save_mask_png(raw, dir / "saliency.png");
  save_mask_png(smooth, dir / "smoothed.png");
  const SaliencyPatch patch =
      patch_from_mask(img, label, smooth, sp.patch_threshold, sp.components);
  save_mask_png(patch.mask, dir / "mask.png");
  write_json(dir / "patch.json", {{"donor_label", label},
                                  {"bbox",
                                   {{"top", patch.bbox.top},
                                    {"left", patch.bbox.left},
                                    {"height", patch.bbox.height},
                                    {"width", patch.bbox.width}}}});
  out << "mask written to " << (dir / "mask.png").string() << "\n";
  return kExitOk;
}

struct InitOutcome {
  InitResult result;
  Label target = 0;
  std::uint64_t seed = 0;
};

InitOutcome do_init(const Flags& f, const ExperimentConfig& cfg, OracleSession& session,
                    const Image& original) {
  InitOutcome o;
  o.target = resolve_target(f, session.num_classes());
  o.seed = cfg.seed;
  if (cfg.donors_dir.empty()) throw ValidationError("missing required flag --donors");
  const auto donors = load_donors(cfg.donors_dir);
  if (cfg.strategy == Strategy::copy_paste) {
    if (cfg.surrogate.empty()) throw ValidationError("missing required flag --surrogate");
    const Model surrogate = load_model(cfg.surrogate);
    o.result = copy_paste_init(original, o.target, donors, surrogate, session, cfg.init,
                               mix_seed(cfg.seed, 1));
  } else {
    o.result = closest_image_init(original, donors, o.target, session);
  }
  return o;
}

void write_init_outputs(const InitOutcome& o, const fs::path& dir) {
  if (o.result.ok()) {
    save_png(o.result.start->image, dir / "start.png");
    write_json(dir / "start.json", starting_point_json(*o.result.start, o.target, o.seed));
  } else {
    write_json(dir / "start.json", init_failure_json(o.result, o.target, o.seed));
  }
}

json attack_echo(const AttackConfig& a) {
  json echo = attack_config_json(a);
  echo["budget"] = a.budget;
  echo["threshold"] = a.threshold;
  echo["seed"] = a.seed;
  return echo;
}

int do_attack(const ExperimentConfig& cfg, OracleSession& session, const Image& original,
              const StartingPoint& start, Label target, const fs::path& dir, std::ostream& out) {
  AttackConfig attack = cfg.attack;
  attack.budget = cfg.budget;
  attack.threshold = cfg.threshold_for(original.shape());
  attack.seed = mix_seed(cfg.seed, 2);
  const AttackTrace trace = run_attack(session, original, start, target, attack);

  for (const auto& [q, img] : trace.snapshots) {
    save_png(img, dir / "snapshots" / ("query_" + std::to_string(q) + ".png"));
  }
  save_png(trace.best_image, dir / "final.png");
  write_json(dir / "trace.json", trace_json(trace, attack_echo(attack)));

  out << "queries_used " << trace.queries_used << ", final distance " << trace.best_distance;
  if (trace.success_query) out << ", success at query " << *trace.success_query;
  out << "\n";
  if (trace.error) throw TransportError(trace.error->message);
  return trace.success_query ? kExitOk : kExitFailure;
}

int cmd_init(const Flags& f, std::ostream& out) {
  const json settings = effective_settings(f);
  const ExperimentConfig cfg = config_from_settings(settings);
  const fs::path dir = require(f.out, "--out");
  OracleSession session(open_oracle(require(cfg.oracle, "--oracle")));
  const Image original = load_png(require(f.original, "--original"));
  write_json(dir / "config.json", settings);
  const InitOutcome o = do_init(f, cfg, session, original);
  write_init_outputs(o, dir);
  if (!o.result.ok()) {
    out << "initialization exhausted after " << o.result.queries << " queries\n";
    return kExitFailure;
  }
  out << to_string(o.result.start->provenance) << " start at distance " << o.result.start->distance
      << " after " << o.result.queries << " queries\n";
  return kExitOk;
}

int cmd_attack(const Flags& f, std::ostream& out) {
  const json settings = effective_settings(f);
  const ExperimentConfig cfg = config_from_settings(settings);
  const fs::path dir = require(f.out, "--out");
  OracleSession session(open_oracle(require(cfg.oracle, "--oracle")));
  const Image original = load_png(require(f.original, "--original"));

  json sidecar;
  const std::string start_path = require(f.start, "--start");
  try {
    sidecar = json::parse(read_text_file(start_path));
  } catch (const json::parse_error& e) {
    throw FormatError(start_path + ": " + e.what());
  }
  Label target = 0;
  const StartingPoint start = starting_point_from_json(sidecar, &target);
  if (f.target_class) target = resolve_target(f, session.num_classes());
  write_json(dir / "config.json", settings);
  return do_attack(cfg, session, original, start, target, dir, out);
}

int cmd_run(const Flags& f, std::ostream& out) {
  const json settings = effective_settings(f);
  const ExperimentConfig cfg = config_from_settings(settings);
  const fs::path dir = require(f.out, "--out");
  const auto backend = open_oracle(require(cfg.oracle, "--oracle"));
  const Image original = load_png(require(f.original, "--original"));
  write_json(dir / "config.json", settings);

  // init and attack use separate sessions, exactly as two separate commands would
  OracleSession init_session(backend);
  const InitOutcome o = do_init(f, cfg, init_session, original);
  write_init_outputs(o, dir);
  if (!o.result.ok()) {
    out << "initialization exhausted after " << o.result.queries << " queries\n";
    return kExitFailure;
  }
  const StartingPoint start = starting_point_from_json(
      starting_point_json(*o.result.start, o.target, o.seed));
  OracleSession attack_session(backend);
  return do_attack(cfg, attack_session, original, start, o.target, dir, out);
}

int cmd_eval(const Flags& f, std::ostream& out) {
  const fs::path dir = require(f.out, "--out");
  json overrides = json::object();
  if (f.oracle) overrides["oracle"] = *f.oracle;
  if (f.surrogate) overrides["surrogate"] = *f.surrogate;
  if (f.donors) overrides["donors_dir"] = *f.donors;
  if (f.strategy) overrides["strategy"] = *f.strategy;
  if (f.budget) overrides["budget"] = *f.budget;
  if (f.seed) overrides["seed"] = *f.seed;
  if (f.candidates) overrides["init"]["candidates"] = *f.candidates;
  if (f.threshold) {
    Flags only_threshold;
    only_threshold.threshold = f.threshold;
    overrides["threshold"] = effective_settings(only_threshold)["threshold"];
  }
  const ExperimentManifest manifest =
      load_manifest(require(f.manifest, "--manifest"), f.config ? fs::path(*f.config) : fs::path(),
                    overrides);
  const Report report = run_experiment(manifest);
  write_json(dir / "config.json", manifest.settings);
  write_report(report, dir);

  out << report.rows.size() << " cases, " << report.summary.successes << " successes";
  if (report.summary.median_queries) out << ", median queries " << *report.summary.median_queries;
  out << "\n";
  return kExitOk;
}

int cmd_serve(const Flags& f, std::ostream& out) {
  const std::string where = require(f.oracle, "--oracle");
  if (where.rfind("http", 0) == 0) throw ValidationError("serve-oracle needs a model file");
  auto backend = std::make_shared<LocalBackend>(load_model(where));

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  OracleServer server(backend);
  const int port = server.bind(f.host, f.port);
  out << "listening on http://" << f.host << ":" << port << std::endl;
  std::thread listener([&server] { server.listen(); });
  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  listener.join();
  pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Copy-and-paste starting points for label-only boundary attacks", "patchstart"};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&f](CLI::App* sub) {
    sub->add_option("--config", f.config, "Config file (TOML-style key/value or .json)");
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--seed", f.seed, "Global seed");
  };
  auto add_oracle = [&f](CLI::App* sub) {
    sub->add_option("--oracle", f.oracle, "Oracle model file or http:// endpoint");
  };
  auto add_init = [&f](CLI::App* sub) {
    sub->add_option("--surrogate", f.surrogate, "Surrogate model file");
    sub->add_option("--donors", f.donors, "Donor directory (<label>/<name>.png)");
    sub->add_option("--original", f.original, "Image under attack (PNG)");
    sub->add_option("--target-class", f.target_class, "Adversarial target label");
    sub->add_option("--candidates", f.candidates, "Copy-paste candidates per round (default 50)");
    sub->add_option("--strategy", f.strategy, "copy_paste | closest_image");
  };
  auto add_attack = [&f](CLI::App* sub) {
    sub->add_option("--budget", f.budget, "Total query budget, initialization included");
    sub->add_option("--threshold", f.threshold, "Success l2 distance, or 'auto'");
  };

  CLI::App* saliency = app.add_subcommand("saliency", "Write the saliency patch mask of an image");
  add_common(saliency);
  saliency->add_option("--surrogate", f.surrogate, "Surrogate model file");
  saliency->add_option("--original", f.original, "Donor image (PNG)");
  saliency->add_option("--target-class", f.target_class, "Class whose score is differentiated");

  CLI::App* init = app.add_subcommand("init", "Synthesize a starting point");
  add_common(init);
  add_oracle(init);
  add_init(init);

  CLI::App* attack = app.add_subcommand("attack", "Run the boundary attack from a starting point");
  add_common(attack);
  add_oracle(attack);
  attack->add_option("--original", f.original, "Image under attack (PNG)");
  attack->add_option("--start", f.start, "Starting point sidecar (start.json)");
  attack->add_option("--target-class", f.target_class, "Adversarial target label");
  add_attack(attack);

  CLI::App* run = app.add_subcommand("run", "init followed by attack");
  add_common(run);
  add_oracle(run);
  add_init(run);
  add_attack(run);

  CLI::App* eval = app.add_subcommand("eval", "Run a manifest and write a report");
  add_common(eval);
  add_oracle(eval);
  eval->add_option("--manifest", f.manifest, "Cases, JSON Lines");
  eval->add_option("--surrogate", f.surrogate, "Surrogate model file");
  eval->add_option("--donors", f.donors, "Donor directory");
  eval->add_option("--strategy", f.strategy, "copy_paste | closest_image");
  add_attack(eval);
  eval->add_option("--candidates", f.candidates, "Copy-paste candidates per round");

  CLI::App* serve = app.add_subcommand("serve-oracle", "Serve a model over HTTP");
  add_oracle(serve);
  serve->add_option("--host", f.host, "Bind address (default 127.0.0.1)");
  serve->add_option("--port", f.port, "Port (default 8080, 0 picks a free one)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*saliency) return cmd_saliency(f, out);
    if (*init) return cmd_init(f, out);
    if (*attack) return cmd_attack(f, out);
    if (*run) return cmd_run(f, out);
    if (*eval) return cmd_eval(f, out);
    if (*serve) return cmd_serve(f, out);
  } catch (const ExtractionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const GenerationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace patchstart
