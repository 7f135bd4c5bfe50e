#include "patchstart/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "patchstart/errors.hpp"
#include "patchstart/fsutil.hpp"
#include "patchstart/png_codec.hpp"
#include "patchstart/records.hpp"
#include "patchstart/rng.hpp"

namespace patchstart {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string case_name(std::size_t line) { return "case " + std::to_string(line); }

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json optional_json(const std::optional<std::uint64_t>& v) { return v ? json(*v) : json(nullptr); }
json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json optional_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

struct CaseOutput {
  CaseRow row;
  json trace;
};

struct SharedInputs {
  std::shared_ptr<const OracleBackend> backend;
  std::optional<Model> surrogate;
  std::vector<LabeledImage> donors;
};

CaseOutput run_case(const ManifestCase& c, const ExperimentConfig& cfg, const SharedInputs& in) {
  CaseOutput out;
  out.row.case_id = c.id;
  const std::uint64_t seed = case_seed(cfg.seed, c.id);
  OracleSession session(in.backend);
  try {
    const Image original = load_png(c.original);
    InitResult init;
    if (cfg.strategy == Strategy::copy_paste) {
      init = copy_paste_init(original, c.target_label, in.donors, *in.surrogate, session, cfg.init,
                             mix_seed(seed, 1));
    } else {
      init = closest_image_init(original, in.donors, c.target_label, session);
    }
    out.row.init_queries = init.queries;
    out.row.queries_used = init.queries;
    if (!init.ok()) {
      out.row.error = "initialization exhausted after " + std::to_string(init.queries) + " queries";
      out.row.session_queries = session.query_count();
      return out;
    }
    out.row.provenance = to_string(init.start->provenance);

    AttackConfig attack = cfg.attack;
    attack.budget = cfg.budget;
    attack.threshold = cfg.threshold_for(original.shape());
    attack.seed = mix_seed(seed, 2);
    const AttackTrace trace = run_attack(session, original, *init.start, c.target_label, attack);

    json echo = attack_config_json(attack);
    echo["budget"] = attack.budget;
    echo["threshold"] = attack.threshold;
    echo["seed"] = attack.seed;
    out.trace = trace_json(trace, echo);
    out.trace["case_id"] = c.id;

    out.row.queries_used = trace.queries_used;
    out.row.success_query = trace.success_query;
    out.row.final_distance = trace.best_distance;
    if (trace.error) out.row.error = trace.error->message;
  } catch (const std::exception& e) {
    out.row.error = e.what();
  }
  out.row.session_queries = session.query_count();
  if (!out.row.error && out.row.session_queries != out.row.queries_used) {
    out.row.error = "query accounting mismatch: session counted " +
                    std::to_string(out.row.session_queries) + ", trace reports " +
                    std::to_string(out.row.queries_used);
  }
  return out;
}

}  // namespace

std::vector<ManifestCase> load_cases(const fs::path& path, std::optional<std::size_t> num_classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  std::vector<ManifestCase> cases;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + " (" +
                              case_name(cases.size()) + ")";
    ManifestCase c;
    c.id = cases.size();
    try {
      const json j = json::parse(line);
      c.original = j.at("original").get<std::string>();
      c.true_label = j.at("true_label").get<Label>();
      c.target_label = j.at("target_label").get<Label>();
    } catch (const json::exception& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (c.original.is_relative()) c.original = (base / c.original).lexically_normal();
    if (c.target_label == c.true_label) {
      throw ValidationError(where + ": target_label equals true_label " +
                            std::to_string(c.true_label) + " (attacks are targeted)");
    }
    if (c.true_label < 0 || c.target_label < 0 ||
        (num_classes && (static_cast<std::size_t>(c.true_label) >= *num_classes ||
                         static_cast<std::size_t>(c.target_label) >= *num_classes))) {
      throw ValidationError(where + ": label out of range");
    }
    if (!fs::exists(c.original)) {
      throw ValidationError(where + ": image not found: " + c.original.string());
    }
    try {
      (void)load_png(c.original);
    } catch (const Error& e) {
      throw ValidationError(where + ": " + e.what());
    }
    cases.push_back(std::move(c));
  }
  return cases;
}

ExperimentManifest load_manifest(const fs::path& manifest_path, const fs::path& config_path,
                                 const json& overrides) {
  ExperimentManifest m;
  m.settings = default_settings();
  if (!config_path.empty()) {
    json file = parse_config_file(config_path);
    resolve_paths(file, config_path.parent_path());
    merge_settings(m.settings, file);
  }
  merge_settings(m.settings, overrides);
  m.config = config_from_settings(m.settings);
  if (m.config.oracle.empty()) throw ValidationError("config key 'oracle' is required");
  const auto backend = open_oracle(m.config.oracle);
  m.cases = load_cases(manifest_path, backend->num_classes());
  for (const auto& c : m.cases) {
    const Image img = load_png(c.original);
    if (img.shape() != backend->input_shape()) {
      throw ValidationError(case_name(c.id) + ": image " + img.shape().str() +
                            " does not match oracle input " + backend->input_shape().str());
    }
  }
  return m;
}

std::vector<LabeledImage> load_donors(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("donor directory not found: " + dir.string());
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  std::vector<LabeledImage> donors;
  for (const auto& cd : class_dirs) {
    Label label;
    try {
      std::size_t used = 0;
      label = std::stoi(cd.filename().string(), &used);
      if (used != cd.filename().string().size() || label < 0) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ValidationError("donor subdirectory '" + cd.filename().string() +
                            "' is not a class label");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(cd)) {
      if (entry.is_regular_file() && entry.path().extension() == ".png") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      donors.push_back({load_png(f), label, cd.filename().string() + "/" + f.filename().string()});
    }
  }
  return donors;
}

Summary summarize(const std::vector<CaseRow>& rows, const std::vector<std::uint64_t>& marks) {
  for (std::size_t i = 1; i < marks.size(); ++i) {
    if (marks[i] <= marks[i - 1]) throw InvalidArgument("summarize: marks must be strictly increasing");
  }
  Summary s;
  s.marks = marks;
  std::vector<std::uint64_t> succ;
  for (const auto& r : rows) {
    if (r.success_query) succ.push_back(*r.success_query);
  }
  std::sort(succ.begin(), succ.end());
  s.successes = succ.size();
  s.failures = rows.size() - succ.size();
  for (const auto q : marks) {
    if (rows.empty()) {
      s.success_rates.push_back(std::nullopt);
      continue;
    }
    const auto hits = std::upper_bound(succ.begin(), succ.end(), q) - succ.begin();
    s.success_rates.push_back(static_cast<double>(hits) / static_cast<double>(rows.size()));
  }
  if (!succ.empty()) {
    const std::size_t n = succ.size();
    s.median_queries = n % 2 == 1 ? static_cast<double>(succ[n / 2])
                                  : 0.5 * (static_cast<double>(succ[n / 2 - 1]) +
                                           static_cast<double>(succ[n / 2]));
  }
  return s;
}

std::uint64_t case_seed(std::uint64_t global_seed, std::size_t case_id) {
  return mix_seed(global_seed, static_cast<std::uint64_t>(case_id));
}

Report run_experiment(const ExperimentManifest& manifest,
                      std::shared_ptr<const OracleBackend> backend) {
  const ExperimentConfig& cfg = manifest.config;
  Report report;
  report.config = manifest.settings;
  report.seed = cfg.seed;

  if (!manifest.cases.empty()) {
    SharedInputs in;
    in.backend = backend ? std::move(backend) : open_oracle(cfg.oracle);
    in.donors = load_donors(cfg.donors_dir);
    if (cfg.strategy == Strategy::copy_paste) {
      if (cfg.surrogate.empty()) throw ValidationError("copy_paste needs config key 'surrogate'");
      in.surrogate = load_model(cfg.surrogate);
      if (in.surrogate->input_shape() != in.backend->input_shape()) {
        throw ValidationError("surrogate input " + in.surrogate->input_shape().str() +
                              " does not match oracle input " + in.backend->input_shape().str());
      }
      if (const auto* local = dynamic_cast<const LocalBackend*>(in.backend.get())) {
        if (model_to_json(local->model()) == model_to_json(*in.surrogate)) {
          throw ValidationError("surrogate and oracle share parameters; use a distinct surrogate");
        }
      }
    }

    std::vector<CaseOutput> outputs(manifest.cases.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < manifest.cases.size(); i = next++) {
        outputs[i] = run_case(manifest.cases[i], cfg, in);
      }
    };
    const std::size_t n_workers =
        std::max<std::size_t>(1, std::min(cfg.workers, manifest.cases.size()));
    if (n_workers == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    std::sort(outputs.begin(), outputs.end(),
              [](const CaseOutput& a, const CaseOutput& b) { return a.row.case_id < b.row.case_id; });
    for (auto& o : outputs) {
      report.rows.push_back(std::move(o.row));
      report.traces.push_back(std::move(o.trace));
    }
  }
  report.summary = summarize(report.rows, cfg.marks);
  return report;
}

json report_json(const Report& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"case_id", r.case_id},
                    {"provenance", optional_json(r.provenance)},
                    {"init_queries", r.init_queries},
                    {"success_query", optional_json(r.success_query)},
                    {"final_distance", optional_json(r.final_distance)},
                    {"queries_used", r.queries_used},
                    {"session_queries", r.session_queries},
                    {"error", optional_json(r.error)}});
  }
  json rates = json::array();
  for (const auto& v : report.summary.success_rates) rates.push_back(optional_json(v));
  return {{"config", report.config},
          {"seed", report.seed},
          {"rows", std::move(rows)},
          {"summary",
           {{"marks", report.summary.marks},
            {"success_rates", std::move(rates)},
            {"median_queries", optional_json(report.summary.median_queries)},
            {"median_over", "successful cases"},
            {"successes", report.summary.successes},
            {"failures", report.summary.failures}}}};
}

std::string report_csv(const Report& report) {
  std::ostringstream out;
  out << "case_id,provenance,init_queries,success_query,final_distance\n";
  for (const auto& r : report.rows) {
    out << r.case_id << ',' << r.provenance.value_or("") << ',' << r.init_queries << ',';
    if (r.success_query) out << *r.success_query;
    out << ',';
    if (r.final_distance) out << format_real(*r.final_distance);
    out << '\n';
  }
  return out.str();
}

std::string success_curve_csv(const Report& report) {
  std::ostringstream out;
  out << "mark,success_rate\n";
  for (std::size_t i = 0; i < report.summary.marks.size(); ++i) {
    out << report.summary.marks[i] << ',';
    if (report.summary.success_rates[i]) out << format_real(*report.summary.success_rates[i]);
    out << '\n';
  }
  return out.str();
}

void write_report(const Report& report, const fs::path& out_dir) {
  const std::string strategy = report.config.value("strategy", "unknown");
  for (std::size_t i = 0; i < report.traces.size(); ++i) {
    if (report.traces[i].is_null()) continue;
    write_file_atomic(out_dir / "traces" / ("case_" + std::to_string(report.rows[i].case_id) + ".json"),
                      report.traces[i].dump(2) + "\n");
  }
  write_file_atomic(out_dir / "report.csv", report_csv(report));
  write_file_atomic(out_dir / ("success_curve_" + strategy + ".csv"), success_curve_csv(report));
  write_file_atomic(out_dir / "report.json", report_json(report).dump(2) + "\n");
}

}  // namespace patchstart
