// Command-line front end: experiments, reports, dataset utilities and the
// annotation server.
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "spe/dataset.hpp"
#include "spe/error.hpp"
#include "spe/features.hpp"
#include "spe/harness.hpp"
#include "spe/http.hpp"
#include "spe/pairing.hpp"
#include "spe/service.hpp"
#include "spe/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw spe::IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw spe::IoError("cannot write " + path.string());
  out << text;
  if (!out) throw spe::IoError("write failed for " + path.string());
}

struct ExperimentArgs {
  std::string config;
  std::string out = ".";
  std::vector<std::string> projects;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

void add_experiment_flags(CLI::App* cmd, ExperimentArgs& args) {
  cmd->add_option("--config", args.config, "experiment config (JSON)")->required();
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--projects", args.projects, "restrict to these project names")->delimiter(',');
  cmd->add_option("--seed", args.seed, "base seed override");
  cmd->add_option("--threads", args.threads, "worker threads override");
}

// Relative paths in the config resolve against the config file's directory.
spe::ExperimentConfig load_config(const ExperimentArgs& args) {
  const fs::path config_path(args.config);
  auto config = spe::ExperimentConfig::from_json(read_file(config_path));
  const fs::path base = config_path.parent_path();
  for (auto& p : config.projects) {
    if (fs::path(p).is_relative()) p = (base / p).lexically_normal().string();
  }
  if (config.embeddings_dir && fs::path(*config.embeddings_dir).is_relative()) {
    config.embeddings_dir = (base / *config.embeddings_dir).lexically_normal().string();
  }
  if (!args.projects.empty()) {
    std::vector<std::string> kept;
    for (const auto& name : args.projects) {
      bool found = false;
      for (const auto& p : config.projects) {
        if (fs::path(p).stem().string() == name) {
          kept.push_back(p);
          found = true;
        }
      }
      if (!found) throw spe::NotFoundError("project '" + name + "' is not in the config");
    }
    config.projects = kept;
  }
  if (args.seed) config.base_seed = *args.seed;
  if (args.threads) config.threads = *args.threads;
  config.validate();
  return config;
}

ordered_json errors_json(const spe::ExperimentReport& report) {
  ordered_json list = ordered_json::array();
  for (const auto& e : report.errors) list.push_back({{"project", e.project}, {"code", e.code}, {"message", e.message}});
  return list;
}

// Project failures are recorded in the report and also make the exit code nonzero.
int finish(const spe::ExperimentReport& report, ordered_json written) {
  ordered_json summary;
  summary["written"] = std::move(written);
  summary["entries"] = report.entries.size();
  summary["errors"] = errors_json(report);
  std::cout << summary.dump(2) << "\n";
  if (!report.errors.empty()) {
    ordered_json err;
    err["error"] = {{"code", "project_errors"},
                    {"message", std::to_string(report.errors.size()) + " project(s) failed"},
                    {"projects", errors_json(report)}};
    std::cerr << err.dump() << "\n";
    return 3;
  }
  return 0;
}

int cmd_run(const ExperimentArgs& args) {
  const auto config = load_config(args);
  const auto report = spe::run_experiment(config);
  const fs::path out(args.out);
  fs::create_directories(out);
  ordered_json written = ordered_json::array();
  write_file(out / "report.json", report.to_json());
  written.push_back((out / "report.json").string());
  if (!report.empty()) {
    spe::emit_report(report, spe::ReportFormat::delimited_table, out / "report.csv");
    spe::emit_report(report, spe::ReportFormat::markdown, out / "report.md");
    written.push_back((out / "report.csv").string());
    written.push_back((out / "report.md").string());
  }
  return finish(report, written);
}

int cmd_sweep(const ExperimentArgs& args) {
  const auto config = load_config(args);
  spe::ExperimentReport report;
  const auto curve = spe::sweep_k(config, &report);
  const fs::path out(args.out);
  fs::create_directories(out);
  write_file(out / "sweep.csv", spe::render_sweep(curve));
  write_file(out / "sweep_report.json", report.to_json());
  return finish(report, {(out / "sweep.csv").string(), (out / "sweep_report.json").string()});
}

int cmd_report(const std::string& input, const std::string& format, const std::string& out, bool published) {
  const auto report = spe::ExperimentReport::from_json(read_file(input));
  const auto fmt = spe::parse_report_format(format);
  const auto text = spe::render_report(report, fmt, published);
  if (out.empty() || out == "-") {
    std::cout << text;
    return 0;
  }
  fs::path target(out);
  if (fs::is_directory(target)) target /= fmt == spe::ReportFormat::markdown ? "report.md" : "report.csv";
  write_file(target, text);
  std::cout << ordered_json{{"written", target.string()}}.dump() << "\n";
  return 0;
}

int cmd_summarize(const std::vector<std::string>& paths) {
  ordered_json all = ordered_json::array();
  for (const auto& path : paths) {
    const auto dataset = spe::load_project(path);
    const auto s = spe::summarize(dataset);
    ordered_json j;
    j["project"] = dataset.name();
    j["size"] = s.n;
    j["labeled"] = s.labeled;
    j["min_sp"] = s.min_sp.to_string();
    j["max_sp"] = s.max_sp.to_string();
    j["splits"] = {{"train", s.train}, {"validation", s.validation}, {"test", s.test}, {"unassigned", s.unassigned}};
    all.push_back(j);
  }
  std::cout << (all.size() == 1 ? all[0] : all).dump(2) << "\n";
  return 0;
}

int cmd_pairs(const std::string& path, std::size_t k, std::uint64_t seed, bool annotation, const std::string& out) {
  const auto dataset = spe::load_project(path);
  std::string text;
  ordered_json summary;
  if (annotation) {
    const auto pairs = spe::generate_annotation_pairs(dataset.items(), k, seed);
    text = spe::serialize_annotation_pairs(pairs);
    summary["pairs"] = pairs.size();
  } else {
    const auto labeled = dataset.select({spe::Split::train, spe::Split::validation, spe::Split::test,
                                         spe::Split::unassigned});
    const auto set = spe::simulate_pairs(labeled, k, seed);
    text = spe::serialize_pairs(set.pairs);
    summary["pairs"] = set.pairs.size();
    summary["dropped"] = set.dropped;
    summary["shortfall"] = set.shortfall;
  }
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_file(out, text);
    std::cerr << summary.dump() << "\n";
  }
  return 0;
}

int cmd_featurize(const std::string& path, std::size_t dim, const std::string& out) {
  const auto dataset = spe::load_project(path);
  std::vector<std::string> corpus;
  for (const auto& item : dataset.items()) corpus.push_back(spe::item_text(item));
  const auto model = spe::HashedTfidfModel::fit(corpus, dim);
  const auto emb = spe::embed_items(model, dataset.items());
  spe::save_embeddings(emb, out);
  std::cout << ordered_json{{"written", out}, {"items", emb.size()}, {"dim", emb.dim()}}.dump() << "\n";
  return 0;
}

int cmd_synth(const spe::SyntheticSpec& spec, const std::string& out, const std::string& name) {
  const auto project = spe::make_synthetic_project(spec);
  const fs::path dir(out);
  fs::create_directories(dir);
  const spe::ProjectDataset renamed(name, project.dataset.items());
  spe::save_project(renamed, dir / (name + ".csv"), spe::DatasetFormat::delimited_table);
  spe::save_embeddings(project.embeddings, dir / (name + ".embeddings.jsonl"));
  std::cout << ordered_json{{"dataset", (dir / (name + ".csv")).string()},
                            {"embeddings", (dir / (name + ".embeddings.jsonl")).string()}}
                   .dump()
            << "\n";
  return 0;
}

spe::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const std::string& listen, const std::vector<std::string>& datasets, const std::string& data_dir,
              std::size_t dim, double timeout) {
  spe::ServiceOptions options;
  options.data_dir = data_dir;
  options.feature_dim = dim;
  options.training_timeout_seconds = timeout;
  spe::AnnotationService service(options);
  for (const auto& spec : datasets) {
    // name=path, or a bare path named after its file stem.
    const auto eq = spec.find('=');
    const fs::path path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    auto dataset = spe::load_project(path);
    if (eq != std::string::npos) dataset = spe::ProjectDataset(spec.substr(0, eq), dataset.items());
    service.register_dataset(std::move(dataset));
  }
  const auto restored = service.restore();

  spe::HttpServer server(service);
  const auto address = spe::parse_listen(listen);
  const int port = server.bind(address);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << ordered_json{{"listening", address.host + ":" + std::to_string(port)},
                            {"datasets", service.dataset_names()},
                            {"restored_sessions", restored}}
                   .dump()
            << std::endl;
  server.serve();
  g_server = nullptr;
  return 0;
}

void print_error(const std::string& code, const std::string& message) {
  std::cerr << ordered_json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Comparative story point estimation: experiments, reports and annotation service"};
  app.require_subcommand(1);

  ExperimentArgs run_args;
  auto* run = app.add_subcommand("run", "run the configured experiments and write report.{json,csv,md}");
  add_experiment_flags(run, run_args);

  ExperimentArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep-k", "mean r_s per comparative model and k; writes sweep.csv");
  add_experiment_flags(sweep, sweep_args);

  std::string report_input, report_format = "markdown", report_out;
  bool no_published = false;
  auto* report = app.add_subcommand("report", "render a saved report.json");
  report->add_option("--input", report_input, "report.json from run or sweep-k")->required();
  report->add_option("--format", report_format, "markdown or delimited-table");
  report->add_option("--out", report_out, "output file or directory (stdout when omitted)");
  report->add_flag("--no-published", no_published, "omit published reference columns");

  std::vector<std::string> summarize_paths;
  auto* summarize = app.add_subcommand("summarize", "size and story point range of datasets");
  summarize->add_option("datasets", summarize_paths)->required();

  std::string pairs_path, pairs_out;
  std::size_t pairs_k = 1;
  std::uint64_t pairs_seed = 0;
  bool pairs_annotation = false;
  auto* pairs = app.add_subcommand("pairs", "sample comparative pairs from a dataset");
  pairs->add_option("dataset", pairs_path)->required();
  pairs->add_option("--k", pairs_k, "partners per item");
  pairs->add_option("--seed", pairs_seed);
  pairs->add_flag("--annotation", pairs_annotation, "unlabeled pairs over every item");
  pairs->add_option("--out", pairs_out, "output JSON-lines file (stdout when omitted)");

  std::string feat_path, feat_out;
  std::size_t feat_dim = spe::kDefaultFeatureDim;
  auto* featurize = app.add_subcommand("featurize", "write hashed TF-IDF vectors as an embeddings file");
  featurize->add_option("dataset", feat_path)->required();
  featurize->add_option("--dim", feat_dim);
  featurize->add_option("--out", feat_out)->required();

  spe::SyntheticSpec synth_spec;
  std::string synth_out, synth_name = "synthetic";
  auto* synth = app.add_subcommand("synth", "write the synthetic linear-effort project and its embeddings");
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--name", synth_name);
  synth->add_option("--n", synth_spec.n);
  synth->add_option("--dim", synth_spec.dim);
  synth->add_option("--levels", synth_spec.levels);
  synth->add_option("--seed", synth_spec.seed);

  std::string listen = "127.0.0.1:8080", data_dir = "sessions";
  std::vector<std::string> serve_datasets;
  std::size_t serve_dim = spe::kDefaultFeatureDim;
  double serve_timeout = 60.0;
  auto* serve = app.add_subcommand("serve", "run the annotation HTTP service");
  serve->add_option("--listen", listen, "host:port");
  serve->add_option("--dataset", serve_datasets, "name=path or path; repeatable")->required();
  serve->add_option("--data-dir", data_dir, "session journal directory");
  serve->add_option("--feature-dim", serve_dim);
  serve->add_option("--training-timeout", serve_timeout, "seconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage_error", e.what());
    return 2;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*sweep) return cmd_sweep(sweep_args);
    if (*report) return cmd_report(report_input, report_format, report_out, !no_published);
    if (*summarize) return cmd_summarize(summarize_paths);
    if (*pairs) return cmd_pairs(pairs_path, pairs_k, pairs_seed, pairs_annotation, pairs_out);
    if (*featurize) return cmd_featurize(feat_path, feat_dim, feat_out);
    if (*synth) return cmd_synth(synth_spec, synth_out, synth_name);
    if (*serve) return cmd_serve(listen, serve_datasets, data_dir, serve_dim, serve_timeout);
  } catch (const spe::Error& e) {
    print_error(e.code(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal_error", e.what());
    return 1;
  }
  return 0;
}
