#include "spe/harness.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>
#include <unordered_set>
#include <variant>

#include <json.hpp>

#include "spe/error.hpp"
#include "spe/metrics.hpp"
#include "spe/pairing.hpp"
#include "spe/random.hpp"

namespace spe {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(ModelKind model) {
  switch (model) {
    case ModelKind::regression: return "regression";
    case ModelKind::comparative_noval: return "comparative-noval";
    case ModelKind::comparative_val: return "comparative-val";
    case ModelKind::svm_comparative: return "svm-comparative";
  }
  return "regression";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "regression") return ModelKind::regression;
  if (text == "comparative-noval") return ModelKind::comparative_noval;
  if (text == "comparative-val") return ModelKind::comparative_val;
  if (text == "svm-comparative") return ModelKind::svm_comparative;
  throw ValidationError("unknown model '" + std::string(text) + "'");
}

std::string_view to_string(FeatureSource source) {
  return source == FeatureSource::embedding_files ? "embedding-files" : "built-in-tfidf";
}

FeatureSource parse_feature_source(std::string_view text) {
  if (text == "embedding-files") return FeatureSource::embedding_files;
  if (text == "built-in-tfidf") return FeatureSource::builtin_tfidf;
  throw ValidationError("unknown feature source '" + std::string(text) + "'");
}

void ExperimentConfig::validate() const {
  const bool any_comparative = std::any_of(models.begin(), models.end(), is_comparative);
  if (any_comparative && k_values.empty()) throw ValidationError("k_values must be non-empty for comparative models");
  for (std::size_t i = 0; i < k_values.size(); ++i) {
    if (k_values[i] == 0) throw ValidationError("k values must be positive");
    if (std::find(k_values.begin(), k_values.begin() + i, k_values[i]) != k_values.begin() + i) {
      throw ValidationError("duplicate k value " + std::to_string(k_values[i]));
    }
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (std::find(models.begin(), models.begin() + i, models[i]) != models.begin() + i) {
      throw ValidationError("duplicate model '" + std::string(to_string(models[i])) + "'");
    }
  }
  if (feature_dim == 0) throw ValidationError("feature_dim must be positive");
  if (threads == 0) throw ValidationError("threads must be positive");
  for (const auto& [key, overrides] : train_overrides) {
    if (key != "all") parse_model_kind(key);
  }
  for (auto m : models) train_config_for(*this, m, base_seed);
}

ExperimentConfig ExperimentConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("experiment config: ") + e.what(), 1);
  }
  if (!j.is_object()) throw ValidationError("experiment config must be a JSON object");
  ExperimentConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "projects") c.projects = value.get<std::vector<std::string>>();
      else if (key == "feature_source") c.feature_source = parse_feature_source(value.get<std::string>());
      else if (key == "embeddings_dir") c.embeddings_dir = value.is_null() ? std::nullopt : std::optional(value.get<std::string>());
      else if (key == "feature_dim") c.feature_dim = value.get<std::size_t>();
      else if (key == "models") {
        c.models.clear();
        for (const auto& m : value) c.models.push_back(parse_model_kind(m.get<std::string>()));
      } else if (key == "k_values") c.k_values = value.get<std::vector<std::size_t>>();
      else if (key == "repeats_regression") c.repeats_regression = value.get<std::size_t>();
      else if (key == "repeats_comparative") c.repeats_comparative = value.get<std::size_t>();
      else if (key == "base_seed") c.base_seed = value.get<std::uint64_t>();
      else if (key == "threads") c.threads = value.get<std::size_t>();
      else if (key == "train_overrides") {
        for (const auto& [model, overrides] : value.items()) c.train_overrides[model] = overrides.dump();
      } else {
        throw ValidationError("unknown experiment config field '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string ExperimentConfig::to_json() const {
  ordered_json j;
  j["projects"] = projects;
  j["feature_source"] = to_string(feature_source);
  j["embeddings_dir"] = embeddings_dir ? json(*embeddings_dir) : json(nullptr);
  j["feature_dim"] = feature_dim;
  std::vector<std::string> names;
  for (auto m : models) names.emplace_back(to_string(m));
  j["models"] = names;
  j["k_values"] = k_values;
  j["repeats_regression"] = repeats_regression;
  j["repeats_comparative"] = repeats_comparative;
  j["base_seed"] = base_seed;
  ordered_json overrides = ordered_json::object();
  for (const auto& [model, text] : train_overrides) overrides[model] = ordered_json::parse(text);
  j["train_overrides"] = overrides;
  j["threads"] = threads;
  return j.dump(2);
}

TrainConfig train_config_for(const ExperimentConfig& config, ModelKind model, std::uint64_t seed) {
  TrainConfig tc;
  switch (model) {
    case ModelKind::regression: tc = TrainConfig::regression_defaults(); break;
    case ModelKind::comparative_noval: tc = TrainConfig::comparative_defaults(false); break;
    case ModelKind::comparative_val: tc = TrainConfig::comparative_defaults(true); break;
    case ModelKind::svm_comparative: tc = TrainConfig::svm_defaults(); break;
  }
  if (auto it = config.train_overrides.find("all"); it != config.train_overrides.end()) {
    tc = apply_train_config_overrides(tc, it->second);
  }
  if (auto it = config.train_overrides.find(std::string(to_string(model))); it != config.train_overrides.end()) {
    tc = apply_train_config_overrides(tc, it->second);
  }
  tc.seed = seed;
  const LossKind expected = model == ModelKind::regression        ? LossKind::mae_regression
                            : model == ModelKind::svm_comparative ? LossKind::hinge_svm_difference
                                                                   : LossKind::hinge_comparative;
  if (tc.loss != expected) throw ValidationError("overrides may not change the loss of " + std::string(to_string(model)));
  if (model == ModelKind::comparative_val && !tc.early_stopping) {
    throw ValidationError("comparative-val requires early stopping");
  }
  if (model != ModelKind::comparative_val && tc.early_stopping) {
    throw ValidationError(std::string(to_string(model)) + " trains without a validation set");
  }
  return tc;
}

std::filesystem::path embeddings_path_for(const ExperimentConfig& config, const std::string& project_path) {
  const std::filesystem::path dataset(project_path);
  const std::filesystem::path dir = config.embeddings_dir ? std::filesystem::path(*config.embeddings_dir)
                                                          : dataset.parent_path();
  return dir / (dataset.stem().string() + ".embeddings.jsonl");
}

namespace {

// Everything a job needs from one loaded project.
struct PreparedProject {
  std::string name;
  std::vector<BacklogItem> train;
  std::vector<BacklogItem> validation;
  std::vector<BacklogItem> train_val;
  std::vector<BacklogItem> test;
  std::vector<std::string> test_ids;
  std::vector<double> test_truth;
  std::unordered_set<std::string> test_id_set;
  std::unique_ptr<EmbeddingMatrix> embeddings;
};

PreparedProject prepare_project(const ExperimentConfig& config, const std::string& path) {
  const auto dataset = load_project(path);
  PreparedProject p;
  p.name = dataset.name();
  p.train = dataset.select({Split::train});
  p.validation = dataset.select({Split::validation});
  p.train_val = dataset.select({Split::train, Split::validation});
  p.test = dataset.select({Split::test});
  if (p.test.size() < 2) throw ValidationError("project '" + p.name + "' has fewer than 2 labeled test items");
  if (p.train_val.size() < 2) {
    throw ValidationError("project '" + p.name + "' has fewer than 2 labeled training items");
  }
  const bool needs_val =
      std::find(config.models.begin(), config.models.end(), ModelKind::comparative_val) != config.models.end();
  if (needs_val && (p.train.size() < 2 || p.validation.size() < 2)) {
    throw ValidationError("project '" + p.name + "' needs at least 2 labeled train and validation items");
  }
  for (const auto& item : p.test) {
    p.test_ids.push_back(item.id);
    p.test_truth.push_back(item.sp());
    p.test_id_set.insert(item.id);
  }

  if (config.feature_source == FeatureSource::embedding_files) {
    p.embeddings = std::make_unique<EmbeddingMatrix>(load_embeddings(embeddings_path_for(config, path)));
    std::vector<std::string> needed;
    for (const auto* split : {&p.train_val, &p.test}) {
      for (const auto& item : *split) needed.push_back(item.id);
    }
    if (const auto missing = p.embeddings->missing(needed); !missing.empty()) {
      throw ValidationError("embeddings for '" + p.name + "' miss " + std::to_string(missing.size()) +
                            " item(s), first '" + missing.front() + "'");
    }
  } else {
    // The featurizer only sees texts the models are allowed to train on.
    std::vector<std::string> corpus;
    for (const auto& item : p.train_val) corpus.push_back(item_text(item));
    const auto model = HashedTfidfModel::fit(corpus, config.feature_dim);
    auto emb = std::make_unique<EmbeddingMatrix>(model.dim());
    for (const auto* split : {&p.train_val, &p.test}) {
      for (const auto& item : *split) emb->add(item.id, model.embed(item_text(item)));
    }
    p.embeddings = std::move(emb);
  }
  return p;
}

struct Job {
  std::size_t project = 0;
  ModelKind model = ModelKind::regression;
  std::size_t k = 0;
  std::size_t repeat = 0;
};

void check_hygiene(const PreparedProject& p, std::span<const ComparativePair> pairs) {
  for (const auto& pair : pairs) {
    if (p.test_id_set.contains(pair.a) || p.test_id_set.contains(pair.b)) {
      throw std::logic_error("test item leaked into training pairs of '" + p.name + "'");
    }
  }
}

void check_hygiene(const PreparedProject& p, std::span<const BacklogItem> items) {
  for (const auto& item : items) {
    if (p.test_id_set.contains(item.id)) {
      throw std::logic_error("test item leaked into the training set of '" + p.name + "'");
    }
  }
}

RepeatResult run_job(const ExperimentConfig& config, const PreparedProject& p, const Job& job) {
  RepeatResult r;
  r.seed = config.base_seed + job.repeat;
  const TrainConfig tc = train_config_for(config, job.model, r.seed);
  const EmbeddingMatrix& emb = *p.embeddings;
  TrainedModel model;

  switch (job.model) {
    case ModelKind::regression: {
      check_hygiene(p, p.train_val);
      model = train_regression(p.train_val, emb, tc);
      r.train_size = p.train_val.size();
      break;
    }
    case ModelKind::comparative_noval:
    case ModelKind::svm_comparative: {
      const PairSet pairs = simulate_pairs(p.train_val, job.k, r.seed);
      check_hygiene(p, pairs.pairs);
      model = job.model == ModelKind::svm_comparative ? train_svm_comparative(pairs.pairs, emb, tc)
                                                      : train_comparative(pairs.pairs, emb, {}, tc);
      r.train_size = pairs.pairs.size();
      r.shortfall = pairs.shortfall;
      break;
    }
    case ModelKind::comparative_val: {
      const PairSet pairs = simulate_pairs(p.train, job.k, r.seed);
      const PairSet val_pairs = simulate_pairs(p.validation, job.k, derive_seed(r.seed, 0x56414cULL));
      check_hygiene(p, pairs.pairs);
      check_hygiene(p, val_pairs.pairs);
      model = train_comparative(pairs.pairs, emb, val_pairs.pairs, tc);
      r.train_size = pairs.pairs.size();
      r.shortfall = pairs.shortfall;
      break;
    }
  }
  r.epochs = model.train_loss.size();
  const auto scores = predict_scores(model, emb, p.test_ids);
  const auto eval = evaluate(scores, p.test_truth, job.model == ModelKind::regression);
  r.pearson = eval.pearson;
  r.spearman = eval.spearman;
  r.mae = eval.mae;
  return r;
}

std::optional<double> mean_of(const std::vector<RepeatResult>& repeats, std::optional<double> RepeatResult::*field,
                              std::size_t* undefined) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : repeats) {
    if (r.*field) {
      sum += *(r.*field);
      ++count;
    } else if (undefined) {
      ++*undefined;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace

std::vector<AverageRow> compute_averages(const std::vector<ReportEntry>& entries) {
  std::vector<AverageRow> rows;
  auto find = [&](ModelKind m, std::size_t k) -> AverageRow* {
    for (auto& row : rows) {
      if (row.model == m && row.k == k) return &row;
    }
    return nullptr;
  };
  for (const auto& e : entries) {
    if (!find(e.model, e.k)) rows.push_back(AverageRow{e.model, e.k, std::nullopt, std::nullopt, std::nullopt, 0});
  }
  for (auto& row : rows) {
    double sums[3] = {0, 0, 0};
    std::size_t counts[3] = {0, 0, 0};
    for (const auto& e : entries) {
      if (e.model != row.model || e.k != row.k) continue;
      ++row.projects;
      const std::optional<double>* fields[3] = {&e.pearson, &e.spearman, &e.mae};
      for (int f = 0; f < 3; ++f) {
        if (*fields[f]) {
          sums[f] += **fields[f];
          ++counts[f];
        }
      }
    }
    if (counts[0]) row.pearson = sums[0] / static_cast<double>(counts[0]);
    if (counts[1]) row.spearman = sums[1] / static_cast<double>(counts[1]);
    if (counts[2]) row.mae = sums[2] / static_cast<double>(counts[2]);
  }
  return rows;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentReport report;
  if (config.models.empty()) return report;

  std::vector<PreparedProject> projects;
  std::vector<std::string> project_names;
  for (const auto& path : config.projects) {
    try {
      projects.push_back(prepare_project(config, path));
    } catch (const Error& e) {
      report.errors.push_back({std::filesystem::path(path).stem().string(), e.code(), e.what()});
    }
  }

  std::vector<Job> jobs;
  for (std::size_t p = 0; p < projects.size(); ++p) {
    for (auto model : config.models) {
      const std::vector<std::size_t> ks = is_comparative(model) ? config.k_values : std::vector<std::size_t>{0};
      const std::size_t repeats = is_comparative(model) ? config.repeats_comparative : config.repeats_regression;
      for (auto k : ks) {
        for (std::size_t r = 0; r < repeats; ++r) jobs.push_back({p, model, k, r});
      }
    }
  }

  using Outcome = std::variant<RepeatResult, ProjectError>;
  std::vector<Outcome> outcomes(jobs.size());
  std::vector<std::exception_ptr> fatal(jobs.size());
  parallel_for(jobs.size(), config.threads, [&](std::size_t i) {
    const auto& job = jobs[i];
    try {
      outcomes[i] = run_job(config, projects[job.project], job);
    } catch (const Error& e) {
      outcomes[i] = ProjectError{projects[job.project].name, e.code(), e.what()};
    } catch (...) {
      fatal[i] = std::current_exception();
    }
  });
  for (const auto& f : fatal) {
    if (f) std::rethrow_exception(f);
  }

  std::vector<bool> failed(projects.size(), false);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (const auto* err = std::get_if<ProjectError>(&outcomes[i]); err && !failed[jobs[i].project]) {
      failed[jobs[i].project] = true;
      report.errors.push_back(*err);
    }
  }

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& job = jobs[i];
    if (failed[job.project]) continue;
    const auto& project = projects[job.project];
    if (report.entries.empty() || report.entries.back().project != project.name ||
        report.entries.back().model != job.model || report.entries.back().k != job.k) {
      ReportEntry e;
      e.project = project.name;
      e.model = job.model;
      e.k = job.k;
      e.n_test = project.test.size();
      report.entries.push_back(std::move(e));
    }
    report.entries.back().repeats.push_back(std::get<RepeatResult>(outcomes[i]));
  }
  for (auto& e : report.entries) {
    e.pearson = mean_of(e.repeats, &RepeatResult::pearson, &e.undefined_pearson);
    e.spearman = mean_of(e.repeats, &RepeatResult::spearman, &e.undefined_spearman);
    e.mae = mean_of(e.repeats, &RepeatResult::mae, nullptr);
  }
  report.averages = compute_averages(report.entries);
  return report;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::string ExperimentReport::to_json() const {
  ordered_json j;
  ordered_json entries_json = ordered_json::array();
  for (const auto& e : entries) {
    ordered_json ej;
    ej["project"] = e.project;
    ej["model"] = to_string(e.model);
    ej["k"] = e.k;
    ej["n_test"] = e.n_test;
    ej["pearson"] = opt(e.pearson);
    ej["spearman"] = opt(e.spearman);
    ej["mae"] = opt(e.mae);
    ej["undefined_pearson"] = e.undefined_pearson;
    ej["undefined_spearman"] = e.undefined_spearman;
    ordered_json reps = ordered_json::array();
    for (const auto& r : e.repeats) {
      ordered_json rj;
      rj["seed"] = r.seed;
      rj["pearson"] = opt(r.pearson);
      rj["spearman"] = opt(r.spearman);
      rj["mae"] = opt(r.mae);
      rj["train_size"] = r.train_size;
      rj["shortfall"] = r.shortfall;
      rj["epochs"] = r.epochs;
      reps.push_back(std::move(rj));
    }
    ej["repeats"] = std::move(reps);
    entries_json.push_back(std::move(ej));
  }
  j["entries"] = std::move(entries_json);
  ordered_json avg = ordered_json::array();
  for (const auto& a : averages) {
    avg.push_back({{"model", to_string(a.model)},
                   {"k", a.k},
                   {"pearson", opt(a.pearson)},
                   {"spearman", opt(a.spearman)},
                   {"mae", opt(a.mae)},
                   {"projects", a.projects}});
  }
  j["averages"] = std::move(avg);
  ordered_json errs = ordered_json::array();
  for (const auto& e : errors) errs.push_back({{"project", e.project}, {"code", e.code}, {"message", e.message}});
  j["errors"] = std::move(errs);
  return j.dump(2) + "\n";
}

ExperimentReport ExperimentReport::from_json(std::string_view text) {
  ExperimentReport report;
  try {
    const auto j = json::parse(text);
    for (const auto& ej : j.at("entries")) {
      ReportEntry e;
      e.project = ej.at("project").get<std::string>();
      e.model = parse_model_kind(ej.at("model").get<std::string>());
      e.k = ej.at("k").get<std::size_t>();
      e.n_test = ej.at("n_test").get<std::size_t>();
      e.pearson = opt_from(ej.at("pearson"));
      e.spearman = opt_from(ej.at("spearman"));
      e.mae = opt_from(ej.at("mae"));
      e.undefined_pearson = ej.at("undefined_pearson").get<std::size_t>();
      e.undefined_spearman = ej.at("undefined_spearman").get<std::size_t>();
      for (const auto& rj : ej.at("repeats")) {
        RepeatResult r;
        r.seed = rj.at("seed").get<std::uint64_t>();
        r.pearson = opt_from(rj.at("pearson"));
        r.spearman = opt_from(rj.at("spearman"));
        r.mae = opt_from(rj.at("mae"));
        r.train_size = rj.at("train_size").get<std::size_t>();
        r.shortfall = rj.at("shortfall").get<std::size_t>();
        r.epochs = rj.at("epochs").get<std::size_t>();
        e.repeats.push_back(r);
      }
      report.entries.push_back(std::move(e));
    }
    for (const auto& ej : j.at("errors")) {
      report.errors.push_back(
          {ej.at("project").get<std::string>(), ej.at("code").get<std::string>(), ej.at("message").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("report: ") + e.what(), 1);
  }
  report.averages = compute_averages(report.entries);
  return report;
}

SweepCurve sweep_from_report(const ExperimentReport& report) {
  SweepCurve curve;
  for (const auto& row : report.averages) {
    if (!is_comparative(row.model)) continue;
    curve[row.model].push_back(CurvePoint{row.k, row.spearman, row.projects});
  }
  for (auto& [model, points] : curve) {
    std::sort(points.begin(), points.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.k < b.k; });
  }
  return curve;
}

SweepCurve sweep_k(const ExperimentConfig& config, ExperimentReport* report_out) {
  ExperimentConfig comparative = config;
  comparative.models.clear();
  for (auto m : config.models) {
    if (is_comparative(m)) comparative.models.push_back(m);
  }
  if (comparative.models.empty()) throw ValidationError("sweep-k needs at least one comparative model");
  auto report = run_experiment(comparative);
  auto curve = sweep_from_report(report);
  if (report_out) *report_out = std::move(report);
  return curve;
}

}  // namespace spe
