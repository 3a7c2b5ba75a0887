#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spe/models.hpp"

namespace spe {

enum class ModelKind { regression, comparative_noval, comparative_val, svm_comparative };
enum class FeatureSource { embedding_files, builtin_tfidf };

std::string_view to_string(ModelKind model);
ModelKind parse_model_kind(std::string_view text);
std::string_view to_string(FeatureSource source);
FeatureSource parse_feature_source(std::string_view text);

// Regression models report k = 0.
inline bool is_comparative(ModelKind m) { return m != ModelKind::regression; }

struct ExperimentConfig {
  std::vector<std::string> projects;  // dataset paths
  FeatureSource feature_source = FeatureSource::builtin_tfidf;
  // Embedding files are looked up as <dir>/<project>.embeddings.jsonl; when
  // unset, the dataset's own directory is used.
  std::optional<std::string> embeddings_dir;
  std::size_t feature_dim = kDefaultFeatureDim;
  std::vector<ModelKind> models;
  std::vector<std::size_t> k_values{1};
  std::size_t repeats_regression = 20;
  std::size_t repeats_comparative = 10;
  std::uint64_t base_seed = 0;
  // JSON objects of TrainConfig fields keyed by model name, or "all".
  std::map<std::string, std::string> train_overrides;
  std::size_t threads = 1;

  // Throws ValidationError on an inconsistent configuration.
  void validate() const;

  static ExperimentConfig from_json(std::string_view json);
  std::string to_json() const;
};

// Effective training configuration for one model and repeat seed.
TrainConfig train_config_for(const ExperimentConfig& config, ModelKind model, std::uint64_t seed);

std::filesystem::path embeddings_path_for(const ExperimentConfig& config, const std::string& project_path);

struct RepeatResult {
  std::uint64_t seed = 0;
  std::optional<double> pearson;
  std::optional<double> spearman;
  std::optional<double> mae;
  std::size_t train_size = 0;  // training pairs or items
  std::size_t shortfall = 0;   // pairs lost to tied story points
  std::size_t epochs = 0;
};

struct ReportEntry {
  std::string project;
  ModelKind model = ModelKind::regression;
  std::size_t k = 0;
  std::size_t n_test = 0;
  std::vector<RepeatResult> repeats;
  // Means over repeats with a defined value.
  std::optional<double> pearson;
  std::optional<double> spearman;
  std::optional<double> mae;
  std::size_t undefined_pearson = 0;
  std::size_t undefined_spearman = 0;
};

struct AverageRow {
  ModelKind model = ModelKind::regression;
  std::size_t k = 0;
  std::optional<double> pearson;
  std::optional<double> spearman;
  std::optional<double> mae;
  std::size_t projects = 0;
};

struct ProjectError {
  std::string project;
  std::string code;
  std::string message;
};

struct ExperimentReport {
  std::vector<ReportEntry> entries;
  std::vector<AverageRow> averages;
  std::vector<ProjectError> errors;

  bool empty() const { return entries.empty(); }

  std::string to_json() const;
  static ExperimentReport from_json(std::string_view json);
};

// Per-(model, k) mean over projects of the per-project means.
std::vector<AverageRow> compute_averages(const std::vector<ReportEntry>& entries);

// Runs every (project, model, k, repeat) job. A project failing its
// preconditions is recorded in `errors`; other projects still run.
ExperimentReport run_experiment(const ExperimentConfig& config);

enum class ReportFormat { delimited_table, markdown };
ReportFormat parse_report_format(std::string_view text);

// Throws ValidationError for an empty report.
std::string render_report(const ExperimentReport& report, ReportFormat format, bool with_reference = true);
void emit_report(const ExperimentReport& report, ReportFormat format, const std::filesystem::path& path,
                 bool with_reference = true);

struct CurvePoint {
  std::size_t k = 0;
  std::optional<double> spearman;
  std::size_t projects = 0;
};

using SweepCurve = std::map<ModelKind, std::vector<CurvePoint>>;

SweepCurve sweep_from_report(const ExperimentReport& report);
// Runs the comparative models of `config` over its k_values.
SweepCurve sweep_k(const ExperimentConfig& config, ExperimentReport* report_out = nullptr);
std::string render_sweep(const SweepCurve& curve);

// Published reference numbers, used only when rendering reports.
struct PublishedResult {
  double pearson = 0.0;
  double spearman = 0.0;
  std::optional<double> mae;
};

std::optional<PublishedResult> published_result(std::string_view project, ModelKind model);
// External baselines: "FastText-SVM" or "GPT2SP".
std::optional<PublishedResult> published_baseline(std::string_view project, std::string_view baseline);
std::optional<PublishedResult> published_average(ModelKind model);

inline constexpr double kPublishedComparativeSpearman = 0.34;
inline constexpr double kReplicationBand = 0.05;

}  // namespace spe
