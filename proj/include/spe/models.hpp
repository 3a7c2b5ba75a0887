#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spe/dataset.hpp"
#include "spe/features.hpp"
#include "spe/pairing.hpp"

namespace spe {

// Affine scoring head f(x) = w.x + b.
struct ScoringHead {
  std::vector<double> w;
  double b = 0.0;

  ScoringHead() = default;
  explicit ScoringHead(std::size_t dim, double bias = 0.0) : w(dim, 0.0), b(bias) {}
  ScoringHead(std::vector<double> weights, double bias) : w(std::move(weights)), b(bias) {}

  std::size_t dim() const { return w.size(); }

  friend bool operator==(const ScoringHead&, const ScoringHead&) = default;
};

double score(const ScoringHead& head, std::span<const double> x);

// f(x_a) - f(x_b), computed as w.x_a - w.x_b so the bias cancels exactly.
double comparative_forward(const ScoringHead& head, std::span<const double> x_a, std::span<const double> x_b);

// max(0, 1 - y * y_hat)
double hinge_loss(int y, double y_hat);

enum class LossKind { hinge_comparative, mae_regression, hinge_svm_difference };
enum class OptimizerKind { adam, sgd };

std::string_view to_string(LossKind loss);
LossKind parse_loss_kind(std::string_view text);
std::string_view to_string(OptimizerKind optimizer);
OptimizerKind parse_optimizer_kind(std::string_view text);

struct EarlyStopping {
  std::size_t patience = 20;

  friend bool operator==(const EarlyStopping&, const EarlyStopping&) = default;
};

struct TrainConfig {
  LossKind loss = LossKind::hinge_comparative;
  std::size_t max_epochs = 100;
  double lr_start = 1e-3;
  double lr_end = 1e-6;
  std::size_t batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double l2_penalty = 0.0;
  std::optional<EarlyStopping> early_stopping;
  std::uint64_t seed = 0;

  // Regression column: MAE loss, 600 epochs, train on train+validation.
  static TrainConfig regression_defaults();
  // Comparative columns: 100 epochs without validation, 300 with
  // validation-based early stopping.
  static TrainConfig comparative_defaults(bool with_validation);
  static TrainConfig svm_defaults();

  // Throws ValidationError when a field is out of range.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

std::string train_config_to_json(const TrainConfig& config);
// Applies a JSON object of TrainConfig fields on top of `config`; unknown
// fields are rejected. An empty string leaves `config` unchanged.
TrainConfig apply_train_config_overrides(TrainConfig config, std::string_view json);

// Per-epoch exponential interpolation from lr_start to lr_end.
double learning_rate(const TrainConfig& config, std::size_t epoch);

struct TrainedModel {
  ScoringHead head;
  TrainConfig config;
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  // Epoch whose head was returned; -1 when no epoch ran.
  long best_epoch = -1;

  std::string to_json() const;
  static TrainedModel from_json(std::string_view json);
};

// Mean objective over a batch and its (sub)gradient. Subgradients at kinks are 0.
struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad_w;
  double grad_b = 0.0;
};

struct LabeledExample {
  std::string id;
  double sp = 0.0;
};

LossGradient comparative_objective(const ScoringHead& head, const EmbeddingMatrix& emb,
                                   std::span<const ComparativePair> batch);
LossGradient regression_objective(const ScoringHead& head, const EmbeddingMatrix& emb,
                                  std::span<const LabeledExample> batch);
// Mean hinge on difference features plus l2_penalty * |w|^2.
LossGradient svm_objective(const ScoringHead& head, const EmbeddingMatrix& emb,
                           std::span<const ComparativePair> batch, double l2_penalty);

// Mean hinge loss of a head over a pair set (0 for an empty set).
double mean_hinge_loss(const ScoringHead& head, const EmbeddingMatrix& emb, std::span<const ComparativePair> pairs);

// Polled once per epoch; returning true aborts training with TrainingCancelled.
using StopRequested = std::function<bool()>;

// `val_pairs` may be empty unless early stopping is configured. `init`
// defaults to the zero head.
TrainedModel train_comparative(std::span<const ComparativePair> pairs, const EmbeddingMatrix& emb,
                               std::span<const ComparativePair> val_pairs, const TrainConfig& config,
                               std::optional<ScoringHead> init = std::nullopt, const StopRequested& stop = {});

TrainedModel train_regression(std::span<const BacklogItem> items, const EmbeddingMatrix& emb,
                              const TrainConfig& config, std::optional<ScoringHead> init = std::nullopt);

TrainedModel train_svm_comparative(std::span<const ComparativePair> pairs, const EmbeddingMatrix& emb,
                                   const TrainConfig& config, std::optional<ScoringHead> init = std::nullopt);

std::vector<double> predict_scores(const TrainedModel& model, const EmbeddingMatrix& emb,
                                   std::span<const std::string> ids);

}  // namespace spe
