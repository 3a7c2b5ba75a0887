#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace spe {

// Average ranks, 1 = smallest; tied values share the mean of their positions.
std::vector<double> fractional_ranks(std::span<const double> values);

// Throws UndefinedCorrelation when either list has zero variance and
// ValidationError on length mismatch or fewer than two values.
double pearson(std::span<const double> pred, std::span<const double> truth);

// Pearson correlation of fractional ranks. Equals 1 - 6*sum(d^2)/(n(n^2-1))
// when neither list has ties.
double spearman(std::span<const double> pred, std::span<const double> truth);

double mae(std::span<const double> pred, std::span<const double> truth);

struct EvaluationResult {
  // Empty when the correlation is undefined for this sample.
  std::optional<double> pearson;
  std::optional<double> spearman;
  // Only for predictions in story-point units.
  std::optional<double> mae;
  std::size_t n = 0;
};

EvaluationResult evaluate(std::span<const double> pred, std::span<const double> truth, bool with_mae);

}  // namespace spe
