#include "spe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spe/error.hpp"

namespace spe {

namespace {

void check_lengths(std::span<const double> pred, std::span<const double> truth, std::size_t min_n) {
  if (pred.size() != truth.size()) {
    throw ValidationError("length mismatch: " + std::to_string(pred.size()) + " vs " + std::to_string(truth.size()));
  }
  if (pred.size() < min_n) {
    throw ValidationError("need at least " + std::to_string(min_n) + " values, got " + std::to_string(pred.size()));
  }
}

}  // namespace

std::vector<double> fractional_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 hold ranks i+1..j
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = rank;
    i = j;
  }
  return ranks;
}

double pearson(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth, 2);
  const double n = static_cast<double>(pred.size());
  const double mean_p = std::accumulate(pred.begin(), pred.end(), 0.0) / n;
  const double mean_t = std::accumulate(truth.begin(), truth.end(), 0.0) / n;
  double cov = 0.0, var_p = 0.0, var_t = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dp = pred[i] - mean_p;
    const double dt = truth[i] - mean_t;
    cov += dp * dt;
    var_p += dp * dp;
    var_t += dt * dt;
  }
  if (var_p == 0.0) throw UndefinedCorrelation("predictions have zero variance");
  if (var_t == 0.0) throw UndefinedCorrelation("ground truth has zero variance");
  const double r = cov / (std::sqrt(var_p) * std::sqrt(var_t));
  return std::clamp(r, -1.0, 1.0);
}

double spearman(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth, 2);
  const auto rp = fractional_ranks(pred);
  const auto rt = fractional_ranks(truth);
  return pearson(rp, rt);
}

double mae(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth, 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(truth[i] - pred[i]);
  return sum / static_cast<double>(pred.size());
}

EvaluationResult evaluate(std::span<const double> pred, std::span<const double> truth, bool with_mae) {
  check_lengths(pred, truth, 1);
  EvaluationResult r;
  r.n = pred.size();
  try {
    r.pearson = pearson(pred, truth);
  } catch (const UndefinedCorrelation&) {
  } catch (const ValidationError&) {
  }
  try {
    r.spearman = spearman(pred, truth);
  } catch (const UndefinedCorrelation&) {
  } catch (const ValidationError&) {
  }
  if (with_mae) r.mae = mae(pred, truth);
  return r;
}

}  // namespace spe
