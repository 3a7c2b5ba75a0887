#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "spe/dataset.hpp"
#include "spe/features.hpp"

namespace spe {

struct SyntheticSpec {
  std::size_t n = 500;
  std::size_t dim = 16;
  std::size_t levels = 8;
  std::uint64_t seed = 20240601;
};

// Backlog with a known linear effort model: unit-norm Gaussian features x,
// true score s = w_star . x, story point = s quantized into `levels` equal-width
// bins (1..levels). Items cycle through train, train, train, validation, test.
struct SyntheticProject {
  ProjectDataset dataset;
  EmbeddingMatrix embeddings;
  std::vector<double> w_star;
  std::vector<double> true_scores;  // in item order
};

SyntheticProject make_synthetic_project(const SyntheticSpec& spec = {});

}  // namespace spe
