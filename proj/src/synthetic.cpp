#include "spe/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "spe/error.hpp"
#include "spe/random.hpp"

namespace spe {

namespace {

std::vector<double> unit_gaussian(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

}  // namespace

SyntheticProject make_synthetic_project(const SyntheticSpec& spec) {
  if (spec.n < 5 || spec.dim == 0 || spec.levels < 2) {
    throw ValidationError("synthetic project needs n >= 5, dim >= 1, levels >= 2");
  }
  Rng rng(spec.seed);
  std::vector<double> w_star = unit_gaussian(rng, spec.dim);

  EmbeddingMatrix emb(spec.dim);
  std::vector<double> scores;
  std::vector<std::string> ids;
  scores.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "SYN-%04zu", i + 1);
    const auto x = unit_gaussian(rng, spec.dim);
    double s = 0.0;
    for (std::size_t j = 0; j < spec.dim; ++j) s += w_star[j] * x[j];
    emb.add(id, x);
    ids.emplace_back(id);
    scores.push_back(s);
  }

  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *lo_it, width = (*hi_it - *lo_it) / static_cast<double>(spec.levels);
  static constexpr Split kCycle[] = {Split::train, Split::train, Split::train, Split::validation, Split::test};

  std::vector<BacklogItem> items;
  items.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    auto level = static_cast<std::int64_t>(std::floor((scores[i] - lo) / width)) + 1;
    level = std::clamp<std::int64_t>(level, 1, static_cast<std::int64_t>(spec.levels));
    BacklogItem item;
    item.id = ids[i];
    item.title = "Synthetic item " + std::to_string(i + 1);
    item.description = "";
    item.story_point = StoryPoint(level);
    item.split = kCycle[i % 5];
    items.push_back(std::move(item));
  }
  return SyntheticProject{ProjectDataset("synthetic", std::move(items)), std::move(emb), std::move(w_star),
                          std::move(scores)};
}

}  // namespace spe
