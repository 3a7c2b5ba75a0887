#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spe/dataset.hpp"

namespace spe {

// One comparative judgment: y = +1 when item a needs more effort than b,
// y = -1 when b needs more effort than a.
struct ComparativePair {
  std::string a;
  std::string b;
  int y = 1;

  friend bool operator==(const ComparativePair&, const ComparativePair&) = default;
};

struct UnlabeledPair {
  std::string a;
  std::string b;

  friend bool operator==(const UnlabeledPair&, const UnlabeledPair&) = default;
};

struct PairSet {
  std::vector<ComparativePair> pairs;
  std::size_t k = 0;
  // Anchors that got fewer than k valid partners.
  std::size_t dropped = 0;
  // Total pairs missing relative to k per anchor.
  std::size_t shortfall = 0;
};

// Judgment label from two story points; throws std::invalid_argument on a tie.
int judgment_label(double sp_a, double sp_b);

// Each labeled item anchors up to k pairs with distinct random partners.
// Partners tied with the anchor are rejected and redrawn from the untried
// candidates. Deterministic for a given seed.
PairSet simulate_pairs(std::span<const BacklogItem> items, std::size_t k, std::uint64_t seed);

// Same partner sampling without labels or tie rejection: min(k, n - 1)
// partners per anchor.
std::vector<UnlabeledPair> generate_annotation_pairs(std::span<const BacklogItem> items, std::size_t k,
                                                     std::uint64_t seed);

std::string serialize_pairs(std::span<const ComparativePair> pairs);
std::vector<ComparativePair> parse_pairs(std::string_view content);
std::string serialize_annotation_pairs(std::span<const UnlabeledPair> pairs);
std::vector<UnlabeledPair> parse_annotation_pairs(std::string_view content);

void save_pairs(std::span<const ComparativePair> pairs, const std::filesystem::path& path);
std::vector<ComparativePair> load_pairs(const std::filesystem::path& path);

}  // namespace spe
