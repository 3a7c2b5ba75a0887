#include "spe/pairing.hpp"

#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "spe/error.hpp"
#include "spe/random.hpp"

namespace spe {

namespace {

void check_sampling_args(std::size_t n, std::size_t k) {
  if (n < 2) throw ValidationError("pair sampling needs at least 2 items, got " + std::to_string(n));
  if (k < 1) throw ValidationError("k must be at least 1");
}

// Draws partners for `anchor` without replacement until `accept` has taken
// `k` of them or the pool is exhausted. Returns the number accepted.
template <typename Accept>
std::size_t draw_partners(std::vector<std::size_t>& pool, std::size_t n, std::size_t anchor, std::size_t k,
                          Rng& rng, Accept&& accept) {
  pool.clear();
  for (std::size_t j = 0; j < n; ++j) {
    if (j != anchor) pool.push_back(j);
  }
  std::size_t taken = 0;
  for (std::size_t t = 0; t < pool.size() && taken < k; ++t) {
    const std::size_t r = t + static_cast<std::size_t>(rng.below(pool.size() - t));
    std::swap(pool[t], pool[r]);
    if (accept(pool[t])) ++taken;
  }
  return taken;
}

}  // namespace

int judgment_label(double sp_a, double sp_b) {
  if (sp_a > sp_b) return 1;
  if (sp_a < sp_b) return -1;
  throw std::invalid_argument("tied story points have no comparative label");
}

PairSet simulate_pairs(std::span<const BacklogItem> items, std::size_t k, std::uint64_t seed) {
  check_sampling_args(items.size(), k);
  for (const auto& item : items) {
    if (!item.labeled()) throw ValidationError("item '" + item.id + "' has no story point");
  }
  PairSet set;
  set.k = k;
  set.pairs.reserve(items.size() * k);
  Rng rng(seed);
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& anchor = items[i];
    const std::size_t taken = draw_partners(pool, items.size(), i, k, rng, [&](std::size_t j) {
      if (*items[j].story_point == *anchor.story_point) return false;
      set.pairs.push_back({anchor.id, items[j].id, *anchor.story_point > *items[j].story_point ? 1 : -1});
      return true;
    });
    if (taken < k) {
      ++set.dropped;
      set.shortfall += k - taken;
    }
  }
  return set;
}

std::vector<UnlabeledPair> generate_annotation_pairs(std::span<const BacklogItem> items, std::size_t k,
                                                     std::uint64_t seed) {
  check_sampling_args(items.size(), k);
  std::vector<UnlabeledPair> pairs;
  pairs.reserve(items.size() * std::min(k, items.size() - 1));
  Rng rng(seed);
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < items.size(); ++i) {
    draw_partners(pool, items.size(), i, k, rng, [&](std::size_t j) {
      pairs.push_back({items[i].id, items[j].id});
      return true;
    });
  }
  return pairs;
}

std::string serialize_pairs(std::span<const ComparativePair> pairs) {
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::ordered_json obj;
    obj["a"] = p.a;
    obj["b"] = p.b;
    obj["y"] = p.y;
    out += obj.dump() + "\n";
  }
  return out;
}

std::string serialize_annotation_pairs(std::span<const UnlabeledPair> pairs) {
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::ordered_json obj;
    obj["a"] = p.a;
    obj["b"] = p.b;
    out += obj.dump() + "\n";
  }
  return out;
}

namespace {

template <typename Fn>
void for_each_json_line(std::string_view content, Fn&& fn) {
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(nlohmann::json::parse(line), line_no);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(e.what(), line_no);
    }
  }
}

}  // namespace

std::vector<ComparativePair> parse_pairs(std::string_view content) {
  std::vector<ComparativePair> pairs;
  for_each_json_line(content, [&](const nlohmann::json& obj, std::size_t line) {
    ComparativePair p{obj.at("a").get<std::string>(), obj.at("b").get<std::string>(), obj.at("y").get<int>()};
    if (p.y != 1 && p.y != -1) throw FormatError("y must be +1 or -1", line);
    if (p.a == p.b) throw FormatError("self-pair for '" + p.a + "'", line);
    pairs.push_back(std::move(p));
  });
  return pairs;
}

std::vector<UnlabeledPair> parse_annotation_pairs(std::string_view content) {
  std::vector<UnlabeledPair> pairs;
  for_each_json_line(content, [&](const nlohmann::json& obj, std::size_t line) {
    UnlabeledPair p{obj.at("a").get<std::string>(), obj.at("b").get<std::string>()};
    if (p.a == p.b) throw FormatError("self-pair for '" + p.a + "'", line);
    pairs.push_back(std::move(p));
  });
  return pairs;
}

void save_pairs(std::span<const ComparativePair> pairs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << serialize_pairs(pairs);
}

std::vector<ComparativePair> load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_pairs(buffer.str());
}

}  // namespace spe
