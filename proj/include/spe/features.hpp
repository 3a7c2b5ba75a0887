#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "spe/dataset.hpp"

namespace spe {

// Dense per-item feature vectors of a fixed dimension, kept in insertion order.
class EmbeddingMatrix {
 public:
  explicit EmbeddingMatrix(std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }

  // Throws ValidationError on a wrong length, a non-finite component or a duplicate id.
  void add(std::string id, std::span<const double> vector);

  bool contains(std::string_view id) const;
  // Throws NotFoundError for unknown ids.
  std::span<const double> row(std::string_view id) const;

  // Ids from `wanted` that have no vector.
  std::vector<std::string> missing(std::span<const std::string> wanted) const;

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

// JSON-lines, one {"id": ..., "vector": [...]} per line; dim comes from the first line.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);
EmbeddingMatrix parse_embeddings(std::string_view content);
void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path);

// Lowercased alphanumeric tokens. Bytes >= 0x80 count as word characters so
// UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

// 64-bit FNV-1a. Seed-free, so buckets are stable across runs and machines.
std::uint64_t fnv1a64(std::string_view text);

inline constexpr std::size_t kDefaultFeatureDim = 384;

class HashedTfidfModel {
 public:
  HashedTfidfModel(std::size_t dim, std::uint64_t doc_count, std::vector<std::uint64_t> bucket_df,
                   bool normalize = true);

  // Throws ValidationError for an empty corpus or dim == 0.
  static HashedTfidfModel fit(std::span<const std::string> corpus, std::size_t dim = kDefaultFeatureDim,
                              bool normalize = true);

  std::size_t dim() const { return dim_; }
  std::uint64_t doc_count() const { return doc_count_; }
  const std::vector<std::uint64_t>& bucket_df() const { return bucket_df_; }
  bool normalize() const { return normalize_; }

  std::size_t bucket(std::string_view token) const { return fnv1a64(token) % dim_; }
  double idf(std::size_t bucket) const;

  std::vector<double> embed(std::string_view text) const;

  std::string to_json() const;
  static HashedTfidfModel from_json(std::string_view json);

 private:
  std::size_t dim_;
  std::uint64_t doc_count_;
  std::vector<std::uint64_t> bucket_df_;
  bool normalize_;
};

// Embeds item_text() of every item.
EmbeddingMatrix embed_items(const HashedTfidfModel& model, std::span<const BacklogItem> items);

}  // namespace spe
