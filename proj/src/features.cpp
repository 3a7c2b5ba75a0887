#include "spe/features.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "spe/error.hpp"

namespace spe {

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ValidationError("embedding dimension must be positive");
}

void EmbeddingMatrix::add(std::string id, std::span<const double> vector) {
  if (vector.size() != dim_) {
    throw ValidationError("vector for '" + id + "' has length " + std::to_string(vector.size()) +
                          ", expected " + std::to_string(dim_));
  }
  for (double v : vector) {
    if (!std::isfinite(v)) throw ValidationError("non-finite component in vector for '" + id + "'");
  }
  if (index_.contains(id)) throw ValidationError("duplicate embedding id '" + id + "'");
  index_.emplace(id, ids_.size());
  ids_.push_back(std::move(id));
  data_.insert(data_.end(), vector.begin(), vector.end());
}

bool EmbeddingMatrix::contains(std::string_view id) const { return index_.contains(std::string(id)); }

std::span<const double> EmbeddingMatrix::row(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) throw NotFoundError("no embedding for id '" + std::string(id) + "'");
  return std::span<const double>(data_).subspan(it->second * dim_, dim_);
}

std::vector<std::string> EmbeddingMatrix::missing(std::span<const std::string> wanted) const {
  std::vector<std::string> out;
  for (const auto& id : wanted) {
    if (!contains(id)) out.push_back(id);
  }
  return out;
}

EmbeddingMatrix parse_embeddings(std::string_view content) {
  std::optional<EmbeddingMatrix> matrix;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(e.what(), line_no);
    }
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("vector") || !obj["vector"].is_array()) {
      throw FormatError("expected {\"id\": ..., \"vector\": [...]}", line_no);
    }
    const auto id = obj["id"].get<std::string>();
    std::vector<double> vec;
    vec.reserve(obj["vector"].size());
    for (const auto& v : obj["vector"]) {
      if (!v.is_number()) throw ValidationError("non-finite or non-numeric value in vector for '" + id + "'");
      vec.push_back(v.get<double>());
    }
    if (!matrix) {
      if (vec.empty()) throw ValidationError("empty vector for '" + id + "'");
      matrix.emplace(vec.size());
    }
    if (vec.size() != matrix->dim()) {
      throw ValidationError("ragged vector length for '" + id + "': " + std::to_string(vec.size()) +
                            " != " + std::to_string(matrix->dim()));
    }
    matrix->add(id, vec);
  }
  if (!matrix) throw FormatError("no embeddings found", line_no);
  return std::move(*matrix);
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_embeddings(buffer.str());
}

void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& id : matrix.ids()) {
    const auto row = matrix.row(id);
    nlohmann::ordered_json obj;
    obj["id"] = id;
    obj["vector"] = std::vector<double>(row.begin(), row.end());
    out << obj.dump() << '\n';
  }
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    const bool word = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
    if (word) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

HashedTfidfModel::HashedTfidfModel(std::size_t dim, std::uint64_t doc_count, std::vector<std::uint64_t> bucket_df,
                                   bool normalize)
    : dim_(dim), doc_count_(doc_count), bucket_df_(std::move(bucket_df)), normalize_(normalize) {
  if (dim_ == 0) throw ValidationError("featurizer dimension must be positive");
  if (bucket_df_.size() != dim_) throw ValidationError("bucket_df length must equal dim");
  for (auto df : bucket_df_) {
    if (df > doc_count_) throw ValidationError("bucket document frequency exceeds doc_count");
  }
}

HashedTfidfModel HashedTfidfModel::fit(std::span<const std::string> corpus, std::size_t dim, bool normalize) {
  if (corpus.empty()) throw ValidationError("cannot fit featurizer on an empty corpus");
  if (dim == 0) throw ValidationError("featurizer dimension must be positive");
  std::vector<std::uint64_t> df(dim, 0);
  for (const auto& doc : corpus) {
    // A document contributes at most once per bucket.
    std::set<std::size_t> buckets;
    for (const auto& token : tokenize(doc)) buckets.insert(fnv1a64(token) % dim);
    for (auto b : buckets) ++df[b];
  }
  return HashedTfidfModel(dim, corpus.size(), std::move(df), normalize);
}

double HashedTfidfModel::idf(std::size_t bucket) const {
  return std::log((1.0 + static_cast<double>(doc_count_)) / (1.0 + static_cast<double>(bucket_df_[bucket]))) + 1.0;
}

std::vector<double> HashedTfidfModel::embed(std::string_view text) const {
  std::vector<double> out(dim_, 0.0);
  for (const auto& token : tokenize(text)) out[bucket(token)] += 1.0;
  double norm2 = 0.0;
  for (std::size_t j = 0; j < dim_; ++j) {
    if (out[j] != 0.0) {
      out[j] *= idf(j);
      norm2 += out[j] * out[j];
    }
  }
  if (normalize_ && norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& v : out) v *= inv;
  }
  return out;
}

std::string HashedTfidfModel::to_json() const {
  nlohmann::ordered_json obj;
  obj["dim"] = dim_;
  obj["doc_count"] = doc_count_;
  obj["bucket_df"] = bucket_df_;
  obj["normalize"] = normalize_;
  return obj.dump();
}

HashedTfidfModel HashedTfidfModel::from_json(std::string_view json) {
  try {
    const auto obj = nlohmann::json::parse(json);
    return HashedTfidfModel(obj.at("dim").get<std::size_t>(), obj.at("doc_count").get<std::uint64_t>(),
                            obj.at("bucket_df").get<std::vector<std::uint64_t>>(), obj.at("normalize").get<bool>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("featurizer model: ") + e.what(), 1);
  }
}

EmbeddingMatrix embed_items(const HashedTfidfModel& model, std::span<const BacklogItem> items) {
  EmbeddingMatrix matrix(model.dim());
  for (const auto& item : items) matrix.add(item.id, model.embed(item_text(item)));
  return matrix;
}

}  // namespace spe
