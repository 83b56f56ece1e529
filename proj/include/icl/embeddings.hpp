#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace icl {

class Corpus;

class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A fixed-dimension text embedding tagged with the model that produced it.
// Components must be finite and not all zero.
struct EmbeddingVector {
  std::vector<float> values;
  std::string model_id;
};

// Validates finiteness and the non-zero invariant; returns the Euclidean norm.
double checked_norm(std::span<const float> values);

// dot(a,b) / (|a|*|b|), clamped to [-1, 1]. Throws on dimension mismatch or a
// zero vector.
double cosine_similarity(std::span<const float> a, std::span<const float> b);
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Immutable-after-build map from example id to embedding, stored row-major
// for the scan kernels.
class EmbeddingStore {
 public:
  EmbeddingStore(std::size_t dimension, std::string model_id);

  void put(const std::string& id, std::span<const float> values);
  void put(const std::string& id, const EmbeddingVector& vec);

  bool contains(std::string_view id) const;
  std::span<const float> vector_of(std::string_view id) const;

  std::size_t dimension() const { return dimension_; }
  const std::string& model_id() const { return model_id_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }

  const float* row_data() const { return data_.data(); }
  const double* row_norms() const { return norms_.data(); }
  std::uint32_t row_of(std::string_view id) const;

 private:
  std::size_t dimension_;
  std::string model_id_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<float> data_;
  std::vector<double> norms_;
};

struct ScoredId {
  std::string id;
  double score;
};

// Exact top-k by descending cosine similarity over the candidates passing
// `filter` (nullptr admits everything). Ties break by ascending id. Throws
// when fewer than k candidates pass the filter.
std::vector<ScoredId> top_k(const EmbeddingStore& store, std::span<const float> query,
                            std::size_t k,
                            const std::function<bool(const std::string&)>& filter = nullptr);

// Persistent cache of embedding vectors keyed by (model_id, sha256(text)).
// Line-delimited JSON records {content_hash, model_id, vector}; inserts are
// appended and flushed immediately.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path path);

  std::optional<std::span<const float>> lookup(const std::string& model_id,
                                               const std::string& content_hash) const;
  void insert(const std::string& model_id, const std::string& content_hash,
              std::span<const float> values);
  std::size_t size() const { return entries_.size(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::unordered_map<std::string, std::vector<float>> entries_;
};

// Source of embedding vectors: the remote gateway or the offline mock.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  // One vector per input text, order-preserving.
  virtual std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts,
                                                   const std::string& model) = 0;
};

struct EmbedStats {
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
  std::size_t provider_calls = 0;
};

// Embeds every example in the corpus (deduplicated by content), consulting
// and filling the cache. Throws on dimension drift between cached and fresh
// vectors.
EmbeddingStore embed_corpus(const Corpus& corpus, TextEmbedder& provider, EmbeddingCache& cache,
                            const std::string& model_id, EmbedStats* stats = nullptr);

}  // namespace icl
