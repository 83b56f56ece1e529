#include "icl/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "icl/corpus.hpp"
#include "icl/hash.hpp"
#include "icl/similarity_scan.hpp"

namespace icl {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::size_t kEmbedBatch = 100;

}  // namespace

double checked_norm(std::span<const float> values) {
  double sum = 0.0;
  for (float v : values) {
    if (!std::isfinite(v)) throw EmbeddingError("embedding component is not finite");
    sum += static_cast<double>(v) * static_cast<double>(v);
  }
  const double norm = std::sqrt(sum);
  if (norm == 0.0) throw EmbeddingError("zero embedding vector (cosine undefined)");
  return norm;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw EmbeddingError("cosine_similarity: dimension mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  }
  const double na = checked_norm(a);
  const double nb = checked_norm(b);
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine_similarity(std::span<const float>(a.values), std::span<const float>(b.values));
}

EmbeddingStore::EmbeddingStore(std::size_t dimension, std::string model_id)
    : dimension_(dimension), model_id_(std::move(model_id)) {
  if (dimension_ == 0) throw EmbeddingError("store dimension must be positive");
}

void EmbeddingStore::put(const std::string& id, std::span<const float> values) {
  if (values.size() != dimension_) {
    throw EmbeddingError("vector for '" + id + "' has length " + std::to_string(values.size()) +
                         ", store dimension is " + std::to_string(dimension_));
  }
  const double norm = checked_norm(values);
  auto it = index_.find(id);
  if (it != index_.end()) {
    std::copy(values.begin(), values.end(), data_.begin() + it->second * dimension_);
    norms_[it->second] = norm;
    return;
  }
  const auto row = static_cast<std::uint32_t>(ids_.size());
  ids_.push_back(id);
  index_.emplace(id, row);
  data_.insert(data_.end(), values.begin(), values.end());
  norms_.push_back(norm);
}

void EmbeddingStore::put(const std::string& id, const EmbeddingVector& vec) {
  if (vec.model_id != model_id_) {
    throw EmbeddingError("vector for '" + id + "' comes from model '" + vec.model_id +
                         "', store expects '" + model_id_ + "'");
  }
  put(id, std::span<const float>(vec.values));
}

bool EmbeddingStore::contains(std::string_view id) const {
  return index_.find(std::string(id)) != index_.end();
}

std::uint32_t EmbeddingStore::row_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw EmbeddingError("no embedding for id '" + std::string(id) + "'");
  return it->second;
}

std::span<const float> EmbeddingStore::vector_of(std::string_view id) const {
  const std::uint32_t row = row_of(id);
  return std::span<const float>(data_.data() + static_cast<std::size_t>(row) * dimension_,
                                dimension_);
}

std::vector<ScoredId> top_k(const EmbeddingStore& store, std::span<const float> query,
                            std::size_t k, const std::function<bool(const std::string&)>& filter) {
  if (k == 0) throw EmbeddingError("top_k: k must be >= 1");
  if (query.size() != store.dimension()) {
    throw EmbeddingError("top_k: query dimension mismatch");
  }
  const double query_norm = checked_norm(query);

  std::vector<std::uint32_t> rows;
  rows.reserve(store.size());
  for (const std::string& id : store.ids()) {
    if (filter == nullptr || filter(id)) rows.push_back(store.row_of(id));
  }
  if (rows.size() < k) {
    throw EmbeddingError("top_k: only " + std::to_string(rows.size()) + " candidates for k=" +
                         std::to_string(k));
  }

  std::vector<double> scores(rows.size());
  cosine_scan_parallel(store.row_data(), store.dimension(), store.row_norms(), rows,
                       query.data(), query_norm, scores.data());

  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return store.ids()[rows[a]] < store.ids()[rows[b]];
  });

  std::vector<ScoredId> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back({store.ids()[rows[order[i]]], scores[order[i]]});
  }
  return out;
}

EmbeddingCache::EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;  // cold cache
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw EmbeddingError(path_.string() + ":" + std::to_string(line_no) +
                           ": malformed cache record: " + e.what());
    }
    if (!rec.contains("content_hash") || !rec.contains("model_id") || !rec.contains("vector")) {
      throw EmbeddingError(path_.string() + ":" + std::to_string(line_no) +
                           ": cache record missing fields");
    }
    const std::string key =
        rec["model_id"].get<std::string>() + ":" + rec["content_hash"].get<std::string>();
    entries_[key] = rec["vector"].get<std::vector<float>>();
  }
}

std::optional<std::span<const float>> EmbeddingCache::lookup(const std::string& model_id,
                                                             const std::string& content_hash) const {
  auto it = entries_.find(model_id + ":" + content_hash);
  if (it == entries_.end()) return std::nullopt;
  return std::span<const float>(it->second);
}

void EmbeddingCache::insert(const std::string& model_id, const std::string& content_hash,
                            std::span<const float> values) {
  const std::string key = model_id + ":" + content_hash;
  if (entries_.count(key) != 0) return;
  entries_[key] = std::vector<float>(values.begin(), values.end());

  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app);
  if (!out) throw EmbeddingError("cannot append to cache file '" + path_.string() + "'");
  ordered_json rec;
  rec["content_hash"] = content_hash;
  rec["model_id"] = model_id;
  rec["vector"] = entries_[key];
  out << rec.dump() << "\n";
  out.flush();
}

EmbeddingStore embed_corpus(const Corpus& corpus, TextEmbedder& provider, EmbeddingCache& cache,
                            const std::string& model_id, EmbedStats* stats) {
  // Deduplicate by content hash so identical texts cost one provider call.
  // std::map keeps the miss order deterministic.
  std::map<std::string, std::string> hash_to_text;
  std::unordered_map<std::string, std::string> id_to_hash;
  for (const Example& e : corpus.examples()) {
    const std::string content = e.content();
    const std::string h = sha256_hex(content);
    id_to_hash.emplace(e.id, h);
    hash_to_text.emplace(h, content);
  }

  EmbedStats local;
  std::unordered_map<std::string, std::vector<float>> resolved;
  std::vector<std::string> miss_hashes;
  for (const auto& [h, text] : hash_to_text) {
    if (auto hit = cache.lookup(model_id, h)) {
      resolved.emplace(h, std::vector<float>(hit->begin(), hit->end()));
      ++local.cache_hits;
    } else {
      miss_hashes.push_back(h);
      ++local.cache_misses;
    }
  }

  for (std::size_t start = 0; start < miss_hashes.size(); start += kEmbedBatch) {
    const std::size_t end = std::min(start + kEmbedBatch, miss_hashes.size());
    std::vector<std::string> batch;
    batch.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) batch.push_back(hash_to_text[miss_hashes[i]]);
    std::vector<EmbeddingVector> vecs = provider.embed_texts(batch, model_id);
    ++local.provider_calls;
    if (vecs.size() != batch.size()) {
      throw EmbeddingError("provider returned " + std::to_string(vecs.size()) + " vectors for " +
                           std::to_string(batch.size()) + " texts");
    }
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      const std::string& h = miss_hashes[start + i];
      cache.insert(model_id, h, vecs[i].values);
      resolved.emplace(h, std::move(vecs[i].values));
    }
  }

  std::size_t dim = 0;
  for (const auto& [h, vec] : resolved) {
    if (dim == 0) {
      dim = vec.size();
    } else if (vec.size() != dim) {
      throw EmbeddingError("dimension drift: saw vectors of length " + std::to_string(dim) +
                           " and " + std::to_string(vec.size()) + " for model '" + model_id + "'");
    }
  }
  if (dim == 0) throw EmbeddingError("embed_corpus: corpus is empty");

  EmbeddingStore store(dim, model_id);
  for (const Example& e : corpus.examples()) {
    store.put(e.id, resolved.at(id_to_hash.at(e.id)));
  }
  if (stats != nullptr) *stats = local;
  return store;
}

}  // namespace icl
