#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "icl/corpus.hpp"
#include "icl/embeddings.hpp"
#include "icl/hash.hpp"
#include "icl/mock_provider.hpp"
#include "icl/similarity_scan.hpp"

using namespace icl;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove(path);
  return path;
}

// Counts how many texts the provider was actually asked to embed.
class CountingEmbedder : public TextEmbedder {
 public:
  std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts,
                                           const std::string& model) override {
    ++calls;
    texts_embedded += texts.size();
    std::vector<EmbeddingVector> out;
    for (const std::string& t : texts) out.push_back(mock_embedding(model, t));
    return out;
  }
  std::size_t calls = 0;
  std::size_t texts_embedded = 0;
};

// Straight-line scoring independent of the store's scan kernels.
std::vector<ScoredId> brute_force_top_k(const std::vector<std::string>& ids,
                                        const std::vector<std::vector<float>>& vectors,
                                        const std::vector<float>& query, std::size_t k) {
  std::vector<ScoredId> scored;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t d = 0; d < query.size(); ++d) {
      dot += static_cast<double>(vectors[i][d]) * static_cast<double>(query[d]);
      na += static_cast<double>(vectors[i][d]) * static_cast<double>(vectors[i][d]);
      nb += static_cast<double>(query[d]) * static_cast<double>(query[d]);
    }
    double sim = dot / (std::sqrt(na) * std::sqrt(nb));
    sim = std::clamp(sim, -1.0, 1.0);
    scored.push_back({ids[i], sim});
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  scored.resize(k);
  return scored;
}

Corpus tiny_corpus(std::size_t n) {
  std::vector<Example> examples;
  for (std::size_t i = 0; i < n; ++i) {
    Example e;
    e.id = "t" + std::to_string(i);
    e.task = TaskKind::Sentiment;
    e.text = "text number " + std::to_string(i);
    e.label = Label(TaskKind::Sentiment,
                    i % 2 == 0 ? LabelValue::Positive : LabelValue::Negative);
    examples.push_back(std::move(e));
  }
  return Corpus(TaskKind::Sentiment, std::move(examples), {});
}

}  // namespace

TEST_CASE("cosine_similarity fundamentals") {
  const std::vector<float> x{3, 0}, y{0, 1};
  CHECK(cosine_similarity(std::span<const float>(x), std::span<const float>(x)) == 1.0);
  CHECK(cosine_similarity(std::span<const float>(x), std::span<const float>(y)) == 0.0);

  // Independent hand computation: dot=8, norms 3 and 3 -> 8/9.
  const std::vector<float> a{1, 2, 2}, b{2, 1, 2};
  CHECK(cosine_similarity(std::span<const float>(a), std::span<const float>(b)) ==
        doctest::Approx(8.0 / 9.0).epsilon(1e-9));

  const std::vector<float> zero{0, 0};
  CHECK_THROWS_AS(cosine_similarity(std::span<const float>(x), std::span<const float>(zero)),
                  EmbeddingError);
  const std::vector<float> longer{1, 2, 3};
  CHECK_THROWS_AS(cosine_similarity(std::span<const float>(x), std::span<const float>(longer)),
                  EmbeddingError);
  const std::vector<float> nan{std::numeric_limits<float>::quiet_NaN(), 1};
  CHECK_THROWS_AS(cosine_similarity(std::span<const float>(x), std::span<const float>(nan)),
                  EmbeddingError);
}

TEST_CASE("cosine_similarity is symmetric and scale invariant") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (int i = 0; i < 200; ++i) {
    const std::size_t dim = 2 + rng() % 16;
    std::vector<float> a(dim), b(dim);
    for (float& v : a) v = dist(rng);
    for (float& v : b) v = dist(rng);
    a[0] += 0.5f;  // keep away from the zero vector
    b[0] -= 0.5f;
    const double ab = cosine_similarity(std::span<const float>(a), std::span<const float>(b));
    const double ba = cosine_similarity(std::span<const float>(b), std::span<const float>(a));
    CHECK(ab == ba);
    CHECK(ab >= -1.0);
    CHECK(ab <= 1.0);
    std::vector<float> scaled = a;
    for (float& v : scaled) v *= 3.25f;
    CHECK(cosine_similarity(std::span<const float>(a), std::span<const float>(scaled)) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("store rejects bad vectors and mismatched models") {
  EmbeddingStore store(2, "m1");
  const std::vector<float> ok{1, 0};
  store.put("a", std::span<const float>(ok));
  CHECK(store.contains("a"));
  const std::vector<float> wrong_dim{1, 0, 0};
  CHECK_THROWS_AS(store.put("b", std::span<const float>(wrong_dim)), EmbeddingError);
  CHECK_THROWS_AS(store.put("c", EmbeddingVector{{1, 1}, "other-model"}), EmbeddingError);
  const std::vector<float> zero{0, 0};
  CHECK_THROWS_AS(store.put("d", std::span<const float>(zero)), EmbeddingError);
  CHECK_THROWS_AS(store.vector_of("missing"), EmbeddingError);
}

TEST_CASE("top_k exact retrieval with tie-breaking") {
  EmbeddingStore store(2, "m1");
  const std::vector<float> va{1, 0}, vb{0, 1}, vc{0.7f, 0.7f};
  store.put("a", std::span<const float>(va));
  store.put("b", std::span<const float>(vb));
  store.put("c", std::span<const float>(vc));

  SUBCASE("scores rank a then c for query [1,0]") {
    auto out = top_k(store, std::span<const float>(va), 2);
    REQUIRE(out.size() == 2);
    CHECK(out[0].id == "a");
    CHECK(out[0].score == doctest::Approx(1.0));
    CHECK(out[1].id == "c");
    CHECK(out[1].score == doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
  }
  SUBCASE("k equal to candidate count returns everything sorted") {
    auto out = top_k(store, std::span<const float>(va), 3);
    REQUIRE(out.size() == 3);
    CHECK(out[0].id == "a");
    CHECK(out[1].id == "c");
    CHECK(out[2].id == "b");
  }
  SUBCASE("identical vectors break ties by ascending id") {
    store.put("z_twin", std::span<const float>(va));
    store.put("a_twin", std::span<const float>(va));
    auto out = top_k(store, std::span<const float>(va), 3);
    CHECK(out[0].id == "a");
    CHECK(out[1].id == "a_twin");
    CHECK(out[2].id == "z_twin");
  }
  SUBCASE("too few candidates is an error") {
    CHECK_THROWS_AS(top_k(store, std::span<const float>(va), 4), EmbeddingError);
    CHECK_THROWS_AS(top_k(store, std::span<const float>(va), 2,
                          [](const std::string& id) { return id == "a"; }),
                    EmbeddingError);
  }
  SUBCASE("filter narrows the candidate set") {
    auto out = top_k(store, std::span<const float>(va), 1,
                     [](const std::string& id) { return id != "a"; });
    CHECK(out[0].id == "c");
  }
}

TEST_CASE("top_k matches the brute-force oracle on random stores") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (int round = 0; round < 50; ++round) {
    const std::size_t n = 2 + rng() % 120;
    const std::size_t dim = 2 + rng() % 24;
    std::vector<std::string> ids;
    std::vector<std::vector<float>> vectors;
    EmbeddingStore store(dim, "m");
    for (std::size_t i = 0; i < n; ++i) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "id%03zu", i);
      std::vector<float> v(dim);
      if (!vectors.empty() && rng() % 10 == 0) {
        v = vectors[rng() % vectors.size()];  // deliberate tie
      } else {
        for (float& x : v) x = dist(rng);
        v[rng() % dim] += 1.0f;
      }
      ids.emplace_back(buf);
      vectors.push_back(v);
      store.put(ids.back(), std::span<const float>(v));
    }
    std::vector<float> query(dim);
    for (float& x : query) x = dist(rng);
    query[0] += 1.0f;
    const std::size_t k = 1 + rng() % n;

    auto expected = brute_force_top_k(ids, vectors, query, k);
    auto actual = top_k(store, std::span<const float>(query), k);
    REQUIRE(actual.size() == expected.size());
    for (std::size_t i = 0; i < k; ++i) CHECK(actual[i].id == expected[i].id);
  }
}

TEST_CASE("serial and parallel scan kernels agree bitwise") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  const std::size_t n = 400, dim = 24;
  std::vector<float> data(n * dim);
  for (float& v : data) v = dist(rng);
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      s += static_cast<double>(data[i * dim + d]) * data[i * dim + d];
    }
    norms[i] = std::sqrt(s) + 1e-12;
  }
  std::vector<float> query(dim, 0.5f);
  std::vector<std::uint32_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = static_cast<std::uint32_t>(i);
  std::vector<double> a(n), b(n);
  cosine_scan_serial(data.data(), dim, norms.data(), rows, query.data(), 1.0, a.data());
  cosine_scan_parallel(data.data(), dim, norms.data(), rows, query.data(), 1.0, b.data());
  for (std::size_t i = 0; i < n; ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("embedding cache hit/miss accounting and persistence") {
  const auto cache_path = temp_file("icl_cache_test.jsonl");
  Corpus corpus = tiny_corpus(4);

  CountingEmbedder embedder;
  {
    EmbeddingCache cache(cache_path);
    EmbedStats stats;
    embed_corpus(corpus, embedder, cache, "m", &stats);
    CHECK(stats.cache_hits == 0);
    CHECK(stats.cache_misses == 4);
    CHECK(embedder.calls == 1);  // one batched call
    CHECK(embedder.texts_embedded == 4);
  }

  SUBCASE("fully cached corpus needs zero provider calls") {
    EmbeddingCache cache(cache_path);
    CountingEmbedder fresh;
    EmbedStats stats;
    embed_corpus(corpus, fresh, cache, "m", &stats);
    CHECK(stats.cache_hits == 4);
    CHECK(stats.cache_misses == 0);
    CHECK(fresh.calls == 0);
  }

  SUBCASE("one new text costs exactly one provider call") {
    Corpus bigger = tiny_corpus(5);
    EmbeddingCache cache(cache_path);
    CountingEmbedder fresh;
    EmbedStats stats;
    embed_corpus(bigger, fresh, cache, "m", &stats);
    CHECK(stats.cache_hits == 4);
    CHECK(stats.cache_misses == 1);
    CHECK(fresh.calls == 1);
    CHECK(fresh.texts_embedded == 1);
  }

  SUBCASE("different model misses the cache") {
    EmbeddingCache cache(cache_path);
    CountingEmbedder fresh;
    EmbedStats stats;
    embed_corpus(corpus, fresh, cache, "m2", &stats);
    CHECK(stats.cache_misses == 4);
  }
}

TEST_CASE("duplicate content embeds once but fills every id") {
  const auto cache_path = temp_file("icl_cache_dup.jsonl");
  std::vector<Example> examples;
  for (int i = 0; i < 3; ++i) {
    Example e;
    e.id = "d" + std::to_string(i);
    e.task = TaskKind::Sentiment;
    e.text = i < 2 ? "identical text" : "different text";
    e.label = Label(TaskKind::Sentiment, LabelValue::Positive);
    examples.push_back(std::move(e));
  }
  Corpus corpus(TaskKind::Sentiment, std::move(examples), {});

  EmbeddingCache cache(cache_path);
  CountingEmbedder embedder;
  EmbedStats stats;
  EmbeddingStore store = embed_corpus(corpus, embedder, cache, "m", &stats);
  CHECK(embedder.texts_embedded == 2);  // deduplicated
  REQUIRE(store.size() == 3);
  auto v0 = store.vector_of("d0");
  auto v1 = store.vector_of("d1");
  CHECK(std::equal(v0.begin(), v0.end(), v1.begin()));
}

TEST_CASE("cache round-trip reproduces identical rankings") {
  const auto cache_path = temp_file("icl_cache_rank.jsonl");
  Corpus corpus = tiny_corpus(30);
  CountingEmbedder embedder;
  std::vector<float> query(MockProvider::kEmbeddingDim, 0.25f);

  std::vector<ScoredId> before;
  {
    EmbeddingCache cache(cache_path);
    EmbeddingStore store = embed_corpus(corpus, embedder, cache, "m", nullptr);
    before = top_k(store, std::span<const float>(query), 10);
  }
  EmbeddingCache cache(cache_path);
  CountingEmbedder unused;
  EmbeddingStore reloaded = embed_corpus(corpus, unused, cache, "m", nullptr);
  CHECK(unused.calls == 0);
  auto after = top_k(reloaded, std::span<const float>(query), 10);
  REQUIRE(after.size() == before.size());
  for (std::size_t i = 0; i < after.size(); ++i) {
    CHECK(after[i].id == before[i].id);
    CHECK(after[i].score == before[i].score);
  }
}

TEST_CASE("dimension drift between cache and provider is an error") {
  const auto cache_path = temp_file("icl_cache_drift.jsonl");
  {
    EmbeddingCache cache(cache_path);
    const std::vector<float> v{1.0f, 2.0f};  // dimension 2
    cache.insert("m", sha256_hex("text number 0"), std::span<const float>(v));
  }
  EmbeddingCache cache(cache_path);
  CountingEmbedder embedder;  // produces dimension-16 vectors
  Corpus corpus = tiny_corpus(2);
  CHECK_THROWS_AS(embed_corpus(corpus, embedder, cache, "m", nullptr), EmbeddingError);
}

TEST_CASE("provider returning wrong vector count is an error") {
  class ShortEmbedder : public TextEmbedder {
   public:
    std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts,
                                             const std::string& model) override {
      std::vector<EmbeddingVector> out;
      for (std::size_t i = 0; i + 1 < texts.size(); ++i) {
        out.push_back(mock_embedding(model, texts[i]));
      }
      return out;
    }
  };
  const auto cache_path = temp_file("icl_cache_short.jsonl");
  EmbeddingCache cache(cache_path);
  ShortEmbedder embedder;
  Corpus corpus = tiny_corpus(3);
  CHECK_THROWS_AS(embed_corpus(corpus, embedder, cache, "m", nullptr), EmbeddingError);
}
