#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "icl/corpus.hpp"
#include "icl/embeddings.hpp"
#include "icl/mock_provider.hpp"
#include "icl/selection.hpp"

using namespace icl;

namespace {

Example ex(std::string id, TaskKind task, LabelValue label, std::string text = "",
           std::string pair_id = "", CdRole role = CdRole::None) {
  Example e;
  e.id = std::move(id);
  e.task = task;
  e.label = Label(task, label);
  if (task == TaskKind::Sentiment) {
    e.text = text.empty() ? "text " + e.id : std::move(text);
  } else {
    e.premise = "premise " + e.id;
    e.hypothesis = text.empty() ? "hypothesis " + e.id : std::move(text);
  }
  e.pair_id = std::move(pair_id);
  e.cd_role = role;
  return e;
}

CadPair make_pair(const Example& original, const Example& counterfactual) {
  CadPair p;
  p.pair_id = original.pair_id;
  p.original = original;
  p.counterfactual = counterfactual;
  p.edit_ratio = normalized_edit_distance(whitespace_tokens(original.content()),
                                          whitespace_tokens(counterfactual.content()));
  return p;
}

// n singleton examples (s0..) plus m (orig, cf) pairs (o0/c0..), labels
// alternating for singletons and flipped within pairs.
Corpus sentiment_pool(std::size_t singles, std::size_t pairs) {
  std::vector<Example> examples;
  std::vector<CadPair> cad;
  for (std::size_t i = 0; i < singles; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "s%02zu", i);
    examples.push_back(ex(id, TaskKind::Sentiment,
                          i % 2 == 0 ? LabelValue::Positive : LabelValue::Negative));
  }
  for (std::size_t i = 0; i < pairs; ++i) {
    char oid[16], cid[16], pid[16];
    std::snprintf(oid, sizeof(oid), "o%02zu", i);
    std::snprintf(cid, sizeof(cid), "c%02zu", i);
    std::snprintf(pid, sizeof(pid), "p%02zu", i);
    Example o = ex(oid, TaskKind::Sentiment, LabelValue::Positive, "shared words good " + std::string(pid),
                   pid, CdRole::Original);
    Example c = ex(cid, TaskKind::Sentiment, LabelValue::Negative, "shared words bad " + std::string(pid),
                   pid, CdRole::Counterfactual);
    cad.push_back(make_pair(o, c));
    examples.push_back(std::move(o));
    examples.push_back(std::move(c));
  }
  return Corpus(TaskKind::Sentiment, std::move(examples), std::move(cad));
}

EmbeddingStore store_for(const Corpus& corpus, const std::string& model = "m") {
  EmbeddingStore store(MockProvider::kEmbeddingDim, model);
  for (const Example& e : corpus.examples()) {
    store.put(e.id, mock_embedding(model, e.content()));
  }
  return store;
}

std::set<std::string> id_set(const DemonstrationSet& set) {
  std::set<std::string> out;
  for (const Example& e : set.demos) out.insert(e.id);
  return out;
}

}  // namespace

TEST_CASE("strategy names round-trip") {
  for (StrategyKind kind : {StrategyKind::Random, StrategyKind::Nearest,
                            StrategyKind::NearestClass, StrategyKind::CdsRandom,
                            StrategyKind::CdsNearest}) {
    CHECK(strategy_from_string(strategy_name(kind)) == kind);
  }
  CHECK_THROWS_AS(strategy_from_string("knn"), SelectionError);
  CHECK_THROWS_AS(validate_spec({StrategyKind::CdsRandom, 5, 0}), SelectionError);
  CHECK_THROWS_AS(validate_spec({StrategyKind::Random, 0, 0}), SelectionError);
}

TEST_CASE("select_random draws without replacement, deterministic per seed") {
  Corpus pool = sentiment_pool(10, 0);

  SUBCASE("pool of exactly k returns everything") {
    StrategySpec spec{StrategyKind::Random, 10, 42};
    DemonstrationSet set = select_random(pool, spec, {});
    CHECK(id_set(set).size() == 10);
  }
  SUBCASE("same inputs give identical draw order") {
    StrategySpec spec{StrategyKind::Random, 4, 7};
    DemonstrationSet a = select_random(pool, spec, {"s00"});
    DemonstrationSet b = select_random(pool, spec, {"s00"});
    REQUIRE(a.demos.size() == b.demos.size());
    for (std::size_t i = 0; i < a.demos.size(); ++i) CHECK(a.demos[i].id == b.demos[i].id);
  }
  SUBCASE("draws are distinct and disjoint from exclude") {
    StrategySpec spec{StrategyKind::Random, 4, 99};
    const std::unordered_set<std::string> exclude{"s01", "s02"};
    DemonstrationSet set = select_random(pool, spec, exclude);
    auto ids = id_set(set);
    CHECK(ids.size() == 4);
    for (const std::string& id : ids) {
      CHECK(exclude.count(id) == 0);
      CHECK(pool.contains(id));
    }
  }
  SUBCASE("insufficient pool is an error") {
    StrategySpec spec{StrategyKind::Random, 11, 0};
    CHECK_THROWS_AS(select_random(pool, spec, {}), SelectionError);
  }
}

TEST_CASE("select_nearest ranks by cosine and excludes the test example") {
  Corpus pool = sentiment_pool(6, 0);
  EmbeddingStore store(2, "m");
  // s00 is the most similar to the query, s01 orthogonal, rest in between.
  const std::map<std::string, std::vector<float>> vecs{
      {"s00", {1.0f, 0.0f}}, {"s01", {0.0f, 1.0f}}, {"s02", {0.8f, 0.6f}},
      {"s03", {0.6f, 0.8f}}, {"s04", {0.9f, 0.1f}}, {"s05", {1.0f, 0.05f}},
  };
  for (const auto& [id, v] : vecs) store.put(id, std::span<const float>(v));

  Example test = ex("query", TaskKind::Sentiment, LabelValue::Positive);
  const std::vector<float> query{1.0f, 0.0f};

  SUBCASE("duplicate of the test vector dominates at k=1") {
    DemonstrationSet set = select_nearest(pool, store, test, std::span<const float>(query), 1);
    REQUIRE(set.demos.size() == 1);
    CHECK(set.demos[0].id == "s00");
    CHECK(set.scores[0] == 1.0);
  }
  SUBCASE("order is descending similarity") {
    DemonstrationSet set = select_nearest(pool, store, test, std::span<const float>(query), 6);
    for (std::size_t i = 1; i < set.scores.size(); ++i) CHECK(set.scores[i - 1] >= set.scores[i]);
    CHECK(set.demos[0].id == "s00");
    CHECK(set.demos.back().id == "s01");
  }
  SUBCASE("the test example itself is never selected") {
    // Make the test id part of the pool with a perfect-match vector.
    Corpus pool_with_test(TaskKind::Sentiment,
                          {pool.examples()[0], pool.examples()[1], pool.examples()[2],
                           ex("query", TaskKind::Sentiment, LabelValue::Positive)},
                          {});
    EmbeddingStore s2(2, "m");
    const std::vector<float> one{1.0f, 0.0f}, other{0.5f, 0.5f};
    s2.put("query", std::span<const float>(one));
    s2.put(pool.examples()[0].id, std::span<const float>(other));
    s2.put(pool.examples()[1].id, std::span<const float>(other));
    s2.put(pool.examples()[2].id, std::span<const float>(other));
    DemonstrationSet set = select_nearest(pool_with_test, s2, test, 3);
    CHECK(id_set(set).count("query") == 0);
  }
  SUBCASE("missing embedding is an error") {
    Corpus bigger = sentiment_pool(7, 0);  // s06 has no vector
    CHECK_THROWS_AS(select_nearest(bigger, store, test, std::span<const float>(query), 2),
                    SelectionError);
  }
}

TEST_CASE("select_nearest matches a brute-force oracle on a random pool") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  Corpus pool = sentiment_pool(50, 0);
  EmbeddingStore store(8, "m");
  std::map<std::string, std::vector<float>> vecs;
  for (const Example& e : pool.examples()) {
    std::vector<float> v(8);
    for (float& x : v) x = dist(rng);
    v[0] += 1.5f;
    vecs[e.id] = v;
    store.put(e.id, std::span<const float>(v));
  }
  std::vector<float> query(8);
  for (float& x : query) x = dist(rng);
  query[0] += 1.5f;

  Example test = ex("probe", TaskKind::Sentiment, LabelValue::Positive);
  DemonstrationSet set = select_nearest(pool, store, test, std::span<const float>(query), 10);

  std::vector<std::pair<double, std::string>> oracle;
  for (const auto& [id, v] : vecs) {
    oracle.push_back({cosine_similarity(std::span<const float>(v), std::span<const float>(query)),
                      id});
  }
  std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t i = 0; i < 10; ++i) CHECK(set.demos[i].id == oracle[i].second);
}

TEST_CASE("select_nearest_class splits k across label classes") {
  SUBCASE("sentiment k=4 gives two per class") {
    Corpus pool = sentiment_pool(12, 0);
    EmbeddingStore store = store_for(pool);
    Example test = ex("probe", TaskKind::Sentiment, LabelValue::Positive);
    DemonstrationSet set = select_nearest_class(pool, store, test,
                                                mock_embedding("m", "probe text").values, 4);
    std::size_t pos = 0, neg = 0;
    for (const Example& e : set.demos) {
      (e.label.value() == LabelValue::Positive ? pos : neg) += 1;
    }
    CHECK(pos == 2);
    CHECK(neg == 2);
  }

  std::vector<Example> nli;
  const std::vector<LabelValue> classes = {LabelValue::Entailment, LabelValue::Neutral,
                                           LabelValue::Contradiction};
  for (std::size_t i = 0; i < 30; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "n%02zu", i);
    nli.push_back(ex(id, TaskKind::Nli, classes[i % 3]));
  }
  Corpus nli_pool(TaskKind::Nli, nli, {});

  SUBCASE("nli k=12 gives four per class") {
    EmbeddingStore store = store_for(nli_pool);
    Example test = ex("probe", TaskKind::Nli, LabelValue::Neutral);
    DemonstrationSet set = select_nearest_class(nli_pool, store, test,
                                                mock_embedding("m", "nli probe").values, 12);
    std::map<LabelValue, int> counts;
    for (const Example& e : set.demos) ++counts[e.label.value()];
    CHECK(counts[LabelValue::Entailment] == 4);
    CHECK(counts[LabelValue::Neutral] == 4);
    CHECK(counts[LabelValue::Contradiction] == 4);
  }

  SUBCASE("nli k=4 sends the remainder to the most-similar class") {
    // Hand-placed vectors: the contradiction class holds the single closest
    // member, so it gets 2 slots; entailment and neutral get 1 each.
    EmbeddingStore store(2, "m");
    const std::vector<float> query{1.0f, 0.0f};
    for (const Example& e : nli_pool.examples()) {
      std::vector<float> v{0.1f, 1.0f};
      if (e.id == "n02") v = {1.0f, 0.01f};  // contradiction, nearly aligned
      if (e.id == "n05") v = {0.9f, 0.5f};   // contradiction, second best
      if (e.id == "n00") v = {0.7f, 0.7f};   // entailment best
      if (e.id == "n01") v = {0.6f, 0.8f};   // neutral best
      store.put(e.id, std::span<const float>(v));
    }
    Example test = ex("probe", TaskKind::Nli, LabelValue::Neutral);
    DemonstrationSet set =
        select_nearest_class(nli_pool, store, test, std::span<const float>(query), 4);
    std::map<LabelValue, int> counts;
    for (const Example& e : set.demos) ++counts[e.label.value()];
    CHECK(counts[LabelValue::Contradiction] == 2);
    CHECK(counts[LabelValue::Entailment] == 1);
    CHECK(counts[LabelValue::Neutral] == 1);
    auto ids = id_set(set);
    CHECK(ids.count("n02") == 1);
    CHECK(ids.count("n05") == 1);
    CHECK(ids.count("n00") == 1);
    CHECK(ids.count("n01") == 1);
    // Output ordering is global descending similarity.
    for (std::size_t i = 1; i < set.scores.size(); ++i) CHECK(set.scores[i - 1] >= set.scores[i]);
  }

  SUBCASE("a class with too few candidates is an error") {
    std::vector<Example> skewed;
    skewed.push_back(ex("e0", TaskKind::Nli, LabelValue::Entailment));
    skewed.push_back(ex("e1", TaskKind::Nli, LabelValue::Entailment));
    skewed.push_back(ex("u0", TaskKind::Nli, LabelValue::Neutral));
    skewed.push_back(ex("c0", TaskKind::Nli, LabelValue::Contradiction));
    Corpus pool(TaskKind::Nli, skewed, {});
    EmbeddingStore store = store_for(pool);
    Example test = ex("probe", TaskKind::Nli, LabelValue::Neutral);
    CHECK_THROWS_WITH_AS(select_nearest_class(pool, store, test,
                                              mock_embedding("m", "probe").values, 6),
                         doctest::Contains("candidates"), SelectionError);
  }
}

TEST_CASE("select_cds_random picks whole pairs, adjacent and balanced") {
  Corpus pool = sentiment_pool(4, 5);

  SUBCASE("exactly k/2 eligible pairs returns all of them") {
    StrategySpec spec{StrategyKind::CdsRandom, 10, 3};
    DemonstrationSet set = select_cds_random(pool, spec, {});
    CHECK(set.demos.size() == 10);
    validate_demonstration_set(set);
  }
  SUBCASE("binary label balance holds for every seed") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      StrategySpec spec{StrategyKind::CdsRandom, 6, seed};
      DemonstrationSet set = select_cds_random(pool, spec, {});
      std::size_t pos = 0, neg = 0;
      for (const Example& e : set.demos) {
        (e.label.value() == LabelValue::Positive ? pos : neg) += 1;
      }
      CHECK(pos == 3);
      CHECK(neg == 3);
      validate_demonstration_set(set);
    }
  }
  SUBCASE("a pair with an excluded member is never chosen") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      StrategySpec spec{StrategyKind::CdsRandom, 8, seed};
      DemonstrationSet set = select_cds_random(pool, spec, {"o02"});
      auto ids = id_set(set);
      CHECK(ids.count("o02") == 0);
      CHECK(ids.count("c02") == 0);
    }
  }
  SUBCASE("odd k is rejected") {
    StrategySpec spec{StrategyKind::CdsRandom, 5, 0};
    CHECK_THROWS_AS(select_cds_random(pool, spec, {}), SelectionError);
  }
  SUBCASE("insufficient pairs is an error") {
    StrategySpec spec{StrategyKind::CdsRandom, 12, 0};
    CHECK_THROWS_AS(select_cds_random(pool, spec, {}), SelectionError);
  }
}

TEST_CASE("select_cds_nearest ranks pairs by their best member") {
  Corpus pool = sentiment_pool(0, 4);
  EmbeddingStore store(2, "m");
  const std::vector<float> query{1.0f, 0.0f};
  // Pair p00: counterfactual is nearly aligned with the query.
  // Pair p01: both members orthogonal. Pairs p02/p03: middling.
  const std::map<std::string, std::vector<float>> vecs{
      {"o00", {0.0f, 1.0f}},  {"c00", {1.0f, 0.02f}}, {"o01", {0.05f, 1.0f}},
      {"c01", {0.0f, 1.0f}},  {"o02", {0.5f, 0.8f}},  {"c02", {0.4f, 0.9f}},
      {"o03", {0.6f, 0.75f}}, {"c03", {0.3f, 1.0f}},
  };
  for (const auto& [id, v] : vecs) store.put(id, std::span<const float>(v));
  Example test = ex("probe", TaskKind::Sentiment, LabelValue::Positive);

  SUBCASE("the pair containing the near-duplicate ranks first") {
    DemonstrationSet set =
        select_cds_nearest(pool, store, test, std::span<const float>(query), 2);
    REQUIRE(set.demos.size() == 2);
    CHECK(set.demos[0].id == "o00");
    CHECK(set.demos[1].id == "c00");
    CHECK(set.demos[0].cd_role == CdRole::Original);
    validate_demonstration_set(set);
  }
  SUBCASE("ranking matches brute-force pair scoring") {
    DemonstrationSet set =
        select_cds_nearest(pool, store, test, std::span<const float>(query), 8);
    std::vector<std::pair<double, std::string>> oracle;
    for (const CadPair& p : pool.pairs()) {
      const double a = cosine_similarity(std::span<const float>(vecs.at(p.original.id)),
                                         std::span<const float>(query));
      const double b = cosine_similarity(std::span<const float>(vecs.at(p.counterfactual.id)),
                                         std::span<const float>(query));
      oracle.push_back({std::max(a, b), p.pair_id});
    }
    std::sort(oracle.begin(), oracle.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first > y.first;
      return x.second < y.second;
    });
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      CHECK(set.demos[2 * i].pair_id == oracle[i].second);
    }
  }
  SUBCASE("equal pair scores break ties by ascending pair_id") {
    EmbeddingStore tied(2, "m");
    const std::vector<float> same{1.0f, 0.0f}, off{0.0f, 1.0f};
    tied.put("o00", std::span<const float>(off));
    tied.put("c00", std::span<const float>(same));
    tied.put("o01", std::span<const float>(same));
    tied.put("c01", std::span<const float>(off));
    tied.put("o02", std::span<const float>(off));
    tied.put("c02", std::span<const float>(off));
    tied.put("o03", std::span<const float>(off));
    tied.put("c03", std::span<const float>(off));
    DemonstrationSet set =
        select_cds_nearest(pool, tied, test, std::span<const float>(query), 4);
    CHECK(set.demos[0].pair_id == "p00");
    CHECK(set.demos[2].pair_id == "p01");
  }
  SUBCASE("a pair containing the test id is ineligible") {
    Example probe = pool.pairs()[0].original;  // o00
    DemonstrationSet set =
        select_cds_nearest(pool, store, probe, std::span<const float>(query), 6);
    auto ids = id_set(set);
    CHECK(ids.count("o00") == 0);
    CHECK(ids.count("c00") == 0);
  }
}

TEST_CASE("arrange keeps or shuffles deterministically") {
  Corpus pool = sentiment_pool(8, 3);
  StrategySpec spec{StrategyKind::CdsRandom, 6, 17};
  DemonstrationSet set = select_cds_random(pool, spec, {});

  SUBCASE("selection order is the identity") {
    DemonstrationSet kept = arrange(set, ArrangePolicy::SelectionOrder);
    for (std::size_t i = 0; i < set.demos.size(); ++i) CHECK(kept.demos[i].id == set.demos[i].id);
  }
  SUBCASE("seeded shuffle is reproducible and keeps pairs adjacent") {
    DemonstrationSet a = arrange(set, ArrangePolicy::SeededShuffle);
    DemonstrationSet b = arrange(set, ArrangePolicy::SeededShuffle);
    REQUIRE(a.demos.size() == b.demos.size());
    for (std::size_t i = 0; i < a.demos.size(); ++i) CHECK(a.demos[i].id == b.demos[i].id);
    validate_demonstration_set(a);  // adjacency still holds
    for (std::size_t i = 0; i + 1 < a.demos.size(); i += 2) {
      CHECK(a.demos[i].cd_role == CdRole::Original);
      CHECK(a.demos[i + 1].cd_role == CdRole::Counterfactual);
      CHECK(a.demos[i].pair_id == a.demos[i + 1].pair_id);
    }
  }
  SUBCASE("non-CD shuffle permutes the same multiset") {
    StrategySpec rspec{StrategyKind::Random, 5, 23};
    DemonstrationSet rset = select_random(pool, rspec, {});
    DemonstrationSet shuffled = arrange(rset, ArrangePolicy::SeededShuffle);
    CHECK(id_set(shuffled) == id_set(rset));
  }
}

TEST_CASE("every strategy satisfies the demonstration-set invariants on random draws") {
  std::mt19937_64 rng(2024);
  const std::vector<StrategyKind> kinds = {StrategyKind::Random, StrategyKind::Nearest,
                                           StrategyKind::NearestClass, StrategyKind::CdsRandom,
                                           StrategyKind::CdsNearest};
  for (int round = 0; round < 200; ++round) {
    const std::size_t singles = 12 + rng() % 20;
    const std::size_t pairs = 6 + rng() % 10;
    Corpus pool = sentiment_pool(singles, pairs);
    EmbeddingStore store = store_for(pool);
    const StrategyKind kind = kinds[rng() % kinds.size()];
    std::size_t k = 1 + rng() % 8;
    if (is_cd_strategy(kind) && k % 2 != 0) ++k;
    if (kind == StrategyKind::NearestClass && k > 10) k = 10;
    const Example test = pool.examples()[rng() % pool.size()];
    StrategySpec spec{kind, k, rng()};

    DemonstrationSet set = select(pool, &store, test, store.vector_of(test.id), spec, {});
    validate_demonstration_set(set);
    CHECK(set.demos.size() == k);
    CHECK(id_set(set).count(test.id) == 0);
    if (is_cd_strategy(kind)) {
      std::size_t pos = 0, neg = 0;
      for (const Example& e : set.demos) {
        (e.label.value() == LabelValue::Positive ? pos : neg) += 1;
      }
      CHECK(pos == k / 2);
      CHECK(neg == k / 2);
    }
    DemonstrationSet shuffled = arrange(set, ArrangePolicy::SeededShuffle);
    validate_demonstration_set(shuffled);
  }
}

TEST_CASE("validate_demonstration_set rejects broken sets") {
  Corpus pool = sentiment_pool(6, 2);
  StrategySpec spec{StrategyKind::Random, 3, 1};
  DemonstrationSet set = select_random(pool, spec, {});

  SUBCASE("wrong size") {
    set.demos.pop_back();
    CHECK_THROWS_AS(validate_demonstration_set(set), SelectionError);
  }
  SUBCASE("duplicate ids") {
    set.demos[1] = set.demos[0];
    CHECK_THROWS_AS(validate_demonstration_set(set), SelectionError);
  }
  SUBCASE("test among demos") {
    set.test_id = set.demos[0].id;
    CHECK_THROWS_AS(validate_demonstration_set(set), SelectionError);
  }
  SUBCASE("broken CD adjacency") {
    StrategySpec cspec{StrategyKind::CdsRandom, 4, 1};
    DemonstrationSet cds = select_cds_random(pool, cspec, {});
    std::swap(cds.demos[0], cds.demos[1]);
    CHECK_THROWS_AS(validate_demonstration_set(cds), SelectionError);
  }
}
