#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "icl/corpus.hpp"
#include "icl/embeddings.hpp"

namespace icl {

class SelectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class StrategyKind { Random, Nearest, NearestClass, CdsRandom, CdsNearest };

// Stable CLI/config strategy names.
std::string_view strategy_name(StrategyKind kind);
StrategyKind strategy_from_string(std::string_view name);
bool is_cd_strategy(StrategyKind kind);
bool strategy_needs_embeddings(StrategyKind kind);

struct StrategySpec {
  StrategyKind kind = StrategyKind::Random;
  std::size_t k = 4;
  std::uint64_t seed = 0;  // used by Random/CdsRandom and by arrangement shuffling
};

// Throws unless k >= 1 and, for CD strategies, k is even.
void validate_spec(const StrategySpec& spec);

// An ordered list of k demonstrations chosen for one test input. For CD
// strategies the demos form k/2 adjacent (original, counterfactual) pairs.
// `scores` carries per-demo cosine similarity for the similarity-based
// strategies (pair score on both members for cds-nearest) and is empty for
// the random ones.
struct DemonstrationSet {
  std::vector<Example> demos;
  std::vector<double> scores;
  StrategySpec strategy;
  std::string test_id;
};

// Checks the type invariants (size, id distinctness, test exclusion, CD pair
// adjacency); throws SelectionError on the first violation.
void validate_demonstration_set(const DemonstrationSet& set);

DemonstrationSet select_random(const Corpus& pool, const StrategySpec& spec,
                               const std::unordered_set<std::string>& exclude);

DemonstrationSet select_nearest(const Corpus& pool, const EmbeddingStore& store,
                                const Example& test, std::span<const float> test_vec,
                                std::size_t k);
DemonstrationSet select_nearest(const Corpus& pool, const EmbeddingStore& store,
                                const Example& test, std::size_t k);

// k split across label classes as evenly as possible; the k mod #classes
// remainder slots go to the classes whose nearest member is most similar to
// the test input.
DemonstrationSet select_nearest_class(const Corpus& pool, const EmbeddingStore& store,
                                      const Example& test, std::span<const float> test_vec,
                                      std::size_t k);
DemonstrationSet select_nearest_class(const Corpus& pool, const EmbeddingStore& store,
                                      const Example& test, std::size_t k);

DemonstrationSet select_cds_random(const Corpus& pool, const StrategySpec& spec,
                                   const std::unordered_set<std::string>& exclude);

// Pairs ranked by max(cos(test, original), cos(test, counterfactual)); ties
// by ascending pair_id.
DemonstrationSet select_cds_nearest(const Corpus& pool, const EmbeddingStore& store,
                                    const Example& test, std::span<const float> test_vec,
                                    std::size_t k);
DemonstrationSet select_cds_nearest(const Corpus& pool, const EmbeddingStore& store,
                                    const Example& test, std::size_t k);

// Dispatch on spec.kind. `exclude` feeds the random strategies; the
// similarity strategies exclude the test by id and expect a pre-filtered pool.
DemonstrationSet select(const Corpus& pool, const EmbeddingStore* store, const Example& test,
                        std::span<const float> test_vec, const StrategySpec& spec,
                        const std::unordered_set<std::string>& exclude);

enum class ArrangePolicy { SelectionOrder, SeededShuffle };

ArrangePolicy arrange_policy_from_string(std::string_view name);
std::string_view to_string(ArrangePolicy policy);

// SelectionOrder keeps the strategy's output order. SeededShuffle permutes by
// the spec seed; CD sets shuffle pairs as units, original before
// counterfactual within each pair.
DemonstrationSet arrange(DemonstrationSet set, ArrangePolicy policy);

}  // namespace icl
