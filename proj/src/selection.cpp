#include "icl/selection.hpp"

#include <algorithm>
#include <limits>

#include "icl/rng.hpp"

namespace icl {

namespace {

// Pairs eligible for CD selection: neither member excluded or equal to the
// test id. Ascending pair_id order (Corpus keeps pairs sorted).
std::vector<const CadPair*> eligible_pairs(const Corpus& pool,
                                           const std::unordered_set<std::string>& exclude,
                                           std::string_view test_id) {
  std::vector<const CadPair*> out;
  out.reserve(pool.pairs().size());
  for (const CadPair& p : pool.pairs()) {
    if (exclude.count(p.original.id) != 0 || exclude.count(p.counterfactual.id) != 0) continue;
    if (p.original.id == test_id || p.counterfactual.id == test_id) continue;
    out.push_back(&p);
  }
  return out;
}

DemonstrationSet expand_pairs(std::vector<const CadPair*> chosen, std::vector<double> pair_scores,
                              const StrategySpec& spec, std::string test_id) {
  DemonstrationSet set;
  set.strategy = spec;
  set.test_id = std::move(test_id);
  set.demos.reserve(chosen.size() * 2);
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    set.demos.push_back(chosen[i]->original);
    set.demos.push_back(chosen[i]->counterfactual);
    if (!pair_scores.empty()) {
      set.scores.push_back(pair_scores[i]);
      set.scores.push_back(pair_scores[i]);
    }
  }
  return set;
}

std::span<const float> require_vec(const EmbeddingStore& store, const Example& e) {
  if (!store.contains(e.id)) {
    throw SelectionError("missing embedding for example '" + e.id + "'");
  }
  return store.vector_of(e.id);
}

}  // namespace

std::string_view strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::Random: return "random";
    case StrategyKind::Nearest: return "nearest";
    case StrategyKind::NearestClass: return "nearest-class";
    case StrategyKind::CdsRandom: return "cds-random";
    case StrategyKind::CdsNearest: return "cds-nearest";
  }
  return "?";
}

StrategyKind strategy_from_string(std::string_view name) {
  if (name == "random") return StrategyKind::Random;
  if (name == "nearest") return StrategyKind::Nearest;
  if (name == "nearest-class") return StrategyKind::NearestClass;
  if (name == "cds-random") return StrategyKind::CdsRandom;
  if (name == "cds-nearest") return StrategyKind::CdsNearest;
  throw SelectionError("unknown strategy '" + std::string(name) +
                       "' (expected random|nearest|nearest-class|cds-random|cds-nearest)");
}

bool is_cd_strategy(StrategyKind kind) {
  return kind == StrategyKind::CdsRandom || kind == StrategyKind::CdsNearest;
}

bool strategy_needs_embeddings(StrategyKind kind) {
  return kind == StrategyKind::Nearest || kind == StrategyKind::NearestClass ||
         kind == StrategyKind::CdsNearest;
}

void validate_spec(const StrategySpec& spec) {
  if (spec.k < 1) throw SelectionError("k must be >= 1");
  if (is_cd_strategy(spec.kind) && spec.k % 2 != 0) {
    throw SelectionError("k must be even for " + std::string(strategy_name(spec.kind)) +
                         ", got k=" + std::to_string(spec.k));
  }
}

void validate_demonstration_set(const DemonstrationSet& set) {
  if (set.demos.size() != set.strategy.k) {
    throw SelectionError("demonstration set has " + std::to_string(set.demos.size()) +
                         " demos, expected k=" + std::to_string(set.strategy.k));
  }
  std::unordered_set<std::string> ids;
  for (const Example& e : set.demos) {
    if (!ids.insert(e.id).second) throw SelectionError("duplicate demo id '" + e.id + "'");
    if (e.id == set.test_id) {
      throw SelectionError("test example '" + e.id + "' appears among demos");
    }
  }
  if (is_cd_strategy(set.strategy.kind)) {
    for (std::size_t i = 0; i + 1 < set.demos.size(); i += 2) {
      const Example& a = set.demos[i];
      const Example& b = set.demos[i + 1];
      if (a.cd_role != CdRole::Original || b.cd_role != CdRole::Counterfactual ||
          a.pair_id != b.pair_id) {
        throw SelectionError("demos " + a.id + "," + b.id +
                             " do not form an adjacent (original, counterfactual) pair");
      }
    }
  }
}

DemonstrationSet select_random(const Corpus& pool, const StrategySpec& spec,
                               const std::unordered_set<std::string>& exclude) {
  validate_spec(spec);
  std::vector<const Example*> eligible;
  eligible.reserve(pool.size());
  for (const Example& e : pool.examples()) {
    if (exclude.count(e.id) == 0) eligible.push_back(&e);
  }
  if (eligible.size() < spec.k) {
    throw SelectionError("pool has " + std::to_string(eligible.size()) +
                         " eligible examples, need k=" + std::to_string(spec.k));
  }
  Rng rng(spec.seed);
  eligible = rng.sample(std::move(eligible), spec.k);

  DemonstrationSet set;
  set.strategy = spec;
  for (const Example* e : eligible) set.demos.push_back(*e);
  return set;
}

DemonstrationSet select_nearest(const Corpus& pool, const EmbeddingStore& store,
                                const Example& test, std::span<const float> test_vec,
                                std::size_t k) {
  StrategySpec spec{StrategyKind::Nearest, k, 0};
  validate_spec(spec);
  for (const Example& e : pool.examples()) {
    if (e.id != test.id && !store.contains(e.id)) {
      throw SelectionError("missing embedding for example '" + e.id + "'");
    }
  }
  std::vector<ScoredId> ranked;
  try {
    ranked = top_k(store, test_vec, k, [&](const std::string& id) {
      return id != test.id && pool.contains(id);
    });
  } catch (const EmbeddingError& e) {
    throw SelectionError(e.what());
  }
  DemonstrationSet set;
  set.strategy = spec;
  set.test_id = test.id;
  for (const ScoredId& s : ranked) {
    set.demos.push_back(pool.at(s.id));
    set.scores.push_back(s.score);
  }
  return set;
}

DemonstrationSet select_nearest(const Corpus& pool, const EmbeddingStore& store,
                                const Example& test, std::size_t k) {
  return select_nearest(pool, store, test, require_vec(store, test), k);
}

DemonstrationSet select_nearest_class(const Corpus& pool, const EmbeddingStore& store,
                                      const Example& test, std::span<const float> test_vec,
                                      std::size_t k) {
  StrategySpec spec{StrategyKind::NearestClass, k, 0};
  validate_spec(spec);
  const std::vector<LabelValue>& classes = label_classes(pool.task());
  const std::size_t n_classes = classes.size();

  struct ClassState {
    LabelValue label;
    std::size_t candidates = 0;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t alloc = 0;
  };
  std::vector<ClassState> state;
  for (LabelValue cls : classes) state.push_back({cls});

  for (ClassState& cs : state) {
    auto in_class = [&](const std::string& id) {
      if (id == test.id) return false;
      const Example* e = pool.find(id);
      return e != nullptr && e->label.value() == cs.label;
    };
    for (const Example& e : pool.examples()) {
      if (e.id != test.id && e.label.value() == cs.label) ++cs.candidates;
    }
    if (cs.candidates > 0) {
      cs.best = top_k(store, test_vec, 1, in_class)[0].score;
    }
  }

  for (ClassState& cs : state) cs.alloc = k / n_classes;
  const std::size_t remainder = k % n_classes;
  if (remainder > 0) {
    // Remainder slots go to the classes whose nearest member is most similar;
    // ties keep canonical class order.
    std::vector<std::size_t> order(state.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return state[a].best > state[b].best; });
    for (std::size_t i = 0; i < remainder; ++i) ++state[order[i]].alloc;
  }

  std::vector<ScoredId> picked;
  for (ClassState& cs : state) {
    if (cs.alloc == 0) continue;
    if (cs.candidates < cs.alloc) {
      throw SelectionError("class '" + std::string(to_string(cs.label)) + "' has only " +
                           std::to_string(cs.candidates) + " candidates, needs " +
                           std::to_string(cs.alloc));
    }
    auto in_class = [&](const std::string& id) {
      if (id == test.id) return false;
      const Example* e = pool.find(id);
      return e != nullptr && e->label.value() == cs.label;
    };
    for (ScoredId& s : top_k(store, test_vec, cs.alloc, in_class)) {
      picked.push_back(std::move(s));
    }
  }

  std::sort(picked.begin(), picked.end(), [](const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });

  DemonstrationSet set;
  set.strategy = spec;
  set.test_id = test.id;
  for (const ScoredId& s : picked) {
    set.demos.push_back(pool.at(s.id));
    set.scores.push_back(s.score);
  }
  return set;
}

DemonstrationSet select_nearest_class(const Corpus& pool, const EmbeddingStore& store,
                                      const Example& test, std::size_t k) {
  return select_nearest_class(pool, store, test, require_vec(store, test), k);
}

DemonstrationSet select_cds_random(const Corpus& pool, const StrategySpec& spec,
                                   const std::unordered_set<std::string>& exclude) {
  validate_spec(spec);
  std::vector<const CadPair*> eligible = eligible_pairs(pool, exclude, "");
  const std::size_t need = spec.k / 2;
  if (eligible.size() < need) {
    throw SelectionError("pool has " + std::to_string(eligible.size()) +
                         " eligible pairs, need " + std::to_string(need));
  }
  Rng rng(spec.seed);
  eligible = rng.sample(std::move(eligible), need);
  return expand_pairs(std::move(eligible), {}, spec, "");
}

DemonstrationSet select_cds_nearest(const Corpus& pool, const EmbeddingStore& store,
                                    const Example& test, std::span<const float> test_vec,
                                    std::size_t k) {
  StrategySpec spec{StrategyKind::CdsNearest, k, 0};
  validate_spec(spec);
  std::vector<const CadPair*> eligible = eligible_pairs(pool, {}, test.id);
  const std::size_t need = k / 2;
  if (eligible.size() < need) {
    throw SelectionError("pool has " + std::to_string(eligible.size()) +
                         " eligible pairs, need " + std::to_string(need));
  }

  std::vector<double> scores(eligible.size());
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    const CadPair& p = *eligible[i];
    const double a = cosine_similarity(test_vec, require_vec(store, p.original));
    const double b = cosine_similarity(test_vec, require_vec(store, p.counterfactual));
    scores[i] = std::max(a, b);
  }
  std::vector<std::size_t> order(eligible.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return eligible[a]->pair_id < eligible[b]->pair_id;
  });

  std::vector<const CadPair*> chosen;
  std::vector<double> chosen_scores;
  for (std::size_t i = 0; i < need; ++i) {
    chosen.push_back(eligible[order[i]]);
    chosen_scores.push_back(scores[order[i]]);
  }
  DemonstrationSet set = expand_pairs(std::move(chosen), std::move(chosen_scores), spec, test.id);
  return set;
}

DemonstrationSet select_cds_nearest(const Corpus& pool, const EmbeddingStore& store,
                                    const Example& test, std::size_t k) {
  return select_cds_nearest(pool, store, test, require_vec(store, test), k);
}

DemonstrationSet select(const Corpus& pool, const EmbeddingStore* store, const Example& test,
                        std::span<const float> test_vec, const StrategySpec& spec,
                        const std::unordered_set<std::string>& exclude) {
  validate_spec(spec);
  auto with_test = [&]() {
    std::unordered_set<std::string> ids = exclude;
    ids.insert(test.id);
    return ids;
  };
  switch (spec.kind) {
    case StrategyKind::Random: {
      DemonstrationSet set = select_random(pool, spec, with_test());
      set.test_id = test.id;
      return set;
    }
    case StrategyKind::CdsRandom: {
      DemonstrationSet set = select_cds_random(pool, spec, with_test());
      set.test_id = test.id;
      return set;
    }
    case StrategyKind::Nearest:
    case StrategyKind::NearestClass:
    case StrategyKind::CdsNearest: {
      if (store == nullptr) {
        throw SelectionError(std::string(strategy_name(spec.kind)) +
                             " requires an embedding store");
      }
      DemonstrationSet set =
          spec.kind == StrategyKind::Nearest
              ? select_nearest(pool, *store, test, test_vec, spec.k)
              : spec.kind == StrategyKind::NearestClass
                    ? select_nearest_class(pool, *store, test, test_vec, spec.k)
                    : select_cds_nearest(pool, *store, test, test_vec, spec.k);
      set.strategy.seed = spec.seed;
      return set;
    }
  }
  throw SelectionError("unhandled strategy kind");
}

ArrangePolicy arrange_policy_from_string(std::string_view name) {
  if (name == "selection-order") return ArrangePolicy::SelectionOrder;
  if (name == "seeded-shuffle") return ArrangePolicy::SeededShuffle;
  throw SelectionError("unknown arrangement '" + std::string(name) +
                       "' (expected selection-order|seeded-shuffle)");
}

std::string_view to_string(ArrangePolicy policy) {
  return policy == ArrangePolicy::SelectionOrder ? "selection-order" : "seeded-shuffle";
}

DemonstrationSet arrange(DemonstrationSet set, ArrangePolicy policy) {
  if (policy == ArrangePolicy::SelectionOrder) return set;
  Rng rng(set.strategy.seed);
  const bool has_scores = !set.scores.empty();
  if (is_cd_strategy(set.strategy.kind)) {
    std::vector<std::size_t> blocks(set.demos.size() / 2);
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i] = i;
    rng.shuffle(blocks);
    DemonstrationSet out = set;
    out.demos.clear();
    out.scores.clear();
    for (std::size_t b : blocks) {
      out.demos.push_back(set.demos[2 * b]);
      out.demos.push_back(set.demos[2 * b + 1]);
      if (has_scores) {
        out.scores.push_back(set.scores[2 * b]);
        out.scores.push_back(set.scores[2 * b + 1]);
      }
    }
    return out;
  }
  std::vector<std::size_t> order(set.demos.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  DemonstrationSet out = set;
  out.demos.clear();
  out.scores.clear();
  for (std::size_t i : order) {
    out.demos.push_back(set.demos[i]);
    if (has_scores) out.scores.push_back(set.scores[i]);
  }
  return out;
}

}  // namespace icl
