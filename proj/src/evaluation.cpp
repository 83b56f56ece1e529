#include "icl/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "icl/hash.hpp"
#include "icl/prompting.hpp"
#include "icl/rng.hpp"

namespace icl {

namespace {

constexpr char kSep = '\x1f';

const std::vector<std::string> kCanonicalStrategies = {"random", "nearest", "nearest-class",
                                                       "cds-random", "cds-nearest"};

bool needs_embeddings(StrategyKind kind) { return strategy_needs_embeddings(kind); }

std::string cell_key(const std::string& strategy, std::size_t k, const std::string& dataset) {
  return strategy + kSep + std::to_string(k) + kSep + dataset;
}

// Accuracy as a percentage with one decimal, e.g. 0.934 -> "93.4".
std::string format_accuracy(double acc) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", acc * 100.0);
  return buf;
}

std::string format_delta(double delta) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.1f", delta);
  return buf;
}

// Shortest round-trippable decimal form.
std::string format_raw(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void push_unique(std::vector<std::string>& order, const std::string& value) {
  if (std::find(order.begin(), order.end(), value) == order.end()) order.push_back(value);
}

}  // namespace

std::string record_key(const EvalRecord& record) {
  return record.dataset + kSep + record.strategy + kSep + std::to_string(record.k) + kSep +
         record.test_id + kSep + record.prompt_hash;
}

double accuracy(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw EvalError("accuracy: no records");
  std::size_t correct = 0;
  for (const EvalRecord& r : records) correct += r.correct ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

std::string_view to_string(Band band) {
  switch (band) {
    case Band::Degraded: return "degraded";
    case Band::Marginal: return "marginal";
    case Band::Improved: return "improved";
  }
  return "?";
}

DeltaBand delta_band(double cell_acc, double baseline_acc) {
  double delta = std::round((cell_acc - baseline_acc) * 1000.0) / 10.0;
  if (delta == 0.0) delta = 0.0;  // normalize -0.0
  DeltaBand out;
  out.delta = delta;
  if (delta < 0.0) {
    out.band = Band::Degraded;
  } else if (delta <= 1.0) {
    out.band = Band::Marginal;
  } else {
    out.band = Band::Improved;
  }
  return out;
}

RunReport RunReport::from_records(const std::vector<EvalRecord>& records, std::string baseline,
                                  const std::vector<std::string>& dataset_order) {
  RunReport report(std::move(baseline));
  for (const std::string& d : dataset_order) push_unique(report.dataset_order_, d);

  struct Tally {
    std::size_t correct = 0;
    std::size_t total = 0;
  };
  std::map<std::string, Tally> cells;
  std::vector<std::string> insert_order;
  for (const EvalRecord& r : records) {
    const std::string key = cell_key(r.strategy, r.k, r.dataset);
    auto [it, inserted] = cells.try_emplace(key);
    if (inserted) insert_order.push_back(key);
    it->second.total += 1;
    it->second.correct += r.correct ? 1 : 0;
  }
  // Deterministic cell order regardless of record order: canonical strategy
  // order first, then k, then dataset first-seen.
  for (const EvalRecord& r : records) push_unique(report.dataset_order_, r.dataset);
  for (const std::string& key : insert_order) {
    const Tally& t = cells.at(key);
    const std::size_t a = key.find(kSep);
    const std::size_t b = key.find(kSep, a + 1);
    report.set_cell(key.substr(0, a), std::stoul(key.substr(a + 1, b - a - 1)), key.substr(b + 1),
                    static_cast<double>(t.correct) / static_cast<double>(t.total));
  }
  return report;
}

void RunReport::set_cell(const std::string& strategy, std::size_t k, const std::string& dataset,
                         double acc) {
  grid_[cell_key(strategy, k, dataset)] = acc;
  if (std::find(strategy_order_.begin(), strategy_order_.end(), strategy) ==
      strategy_order_.end()) {
    // Keep the canonical strategy order when applicable; extensions append.
    strategy_order_.push_back(strategy);
    std::stable_sort(strategy_order_.begin(), strategy_order_.end(),
                     [](const std::string& a, const std::string& b) {
                       auto rank = [](const std::string& s) {
                         auto it = std::find(kCanonicalStrategies.begin(),
                                             kCanonicalStrategies.end(), s);
                         return std::distance(kCanonicalStrategies.begin(), it);
                       };
                       return rank(a) < rank(b);
                     });
  }
  push_unique(dataset_order_, dataset);
  if (std::find(k_order_.begin(), k_order_.end(), k) == k_order_.end()) {
    k_order_.push_back(k);
    std::sort(k_order_.begin(), k_order_.end());
  }
}

bool RunReport::has_cell(const std::string& strategy, std::size_t k,
                         const std::string& dataset) const {
  return grid_.count(cell_key(strategy, k, dataset)) != 0;
}

double RunReport::cell(const std::string& strategy, std::size_t k,
                       const std::string& dataset) const {
  auto it = grid_.find(cell_key(strategy, k, dataset));
  if (it == grid_.end()) {
    throw EvalError("missing report cell (" + strategy + ", k=" + std::to_string(k) + ", " +
                    dataset + ")");
  }
  return it->second;
}

std::optional<DeltaBand> RunReport::delta(const std::string& strategy, std::size_t k,
                                          const std::string& dataset) const {
  if (strategy == baseline_) return std::nullopt;
  if (!has_cell(strategy, k, dataset) || !has_cell(baseline_, k, dataset)) return std::nullopt;
  return delta_band(cell(strategy, k, dataset), cell(baseline_, k, dataset));
}

std::vector<std::size_t> RunReport::ks() const { return k_order_; }

std::string RunReport::to_markdown() const {
  std::ostringstream os;
  os << "| Methods |";
  for (std::size_t k : k_order_) {
    for (const std::string& d : dataset_order_) os << " " << k << "-shot " << d << " |";
  }
  os << "\n|---|";
  for (std::size_t i = 0; i < k_order_.size() * dataset_order_.size(); ++i) os << "---|";
  os << "\n";
  for (const std::string& strategy : strategy_order_) {
    os << "| " << strategy << " |";
    for (std::size_t k : k_order_) {
      for (const std::string& d : dataset_order_) {
        if (!has_cell(strategy, k, d)) {
          os << " - |";
          continue;
        }
        os << " " << format_accuracy(cell(strategy, k, d));
        if (auto db = delta(strategy, k, d)) {
          os << " (" << format_delta(db->delta) << " " << to_string(db->band) << ")";
        }
        os << " |";
      }
    }
    os << "\n";
  }
  return os.str();
}

std::string RunReport::to_csv() const {
  std::ostringstream os;
  os << "strategy,k,dataset,accuracy,delta,band\n";
  for (const std::string& strategy : strategy_order_) {
    for (std::size_t k : k_order_) {
      for (const std::string& d : dataset_order_) {
        if (!has_cell(strategy, k, d)) continue;
        os << strategy << "," << k << "," << d << "," << format_raw(cell(strategy, k, d));
        if (auto db = delta(strategy, k, d)) {
          os << "," << format_delta(db->delta) << "," << to_string(db->band);
        } else {
          os << ",,";
        }
        os << "\n";
      }
    }
  }
  return os.str();
}

std::uint64_t test_split_seed(std::uint64_t run_seed, const std::string& dataset) {
  return derive_seed(run_seed, {"test-split", dataset});
}

std::vector<EvalRecord> run_icl_eval(const EvalPlan& plan, Provider& provider, EvalSink* sink) {
  if (plan.pool == nullptr) throw EvalError("run_icl_eval: no demonstration pool");
  const EmbeddingStore* query_store = plan.query_store ? plan.query_store : plan.store;
  Verbalizer verbalizer(plan.pool->task());

  struct Pending {
    EvalRecord record;
    CompletionRequest request;
  };
  std::vector<EvalRecord> done;
  std::vector<Pending> pending;

  for (StrategyKind kind : plan.strategies) {
    for (std::size_t k : plan.ks) {
      for (const Example& test : plan.tests) {
        StrategySpec spec{kind, k,
                          derive_seed(plan.seed, {plan.dataset, strategy_name(kind),
                                                  std::to_string(k), test.id})};
        std::span<const float> test_vec{};
        if (needs_embeddings(kind)) {
          if (query_store == nullptr) {
            throw EvalError(std::string(strategy_name(kind)) + " requires embeddings");
          }
          test_vec = query_store->vector_of(test.id);
        }
        DemonstrationSet set = select(*plan.pool, plan.store, test, test_vec, spec, {});
        set = arrange(std::move(set), plan.arrangement);
        validate_demonstration_set(set);
        RenderedPrompt prompt = render_icl(set, test);

        EvalRecord record;
        record.dataset = plan.dataset;
        record.strategy = std::string(strategy_name(kind));
        record.k = k;
        record.test_id = test.id;
        record.gold = std::string(test.label.surface());
        record.prompt_hash = prompt.content_hash;

        if (sink != nullptr) {
          if (auto existing = sink->find(record_key(record))) {
            done.push_back(*existing);
            continue;
          }
        }
        pending.push_back(
            {std::move(record),
             CompletionRequest{plan.model, prompt.text, plan.temperature, plan.max_tokens}});
      }
    }
  }

  if (!pending.empty()) {
    std::vector<CompletionRequest> requests;
    requests.reserve(pending.size());
    for (const Pending& p : pending) requests.push_back(p.request);
    const std::vector<CompletionOutcome> outcomes = provider.complete_many(requests);

    std::size_t failures = 0;
    std::string first_error;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (!outcomes[i].ok) {
        ++failures;
        if (first_error.empty()) first_error = outcomes[i].error;
        continue;
      }
      EvalRecord record = pending[i].record;
      record.completion = outcomes[i].text;
      if (auto label = parse_label(record.completion, verbalizer)) {
        record.predicted = std::string(label->surface());
      }
      record.correct = record.predicted.has_value() && *record.predicted == record.gold;
      if (sink != nullptr) sink->persist(record);
      done.push_back(std::move(record));
    }
    if (failures > 0) {
      throw GatewayError(GatewayError::Kind::Aborted,
                         "run aborted: " + std::to_string(failures) + " of " +
                             std::to_string(pending.size()) +
                             " completions failed (partial records persisted; re-run to "
                             "resume). First error: " +
                             first_error);
    }
  }

  std::sort(done.begin(), done.end(), [](const EvalRecord& a, const EvalRecord& b) {
    return std::tie(a.dataset, a.strategy, a.k, a.test_id) <
           std::tie(b.dataset, b.strategy, b.k, b.test_id);
  });
  return done;
}

std::string_view to_string(Grade grade) {
  switch (grade) {
    case Grade::Satisfying: return "satisfying";
    case Grade::Acceptable: return "acceptable";
    case Grade::Invalid: return "invalid";
  }
  return "?";
}

Grade grade_from_string(std::string_view s) {
  if (s == "satisfying") return Grade::Satisfying;
  if (s == "acceptable") return Grade::Acceptable;
  if (s == "invalid") return Grade::Invalid;
  throw EvalError("unknown grade '" + std::string(s) + "'");
}

bool induction_extension(StrategyKind kind) {
  return kind == StrategyKind::NearestClass || kind == StrategyKind::CdsNearest;
}

std::vector<InstructionRecord> run_induction(
    const InductionPlan& plan, Provider& provider, const std::vector<InstructionRecord>& existing,
    const std::function<void(const InstructionRecord&)>& on_record) {
  if (plan.corpus == nullptr) throw EvalError("run_induction: no corpus");
  if (plan.count == 0) throw EvalError("run_induction: count must be >= 1");
  validate_spec({plan.strategy, plan.k, 0});

  std::map<std::string, const InstructionRecord*> have;
  for (const InstructionRecord& r : existing) have.emplace(r.id, &r);

  // The nearest strategies anchor each draw on a distinct corpus example.
  std::vector<Example> anchors;
  if (needs_embeddings(plan.strategy)) {
    if (plan.store == nullptr) {
      throw EvalError(std::string(strategy_name(plan.strategy)) + " induction needs embeddings");
    }
    if (plan.count > plan.corpus->size()) {
      throw EvalError("induction count " + std::to_string(plan.count) +
                      " exceeds corpus size; nearest anchors must be distinct");
    }
    anchors = sample_test_split(*plan.corpus, plan.count, derive_seed(plan.seed, {"anchors"}));
  }

  struct Pending {
    InstructionRecord record;
    CompletionRequest request;
  };
  std::vector<InstructionRecord> done;
  std::vector<Pending> pending;
  const std::string name(strategy_name(plan.strategy));

  for (std::size_t i = 0; i < plan.count; ++i) {
    char idbuf[64];
    std::snprintf(idbuf, sizeof(idbuf), "%s-%04zu", name.c_str(), i);
    const std::string id = idbuf;
    if (auto it = have.find(id); it != have.end()) {
      done.push_back(*it->second);
      continue;
    }

    StrategySpec spec{plan.strategy, plan.k, derive_seed(plan.seed, {"induce", name,
                                                                     std::to_string(i)})};
    DemonstrationSet set;
    if (needs_embeddings(plan.strategy)) {
      const Example& anchor = anchors[i];
      set = select(*plan.corpus, plan.store, anchor, plan.store->vector_of(anchor.id), spec, {});
    } else if (plan.strategy == StrategyKind::Random) {
      set = select_random(*plan.corpus, spec, {});
    } else {
      set = select_cds_random(*plan.corpus, spec, {});
    }
    set = arrange(std::move(set), ArrangePolicy::SelectionOrder);
    RenderedPrompt prompt = render_induction(set);

    InstructionRecord record;
    record.id = id;
    record.strategy = name;
    record.k = plan.k;
    for (const Example& e : set.demos) {
      record.demo_ids.push_back(e.id);
      record.demo_display.push_back(induction_input(e) + " -> " +
                                    std::string(e.label.surface()));
    }
    pending.push_back(
        {std::move(record),
         CompletionRequest{plan.model, prompt.text, plan.temperature, plan.max_tokens}});
  }

  if (!pending.empty()) {
    std::vector<CompletionRequest> requests;
    requests.reserve(pending.size());
    for (const Pending& p : pending) requests.push_back(p.request);
    const std::vector<CompletionOutcome> outcomes = provider.complete_many(requests);
    std::size_t failures = 0;
    std::string first_error;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (!outcomes[i].ok) {
        ++failures;
        if (first_error.empty()) first_error = outcomes[i].error;
        continue;
      }
      InstructionRecord record = pending[i].record;
      record.instruction = outcomes[i].text;
      if (on_record) on_record(record);
      done.push_back(std::move(record));
    }
    if (failures > 0) {
      throw GatewayError(GatewayError::Kind::Aborted,
                         "induction aborted: " + std::to_string(failures) + " of " +
                             std::to_string(pending.size()) + " completions failed: " +
                             first_error);
    }
  }

  std::sort(done.begin(), done.end(),
            [](const InstructionRecord& a, const InstructionRecord& b) { return a.id < b.id; });
  return done;
}

void record_grade(std::vector<InstructionRecord>& records, const std::string& id, Grade grade) {
  for (InstructionRecord& r : records) {
    if (r.id != id) continue;
    if (r.grade.has_value()) {
      throw EvalError("record '" + id + "' is already graded as '" +
                      std::string(to_string(*r.grade)) + "'");
    }
    r.grade = grade;
    return;
  }
  throw EvalError("no instruction record with id '" + id + "'");
}

double GradeDistribution::percent(Grade grade) const {
  if (total == 0) return 0.0;
  return 100.0 * static_cast<double>(counts[static_cast<std::size_t>(grade)]) /
         static_cast<double>(total);
}

std::map<std::string, GradeDistribution> aggregate_grades(
    const std::vector<InstructionRecord>& records) {
  std::map<std::string, GradeDistribution> out;
  for (const InstructionRecord& r : records) {
    if (!r.grade.has_value()) {
      throw EvalError("record '" + r.id + "' is ungraded; grade all records before aggregating");
    }
    GradeDistribution& dist = out[r.strategy];
    ++dist.counts[static_cast<std::size_t>(*r.grade)];
    ++dist.total;
  }
  return out;
}

namespace {

std::string format_percent(double pct) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", pct);
  return buf;
}

}  // namespace

std::string grades_to_markdown(const std::map<std::string, GradeDistribution>& distributions) {
  std::ostringstream os;
  os << "| Strategy | Satisfying | Acceptable | Invalid | Total |\n";
  os << "|---|---|---|---|---|\n";
  for (const auto& [strategy, dist] : distributions) {
    os << "| " << strategy << " |";
    for (Grade g : {Grade::Satisfying, Grade::Acceptable, Grade::Invalid}) {
      os << " " << dist.counts[static_cast<std::size_t>(g)] << " ("
         << format_percent(dist.percent(g)) << "%) |";
    }
    os << " " << dist.total << " |\n";
  }
  return os.str();
}

std::string grades_to_csv(const std::map<std::string, GradeDistribution>& distributions) {
  std::ostringstream os;
  os << "strategy,grade,count,percent\n";
  for (const auto& [strategy, dist] : distributions) {
    for (Grade g : {Grade::Satisfying, Grade::Acceptable, Grade::Invalid}) {
      os << strategy << "," << to_string(g) << "," << dist.counts[static_cast<std::size_t>(g)]
         << "," << format_raw(dist.percent(g)) << "\n";
    }
  }
  return os.str();
}

}  // namespace icl
