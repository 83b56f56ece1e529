#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "icl/corpus.hpp"
#include "icl/gateway.hpp"
#include "icl/selection.hpp"

namespace icl {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Atomic result of one ICL evaluation: test example x strategy x k.
struct EvalRecord {
  std::string dataset;
  std::string strategy;
  std::size_t k = 0;
  std::string test_id;
  std::string gold;
  std::optional<std::string> predicted;  // nullopt = unparseable completion
  bool correct = false;
  std::string prompt_hash;
  std::string completion;
};

// Resume/identity key: (dataset, strategy, k, test_id, prompt_hash).
std::string record_key(const EvalRecord& record);

// correct / total. Unparseable completions count in the denominator.
double accuracy(const std::vector<EvalRecord>& records);

enum class Band { Degraded, Marginal, Improved };

std::string_view to_string(Band band);

struct DeltaBand {
  double delta = 0.0;  // percentage points, rounded to one decimal
  Band band = Band::Marginal;
};

// delta = (cell - baseline) * 100 rounded to one decimal; Degraded iff
// delta < 0, Marginal iff 0 <= delta <= 1.0, Improved iff delta > 1.0.
DeltaBand delta_band(double cell_acc, double baseline_acc);

// Accuracy grid keyed by (strategy, k, dataset) with per-cell deltas and
// bands against the baseline strategy at the same (k, dataset).
class RunReport {
 public:
  explicit RunReport(std::string baseline = "random") : baseline_(std::move(baseline)) {}

  static RunReport from_records(const std::vector<EvalRecord>& records,
                                std::string baseline = "random",
                                const std::vector<std::string>& dataset_order = {});

  void set_cell(const std::string& strategy, std::size_t k, const std::string& dataset,
                double accuracy);
  bool has_cell(const std::string& strategy, std::size_t k, const std::string& dataset) const;
  double cell(const std::string& strategy, std::size_t k, const std::string& dataset) const;

  // nullopt for the baseline row and for cells without a baseline cell.
  std::optional<DeltaBand> delta(const std::string& strategy, std::size_t k,
                                 const std::string& dataset) const;

  const std::string& baseline() const { return baseline_; }
  const std::vector<std::string>& strategies() const { return strategy_order_; }
  const std::vector<std::string>& datasets() const { return dataset_order_; }
  std::vector<std::size_t> ks() const;

  std::string to_markdown() const;
  std::string to_csv() const;

 private:
  std::string baseline_;
  std::map<std::string, double> grid_;  // "strategy\x1fk\x1fdataset" -> accuracy
  std::vector<std::string> strategy_order_;
  std::vector<std::string> dataset_order_;
  std::vector<std::size_t> k_order_;
};

// Persistence hook for resumable runs.
class EvalSink {
 public:
  virtual ~EvalSink() = default;
  virtual std::optional<EvalRecord> find(const std::string& key) = 0;
  virtual void persist(const EvalRecord& record) = 0;
};

struct EvalPlan {
  std::string dataset;
  const Corpus* pool = nullptr;
  const EmbeddingStore* store = nullptr;        // demonstration-pool embeddings
  const EmbeddingStore* query_store = nullptr;  // test embeddings; defaults to store
  std::vector<Example> tests;
  std::vector<StrategyKind> strategies;
  std::vector<std::size_t> ks;
  std::uint64_t seed = 0;
  ArrangePolicy arrangement = ArrangePolicy::SelectionOrder;
  std::string model;
  double temperature = 0.0;
  int max_tokens = 8;
};

// Seed used to draw a dataset's test split within a run.
std::uint64_t test_split_seed(std::uint64_t run_seed, const std::string& dataset);

// One record per (test x strategy x k); pipeline per test is
// select -> arrange -> render -> complete -> parse. Completed records are
// persisted through the sink as they arrive; on provider failure the run
// aborts with partials persisted and is resumable via record keys. The
// returned records are sorted by (dataset, strategy, k, test_id).
std::vector<EvalRecord> run_icl_eval(const EvalPlan& plan, Provider& provider,
                                     EvalSink* sink = nullptr);

enum class Grade { Satisfying, Acceptable, Invalid };

std::string_view to_string(Grade grade);
Grade grade_from_string(std::string_view s);

struct InstructionRecord {
  std::string id;
  std::string strategy;
  std::size_t k = 0;
  std::vector<std::string> demo_ids;
  std::vector<std::string> demo_display;  // "input -> label" lines for grading
  std::string instruction;                // raw completion, untrimmed
  std::optional<Grade> grade;
};

struct InductionPlan {
  const Corpus* corpus = nullptr;
  const EmbeddingStore* store = nullptr;  // required for similarity strategies
  StrategyKind strategy = StrategyKind::Random;
  std::size_t k = 4;
  std::size_t count = 100;
  std::uint64_t seed = 0;
  std::string model;
  double temperature = 1.0;
  int max_tokens = 128;
};

// True for strategies the induction probe treats as extensions
// (nearest-class, cds-nearest).
bool induction_extension(StrategyKind kind);

// `count` records, each from an independent seeded demonstration draw; the
// nearest strategies anchor each draw on a distinct sampled corpus example.
// `existing` records (by id) are kept as-is, making interrupted sweeps
// resumable; `on_record` fires for each newly completed record so callers can
// persist partial progress before an abort.
std::vector<InstructionRecord> run_induction(
    const InductionPlan& plan, Provider& provider,
    const std::vector<InstructionRecord>& existing = {},
    const std::function<void(const InstructionRecord&)>& on_record = nullptr);

// Assigns a grade exactly once; throws on unknown id or regrade.
void record_grade(std::vector<InstructionRecord>& records, const std::string& id, Grade grade);

struct GradeDistribution {
  std::array<std::size_t, 3> counts{};  // indexed by Grade
  std::size_t total = 0;
  double percent(Grade grade) const;
};

// Per-strategy grade distributions; throws if any record is ungraded.
std::map<std::string, GradeDistribution> aggregate_grades(
    const std::vector<InstructionRecord>& records);

std::string grades_to_markdown(const std::map<std::string, GradeDistribution>& distributions);
std::string grades_to_csv(const std::map<std::string, GradeDistribution>& distributions);

}  // namespace icl
