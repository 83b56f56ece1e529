#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace icl {

enum class TaskKind { Sentiment, Nli };

enum class LabelValue { Positive, Negative, Entailment, Neutral, Contradiction };

enum class CdRole { None, Original, Counterfactual };

std::string_view to_string(TaskKind task);
std::string_view to_string(LabelValue value);
TaskKind task_kind_from_string(std::string_view s);

// Label classes of a task, in canonical order.
const std::vector<LabelValue>& label_classes(TaskKind task);

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A task label. Construction rejects values outside the task's label set.
class Label {
 public:
  Label(TaskKind task, LabelValue value);
  static Label parse(TaskKind task, std::string_view surface);

  TaskKind task() const { return task_; }
  LabelValue value() const { return value_; }
  std::string_view surface() const { return to_string(value_); }

  friend bool operator==(const Label& a, const Label& b) {
    return a.task_ == b.task_ && a.value_ == b.value_;
  }
  friend bool operator!=(const Label& a, const Label& b) { return !(a == b); }

 private:
  TaskKind task_;
  LabelValue value_;
};

// One labeled instance. Sentiment examples use `text`; NLI examples use
// `premise` and `hypothesis`. pair_id is non-empty iff cd_role != None.
struct Example {
  std::string id;
  TaskKind task = TaskKind::Sentiment;
  std::string text;
  std::string premise;
  std::string hypothesis;
  Label label{TaskKind::Sentiment, LabelValue::Positive};
  std::string source;
  std::string pair_id;
  CdRole cd_role = CdRole::None;

  // Flat content used for embedding and edit-distance: the text itself for
  // sentiment, "premise hypothesis" for NLI.
  std::string content() const;
};

// An (original, counterfactual) candidate pair assembled from pairing
// metadata. Label-flip and edit-ratio conformance are audited by
// validate_pairs, not enforced at assembly.
struct CadPair {
  std::string pair_id;
  Example original;
  Example counterfactual;
  double edit_ratio = 0.0;
};

class Corpus {
 public:
  Corpus(TaskKind task, std::vector<Example> examples, std::vector<CadPair> pairs);

  TaskKind task() const { return task_; }
  std::size_t size() const { return examples_.size(); }
  std::size_t pair_count() const { return pairs_.size(); }

  // Ascending-id order; the canonical enumeration for seeded sampling.
  const std::vector<Example>& examples() const { return examples_; }
  const std::vector<CadPair>& pairs() const { return pairs_; }

  const Example* find(std::string_view id) const;
  const Example& at(std::string_view id) const;
  const CadPair* find_pair(std::string_view pair_id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }

  // Copy with the given example ids removed. Pairs with a removed member are
  // dropped.
  Corpus without(const std::unordered_set<std::string>& exclude_ids) const;

 private:
  TaskKind task_;
  std::vector<Example> examples_;
  std::vector<CadPair> pairs_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::size_t> pair_by_id_;
};

// Split on Unicode whitespace (White_Space code points), no case folding.
std::vector<std::string> whitespace_tokens(std::string_view text);

// Token-level Levenshtein distance divided by max(len(a), len(b)).
// Throws CorpusError when both sequences are empty.
double normalized_edit_distance(const std::vector<std::string>& a,
                                const std::vector<std::string>& b);

// Dataset file loader: one JSON record per line (see README for the schema).
// Unknown fields are ignored; a warning per field name is appended to
// `warnings` when provided. source_name defaults to the file stem.
Corpus load_corpus(const std::string& path, TaskKind task, std::string source_name = "",
                   std::vector<std::string>* warnings = nullptr);

struct PairViolation {
  enum class Kind { SameLabel, EditRatioExceeded };
  std::string pair_id;
  Kind kind;
  double edit_ratio = 0.0;
  std::string detail;
};

struct PairValidationReport {
  double max_edit_ratio = 0.0;
  std::vector<PairViolation> violations;
  bool ok() const { return violations.empty(); }
};

// Report-only audit of assembled pairs: flags pairs whose labels do not
// differ and pairs whose edit_ratio exceeds the threshold.
PairValidationReport validate_pairs(const Corpus& corpus, double max_edit_ratio);

// n distinct examples drawn without replacement, deterministic per seed.
// Throws CorpusError when n exceeds the corpus size.
std::vector<Example> sample_test_split(const Corpus& corpus, std::size_t n, std::uint64_t seed);

}  // namespace icl
