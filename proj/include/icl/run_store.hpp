#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "icl/evaluation.hpp"

namespace icl {

class RunStoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Owns a run directory: eval_records.jsonl, instruction_records.jsonl,
// run_manifest.json and rendered reports. Record files are canonical-sorted
// and timestamp-free so equal runs are byte-identical; in-progress eval
// records live in a .partial file until the run completes.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }

  // -- ICL evaluation records --
  std::vector<EvalRecord> load_eval_records() const;  // canonical + partial
  bool has_eval_records() const;
  void append_eval_partial(const EvalRecord& record);
  // Sorts, writes the canonical file, and removes the partial file.
  void finalize_eval_records(std::vector<EvalRecord> records);

  // -- instruction records --
  std::vector<InstructionRecord> load_instructions() const;
  bool has_instructions() const;
  void write_instructions(std::vector<InstructionRecord> records);  // atomic rewrite
  // Persisted single-shot grading; throws on unknown id or regrade.
  void grade_instruction(const std::string& id, Grade grade);

  void write_manifest(const nlohmann::ordered_json& manifest);
  std::optional<nlohmann::ordered_json> read_manifest() const;

  std::filesystem::path write_text(const std::string& filename, const std::string& content) const;

  std::filesystem::path eval_records_path() const { return dir_ / "eval_records.jsonl"; }
  std::filesystem::path eval_partial_path() const { return dir_ / "eval_records.partial.jsonl"; }
  std::filesystem::path instructions_path() const { return dir_ / "instruction_records.jsonl"; }
  std::filesystem::path manifest_path() const { return dir_ / "run_manifest.json"; }

 private:
  std::filesystem::path dir_;
};

// EvalSink over a RunStore: resumes from previously persisted records and
// appends new ones to the partial file as they complete.
class RunStoreEvalSink : public EvalSink {
 public:
  explicit RunStoreEvalSink(RunStore& store);

  std::optional<EvalRecord> find(const std::string& key) override;
  void persist(const EvalRecord& record) override;

  std::size_t resumed() const { return resumed_; }

 private:
  RunStore& store_;
  std::unordered_map<std::string, EvalRecord> existing_;
  std::size_t resumed_ = 0;
};

nlohmann::ordered_json eval_record_to_json(const EvalRecord& record);
EvalRecord eval_record_from_json(const nlohmann::json& j);
nlohmann::ordered_json instruction_record_to_json(const InstructionRecord& record);
InstructionRecord instruction_record_from_json(const nlohmann::json& j);

}  // namespace icl
