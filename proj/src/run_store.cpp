#include "icl/run_store.hpp"

#include <algorithm>
#include <fstream>

namespace icl {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::vector<json> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw RunStoreError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) throw RunStoreError("cannot write '" + tmp.string() + "'");
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

ordered_json eval_record_to_json(const EvalRecord& r) {
  ordered_json j;
  j["dataset"] = r.dataset;
  j["strategy"] = r.strategy;
  j["k"] = r.k;
  j["test_id"] = r.test_id;
  j["gold"] = r.gold;
  if (r.predicted.has_value()) {
    j["predicted"] = *r.predicted;
  } else {
    j["predicted"] = nullptr;
  }
  j["correct"] = r.correct;
  j["prompt_hash"] = r.prompt_hash;
  j["completion"] = r.completion;
  return j;
}

EvalRecord eval_record_from_json(const json& j) {
  EvalRecord r;
  r.dataset = j.at("dataset").get<std::string>();
  r.strategy = j.at("strategy").get<std::string>();
  r.k = j.at("k").get<std::size_t>();
  r.test_id = j.at("test_id").get<std::string>();
  r.gold = j.at("gold").get<std::string>();
  if (!j.at("predicted").is_null()) r.predicted = j.at("predicted").get<std::string>();
  r.correct = j.at("correct").get<bool>();
  r.prompt_hash = j.at("prompt_hash").get<std::string>();
  r.completion = j.at("completion").get<std::string>();
  return r;
}

ordered_json instruction_record_to_json(const InstructionRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["strategy"] = r.strategy;
  j["k"] = r.k;
  j["demo_ids"] = r.demo_ids;
  j["demos"] = r.demo_display;
  j["instruction"] = r.instruction;
  if (r.grade.has_value()) j["grade"] = std::string(to_string(*r.grade));
  return j;
}

InstructionRecord instruction_record_from_json(const json& j) {
  InstructionRecord r;
  r.id = j.at("id").get<std::string>();
  r.strategy = j.at("strategy").get<std::string>();
  r.k = j.at("k").get<std::size_t>();
  r.demo_ids = j.at("demo_ids").get<std::vector<std::string>>();
  r.demo_display = j.at("demos").get<std::vector<std::string>>();
  r.instruction = j.at("instruction").get<std::string>();
  if (j.contains("grade")) r.grade = grade_from_string(j.at("grade").get<std::string>());
  return r;
}

RunStore::RunStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::vector<EvalRecord> RunStore::load_eval_records() const {
  std::vector<EvalRecord> out;
  for (const json& j : read_jsonl(eval_records_path())) out.push_back(eval_record_from_json(j));
  for (const json& j : read_jsonl(eval_partial_path())) out.push_back(eval_record_from_json(j));
  return out;
}

bool RunStore::has_eval_records() const {
  return std::filesystem::exists(eval_records_path()) ||
         std::filesystem::exists(eval_partial_path());
}

void RunStore::append_eval_partial(const EvalRecord& record) {
  std::ofstream out(eval_partial_path(), std::ios::app);
  if (!out) throw RunStoreError("cannot append to '" + eval_partial_path().string() + "'");
  out << eval_record_to_json(record).dump() << "\n";
  out.flush();
}

void RunStore::finalize_eval_records(std::vector<EvalRecord> records) {
  std::sort(records.begin(), records.end(), [](const EvalRecord& a, const EvalRecord& b) {
    return std::tie(a.dataset, a.strategy, a.k, a.test_id) <
           std::tie(b.dataset, b.strategy, b.k, b.test_id);
  });
  std::string content;
  for (const EvalRecord& r : records) {
    content += eval_record_to_json(r).dump();
    content += '\n';
  }
  atomic_write(eval_records_path(), content);
  std::filesystem::remove(eval_partial_path());
}

std::vector<InstructionRecord> RunStore::load_instructions() const {
  std::vector<InstructionRecord> out;
  for (const json& j : read_jsonl(instructions_path())) {
    out.push_back(instruction_record_from_json(j));
  }
  return out;
}

bool RunStore::has_instructions() const {
  return std::filesystem::exists(instructions_path());
}

void RunStore::write_instructions(std::vector<InstructionRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const InstructionRecord& a, const InstructionRecord& b) { return a.id < b.id; });
  std::string content;
  for (const InstructionRecord& r : records) {
    content += instruction_record_to_json(r).dump();
    content += '\n';
  }
  atomic_write(instructions_path(), content);
}

void RunStore::grade_instruction(const std::string& id, Grade grade) {
  std::vector<InstructionRecord> records = load_instructions();
  record_grade(records, id, grade);
  write_instructions(std::move(records));
}

void RunStore::write_manifest(const ordered_json& manifest) {
  atomic_write(manifest_path(), manifest.dump(2) + "\n");
}

std::optional<ordered_json> RunStore::read_manifest() const {
  std::ifstream in(manifest_path());
  if (!in) return std::nullopt;
  try {
    return ordered_json::parse(in);
  } catch (const json::exception& e) {
    throw RunStoreError(manifest_path().string() + ": " + e.what());
  }
}

std::filesystem::path RunStore::write_text(const std::string& filename,
                                           const std::string& content) const {
  const std::filesystem::path path = dir_ / filename;
  atomic_write(path, content);
  return path;
}

RunStoreEvalSink::RunStoreEvalSink(RunStore& store) : store_(store) {
  for (EvalRecord& r : store.load_eval_records()) {
    existing_.emplace(record_key(r), std::move(r));
  }
}

std::optional<EvalRecord> RunStoreEvalSink::find(const std::string& key) {
  auto it = existing_.find(key);
  if (it == existing_.end()) return std::nullopt;
  ++resumed_;
  return it->second;
}

void RunStoreEvalSink::persist(const EvalRecord& record) { store_.append_eval_partial(record); }

}  // namespace icl
