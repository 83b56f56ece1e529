#include "icl/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "icl/rng.hpp"

namespace icl {

namespace {

using nlohmann::json;

const std::vector<LabelValue> kSentimentClasses = {LabelValue::Positive, LabelValue::Negative};
const std::vector<LabelValue> kNliClasses = {LabelValue::Entailment, LabelValue::Neutral,
                                             LabelValue::Contradiction};

bool is_unicode_whitespace(char32_t cp) {
  switch (cp) {
    case 0x09:
    case 0x0A:
    case 0x0B:
    case 0x0C:
    case 0x0D:
    case 0x20:
    case 0x85:
    case 0xA0:
    case 0x1680:
    case 0x2028:
    case 0x2029:
    case 0x202F:
    case 0x205F:
    case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

// Decodes one UTF-8 code point at `i`, advancing `i`. Invalid bytes are
// treated as Latin-1 so malformed input still tokenizes.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  const unsigned char b0 = byte(i);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  auto cont = [&](std::size_t k) { return k < s.size() && (byte(k) & 0xC0) == 0x80; };
  if ((b0 & 0xE0) == 0xC0 && cont(i + 1)) {
    char32_t cp = (static_cast<char32_t>(b0 & 0x1F) << 6) | (byte(i + 1) & 0x3F);
    i += 2;
    return cp;
  }
  if ((b0 & 0xF0) == 0xE0 && cont(i + 1) && cont(i + 2)) {
    char32_t cp = (static_cast<char32_t>(b0 & 0x0F) << 12) |
                  (static_cast<char32_t>(byte(i + 1) & 0x3F) << 6) | (byte(i + 2) & 0x3F);
    i += 3;
    return cp;
  }
  if ((b0 & 0xF8) == 0xF0 && cont(i + 1) && cont(i + 2) && cont(i + 3)) {
    char32_t cp = (static_cast<char32_t>(b0 & 0x07) << 18) |
                  (static_cast<char32_t>(byte(i + 1) & 0x3F) << 12) |
                  (static_cast<char32_t>(byte(i + 2) & 0x3F) << 6) | (byte(i + 3) & 0x3F);
    i += 4;
    return cp;
  }
  ++i;
  return b0;
}

// Newlines become single spaces so every example renders on one prompt line;
// surrounding whitespace is trimmed.
std::string normalize_text(std::string_view raw) {
  std::string s;
  s.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size();) {
    char c = raw[i];
    if (c == '\r') {
      if (i + 1 < raw.size() && raw[i + 1] == '\n') ++i;
      s.push_back(' ');
      ++i;
    } else if (c == '\n') {
      s.push_back(' ');
      ++i;
    } else {
      s.push_back(c);
      ++i;
    }
  }
  const auto is_ascii_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\v' || c == '\f';
  };
  std::size_t b = 0, e = s.size();
  while (b < e && is_ascii_space(s[b])) ++b;
  while (e > b && is_ascii_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

struct RecordContext {
  const std::string& path;
  std::size_t line;
  std::string id;  // may be empty before the id is parsed

  [[noreturn]] void fail(const std::string& message) const {
    std::ostringstream os;
    os << path << ":" << line;
    if (!id.empty()) os << " (record '" << id << "')";
    os << ": " << message;
    throw CorpusError(os.str());
  }
};

}  // namespace

std::string_view to_string(TaskKind task) {
  return task == TaskKind::Sentiment ? "sentiment" : "nli";
}

std::string_view to_string(LabelValue value) {
  switch (value) {
    case LabelValue::Positive: return "positive";
    case LabelValue::Negative: return "negative";
    case LabelValue::Entailment: return "entailment";
    case LabelValue::Neutral: return "neutral";
    case LabelValue::Contradiction: return "contradiction";
  }
  return "?";
}

TaskKind task_kind_from_string(std::string_view s) {
  if (s == "sentiment") return TaskKind::Sentiment;
  if (s == "nli") return TaskKind::Nli;
  throw CorpusError("unknown task kind '" + std::string(s) + "' (expected sentiment|nli)");
}

const std::vector<LabelValue>& label_classes(TaskKind task) {
  return task == TaskKind::Sentiment ? kSentimentClasses : kNliClasses;
}

Label::Label(TaskKind task, LabelValue value) : task_(task), value_(value) {
  const auto& classes = label_classes(task);
  if (std::find(classes.begin(), classes.end(), value) == classes.end()) {
    throw CorpusError(std::string("label '") + std::string(to_string(value)) +
                      "' is not in the " + std::string(to_string(task)) + " label set");
  }
}

Label Label::parse(TaskKind task, std::string_view surface) {
  for (LabelValue v : label_classes(task)) {
    if (surface == to_string(v)) return Label(task, v);
  }
  throw CorpusError("unknown label '" + std::string(surface) + "' for task " +
                    std::string(to_string(task)));
}

std::string Example::content() const {
  if (task == TaskKind::Sentiment) return text;
  return premise + " " + hypothesis;
}

Corpus::Corpus(TaskKind task, std::vector<Example> examples, std::vector<CadPair> pairs)
    : task_(task), examples_(std::move(examples)), pairs_(std::move(pairs)) {
  std::sort(examples_.begin(), examples_.end(),
            [](const Example& a, const Example& b) { return a.id < b.id; });
  std::sort(pairs_.begin(), pairs_.end(),
            [](const CadPair& a, const CadPair& b) { return a.pair_id < b.pair_id; });
  by_id_.reserve(examples_.size());
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    if (examples_[i].task != task_) {
      throw CorpusError("example '" + examples_[i].id + "' task kind differs from corpus");
    }
    if (!by_id_.emplace(examples_[i].id, i).second) {
      throw CorpusError("duplicate example id '" + examples_[i].id + "'");
    }
  }
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    if (!pair_by_id_.emplace(pairs_[i].pair_id, i).second) {
      throw CorpusError("duplicate pair id '" + pairs_[i].pair_id + "'");
    }
  }
}

const Example* Corpus::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &examples_[it->second];
}

const Example& Corpus::at(std::string_view id) const {
  const Example* e = find(id);
  if (e == nullptr) throw CorpusError("unknown example id '" + std::string(id) + "'");
  return *e;
}

const CadPair* Corpus::find_pair(std::string_view pair_id) const {
  auto it = pair_by_id_.find(std::string(pair_id));
  return it == pair_by_id_.end() ? nullptr : &pairs_[it->second];
}

Corpus Corpus::without(const std::unordered_set<std::string>& exclude_ids) const {
  std::vector<Example> kept;
  kept.reserve(examples_.size());
  for (const Example& e : examples_) {
    if (exclude_ids.count(e.id) == 0) kept.push_back(e);
  }
  std::vector<CadPair> kept_pairs;
  for (const CadPair& p : pairs_) {
    if (exclude_ids.count(p.original.id) == 0 && exclude_ids.count(p.counterfactual.id) == 0) {
      kept_pairs.push_back(p);
    }
  }
  return Corpus(task_, std::move(kept), std::move(kept_pairs));
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  std::string current;
  while (i < text.size()) {
    const std::size_t start = i;
    const char32_t cp = decode_utf8(text, i);
    if (is_unicode_whitespace(cp)) {
      if (!current.empty()) {
        tokens.push_back(std::move(current));
        current.clear();
      }
    } else {
      current.append(text.substr(start, i - start));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

double normalized_edit_distance(const std::vector<std::string>& a,
                                const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) {
    throw CorpusError("normalized_edit_distance: both token sequences are empty");
  }
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> prev(m + 1), curr(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    curr[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      curr[j] = std::min({prev[j] + 1, curr[j - 1] + 1, sub});
    }
    std::swap(prev, curr);
  }
  return static_cast<double>(prev[m]) / static_cast<double>(std::max(n, m));
}

Corpus load_corpus(const std::string& path, TaskKind task, std::string source_name,
                   std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open dataset file '" + path + "'");
  if (source_name.empty()) source_name = std::filesystem::path(path).stem().string();

  static const std::unordered_set<std::string> kKnownFields = {
      "id", "label", "pair_id", "cd_role", "text", "premise", "hypothesis", "source"};

  std::vector<Example> examples;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    RecordContext ctx{path, line_no, ""};

    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      ctx.fail(std::string("malformed record: ") + e.what());
    }
    if (!rec.is_object()) ctx.fail("malformed record: not a JSON object");

    for (auto it = rec.begin(); it != rec.end(); ++it) {
      if (kKnownFields.count(it.key()) == 0 && warnings != nullptr) {
        warnings->push_back(path + ":" + std::to_string(line_no) + ": ignoring unknown field '" +
                            it.key() + "'");
      }
    }

    if (!rec.contains("id") || !rec["id"].is_string()) ctx.fail("missing or non-string 'id'");
    ctx.id = rec["id"].get<std::string>();
    if (ctx.id.empty()) ctx.fail("empty 'id'");
    if (!seen_ids.insert(ctx.id).second) ctx.fail("duplicate id");

    if (!rec.contains("label") || !rec["label"].is_string()) {
      ctx.fail("missing or non-string 'label'");
    }
    Example ex;
    ex.id = ctx.id;
    ex.task = task;
    ex.source = rec.value("source", source_name);
    try {
      ex.label = Label::parse(task, rec["label"].get<std::string>());
    } catch (const CorpusError& e) {
      ctx.fail(e.what());
    }

    const bool has_text = rec.contains("text");
    const bool has_premise = rec.contains("premise");
    const bool has_hypothesis = rec.contains("hypothesis");
    if (task == TaskKind::Sentiment) {
      if (!has_text || has_premise || has_hypothesis) {
        ctx.fail("sentiment record must carry 'text' and no premise/hypothesis");
      }
      if (!rec["text"].is_string()) ctx.fail("'text' must be a string");
      ex.text = normalize_text(rec["text"].get<std::string>());
      if (ex.text.empty()) ctx.fail("'text' is empty after trimming");
    } else {
      if (!has_premise || !has_hypothesis || has_text) {
        ctx.fail("nli record must carry 'premise' and 'hypothesis' and no 'text'");
      }
      if (!rec["premise"].is_string() || !rec["hypothesis"].is_string()) {
        ctx.fail("'premise' and 'hypothesis' must be strings");
      }
      ex.premise = normalize_text(rec["premise"].get<std::string>());
      ex.hypothesis = normalize_text(rec["hypothesis"].get<std::string>());
      if (ex.premise.empty() || ex.hypothesis.empty()) {
        ctx.fail("'premise'/'hypothesis' is empty after trimming");
      }
    }

    const bool has_pair = rec.contains("pair_id");
    const bool has_role = rec.contains("cd_role");
    if (has_pair != has_role) {
      ctx.fail("'pair_id' and 'cd_role' must be present together");
    }
    if (has_pair) {
      if (!rec["pair_id"].is_string() || rec["pair_id"].get<std::string>().empty()) {
        ctx.fail("'pair_id' must be a non-empty string");
      }
      ex.pair_id = rec["pair_id"].get<std::string>();
      const std::string role = rec["cd_role"].is_string() ? rec["cd_role"].get<std::string>() : "";
      if (role == "original") {
        ex.cd_role = CdRole::Original;
      } else if (role == "counterfactual") {
        ex.cd_role = CdRole::Counterfactual;
      } else {
        ctx.fail("'cd_role' must be \"original\" or \"counterfactual\"");
      }
    }
    examples.push_back(std::move(ex));
  }

  // Assemble pairs from pairing metadata.
  std::unordered_map<std::string, std::vector<const Example*>> members;
  for (const Example& e : examples) {
    if (e.cd_role != CdRole::None) members[e.pair_id].push_back(&e);
  }
  std::vector<CadPair> pairs;
  pairs.reserve(members.size());
  for (auto& [pair_id, mem] : members) {
    if (mem.size() == 1) {
      throw CorpusError(path + ": dangling pair '" + pair_id + "': only record '" + mem[0]->id +
                        "' references it");
    }
    if (mem.size() > 2) {
      throw CorpusError(path + ": pair '" + pair_id + "' is referenced by more than two records");
    }
    const Example* original = nullptr;
    const Example* counterfactual = nullptr;
    for (const Example* e : mem) {
      (e->cd_role == CdRole::Original ? original : counterfactual) = e;
    }
    if (original == nullptr || counterfactual == nullptr) {
      throw CorpusError(path + ": pair '" + pair_id +
                        "' must have one original and one counterfactual member");
    }
    CadPair pair;
    pair.pair_id = pair_id;
    pair.original = *original;
    pair.counterfactual = *counterfactual;
    pair.edit_ratio = normalized_edit_distance(whitespace_tokens(original->content()),
                                               whitespace_tokens(counterfactual->content()));
    pairs.push_back(std::move(pair));
  }

  return Corpus(task, std::move(examples), std::move(pairs));
}

PairValidationReport validate_pairs(const Corpus& corpus, double max_edit_ratio) {
  PairValidationReport report;
  report.max_edit_ratio = max_edit_ratio;
  for (const CadPair& p : corpus.pairs()) {
    if (p.original.label == p.counterfactual.label) {
      report.violations.push_back(
          {p.pair_id, PairViolation::Kind::SameLabel, p.edit_ratio,
           "both members are labeled '" + std::string(p.original.label.surface()) + "'"});
    }
    if (p.edit_ratio > max_edit_ratio) {
      std::ostringstream os;
      os << "edit_ratio " << p.edit_ratio << " exceeds " << max_edit_ratio;
      report.violations.push_back(
          {p.pair_id, PairViolation::Kind::EditRatioExceeded, p.edit_ratio, os.str()});
    }
  }
  return report;
}

std::vector<Example> sample_test_split(const Corpus& corpus, std::size_t n, std::uint64_t seed) {
  if (n > corpus.size()) {
    throw CorpusError("sample_test_split: n=" + std::to_string(n) + " exceeds corpus size " +
                      std::to_string(corpus.size()));
  }
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  order = rng.sample(std::move(order), n);
  std::vector<Example> out;
  out.reserve(n);
  for (std::size_t idx : order) out.push_back(corpus.examples()[idx]);
  return out;
}

}  // namespace icl
