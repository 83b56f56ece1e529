#include "icl/mock_provider.hpp"

#include <algorithm>
#include <cctype>

#include "icl/hash.hpp"
#include "icl/prompting.hpp"

namespace icl {

namespace {

namespace g = prompt_grammar;

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string final_line(const std::string& text) {
  const std::size_t pos = text.rfind('\n');
  return pos == std::string::npos ? text : text.substr(pos + 1);
}

// Extracts the slot between a literal prefix and a literal suffix, or empty
// optional when the line does not match.
std::optional<std::string> extract(const std::string& line, std::string_view prefix,
                                   std::string_view suffix) {
  if (line.size() < prefix.size() + suffix.size()) return std::nullopt;
  if (line.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
  if (line.compare(line.size() - suffix.size(), suffix.size(), suffix) != 0) return std::nullopt;
  return line.substr(prefix.size(), line.size() - prefix.size() - suffix.size());
}

int hex_nibble(char c) { return c <= '9' ? c - '0' : c - 'a' + 10; }

}  // namespace

MockRule default_mock_rule(TaskKind task) {
  MockRule rule;
  rule.task = task;
  if (task == TaskKind::Sentiment) {
    rule.default_label = LabelValue::Negative;
    for (const char* w : {"great", "good", "wonderful", "charming", "delight", "delightful",
                          "vivid", "lively", "fun", "enjoyable", "masterpiece"}) {
      rule.lexicon[w] = LabelValue::Positive;
    }
    for (const char* w : {"bad", "dull", "boring", "dreadful", "awful", "terrible", "chore",
                          "lifeless", "regret", "waste", "mess"}) {
      rule.lexicon[w] = LabelValue::Negative;
    }
  } else {
    rule.default_label = LabelValue::Neutral;
    for (const char* w : {"is", "outdoors", "people", "moving"}) {
      rule.lexicon[w] = LabelValue::Entailment;
    }
    for (const char* w : {"not", "no", "nobody", "indoors", "empty", "asleep"}) {
      rule.lexicon[w] = LabelValue::Contradiction;
    }
  }
  return rule;
}

Label apply_mock_rule(const MockRule& rule, std::string_view test_content) {
  if (rule.lexicon.empty()) throw GatewayError(GatewayError::Kind::NonRetryableStatus,
                                               "mock rule lexicon is empty");
  std::map<LabelValue, int> votes;
  for (const std::string& token : whitespace_tokens(lowercase(test_content))) {
    auto it = rule.lexicon.find(token);
    if (it != rule.lexicon.end()) ++votes[it->second];
  }
  LabelValue winner = rule.default_label;
  int best = 0;
  bool tie = false;
  for (const auto& [label, count] : votes) {
    if (count > best) {
      best = count;
      winner = label;
      tie = false;
    } else if (count == best && best > 0) {
      tie = true;
    }
  }
  if (best == 0 || tie) winner = rule.default_label;
  return Label(rule.task, winner);
}

MockProvider::MockProvider(MockRule rule) : rule_(std::move(rule)) {
  if (rule_.lexicon.empty()) {
    throw GatewayError(GatewayError::Kind::NonRetryableStatus, "mock rule lexicon is empty");
  }
}

std::string MockProvider::complete(const CompletionRequest& request) {
  const std::string line = final_line(request.prompt_text);

  if (auto text = extract(line, "The sentence is ", ", the sentiment is")) {
    return std::string(apply_mock_rule(rule_, *text).surface());
  }
  if (auto text = extract(line, "The premise is ", ", the relation is")) {
    // `*text` is "premise, the hypothesis is hypothesis"; vote on all of it.
    return std::string(apply_mock_rule(rule_, *text).surface());
  }
  if (line == g::kInductionClosing) {
    std::string labels;
    for (LabelValue v : label_classes(rule_.task)) {
      if (!labels.empty()) labels += " or ";
      labels += to_string(v);
    }
    return " to read each input and answer with " + labels + ". [" +
           sha256_hex(request.prompt_text).substr(0, 8) + "]";
  }
  throw GatewayError(GatewayError::Kind::MalformedResponse,
                     "mock provider: final prompt line matches no known query grammar: '" + line +
                         "'");
}

EmbeddingVector mock_embedding(const std::string& model, const std::string& text) {
  const std::string digest = sha256_hex(model + std::string(1, '\0') + text);
  EmbeddingVector vec;
  vec.model_id = model;
  vec.values.resize(MockProvider::kEmbeddingDim);
  for (std::size_t i = 0; i < vec.values.size(); ++i) {
    const std::size_t p = (4 * i) % digest.size();
    const int word = (hex_nibble(digest[p]) << 12) | (hex_nibble(digest[p + 1]) << 8) |
                     (hex_nibble(digest[p + 2]) << 4) | hex_nibble(digest[p + 3]);
    vec.values[i] = static_cast<float>(word) / 32767.5f - 1.0f;
  }
  bool all_zero = std::all_of(vec.values.begin(), vec.values.end(),
                              [](float v) { return v == 0.0f; });
  if (all_zero) vec.values[0] = 1.0f;
  return vec;
}

std::vector<EmbeddingVector> MockProvider::embed_texts(const std::vector<std::string>& texts,
                                                       const std::string& model) {
  if (texts.empty()) {
    throw GatewayError(GatewayError::Kind::NonRetryableStatus, "embed: no input texts");
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const std::string& t : texts) out.push_back(mock_embedding(model, t));
  return out;
}

}  // namespace icl
