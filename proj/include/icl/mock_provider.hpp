#pragma once

#include <map>
#include <string>

#include "icl/corpus.hpp"
#include "icl/gateway.hpp"

namespace icl {

// Lexicon-based completion rule: the mock tallies label votes over the test
// text's tokens and answers with the majority label (default_label on tie or
// no votes). Token matching is case-insensitive.
struct MockRule {
  TaskKind task = TaskKind::Sentiment;
  std::map<std::string, LabelValue> lexicon;
  LabelValue default_label = LabelValue::Negative;
};

// Sensible built-in lexicon for a task, used when the config provides none.
MockRule default_mock_rule(TaskKind task);

// Applies the rule to raw test content; the exact function the mock uses on
// the extracted query text. Exposed so callers can predict end-to-end
// accuracy without running a pipeline.
Label apply_mock_rule(const MockRule& rule, std::string_view test_content);

// Deterministic offline provider. Completions are a pure function of
// (prompt, rule): ICL prompts answer via apply_mock_rule on the query line's
// test content; induction prompts yield a fixed instruction sentence tagged
// with a short prompt digest. Embeddings are pseudo-vectors derived from
// sha256(model, text).
class MockProvider : public Provider {
 public:
  static constexpr std::size_t kEmbeddingDim = 16;

  explicit MockProvider(MockRule rule);

  std::string complete(const CompletionRequest& request) override;
  std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts,
                                           const std::string& model) override;
  std::string name() const override { return "mock"; }

  const MockRule& rule() const { return rule_; }

 private:
  MockRule rule_;
};

// The pseudo-embedding for one text, shared with tests that precompute
// expected rankings.
EmbeddingVector mock_embedding(const std::string& model, const std::string& text);

}  // namespace icl
