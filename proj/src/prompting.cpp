#include "icl/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "icl/hash.hpp"

namespace icl {

namespace {

namespace g = prompt_grammar;

std::string replace_once(std::string_view skeleton, std::string_view slot,
                         std::string_view value) {
  std::string out(skeleton);
  const std::size_t pos = out.find(slot);
  out.replace(pos, slot.size(), value);
  return out;
}

RenderedPrompt finish(std::string text, const DemonstrationSet& demos,
                      std::optional<std::string> test_id, TemplateKind kind) {
  RenderedPrompt p;
  p.text = std::move(text);
  for (const Example& e : demos.demos) p.demo_ids.push_back(e.id);
  p.test_id = std::move(test_id);
  p.kind = kind;
  p.content_hash = sha256_hex(p.text);
  return p;
}

void require_task(const DemonstrationSet& demos, const Example& test, TaskKind task) {
  if (test.task != task) {
    throw PromptError("test example '" + test.id + "' is not a " + std::string(to_string(task)) +
                      " example");
  }
  for (const Example& e : demos.demos) {
    if (e.task != task) {
      throw PromptError("demo '" + e.id + "' is not a " + std::string(to_string(task)) +
                        " example");
    }
  }
}

}  // namespace

std::string_view to_string(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::IclSentiment: return "icl-sentiment";
    case TemplateKind::IclNli: return "icl-nli";
    case TemplateKind::InstructionInduction: return "instruction-induction";
  }
  return "?";
}

std::string template_hash(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::IclSentiment:
      return sha256_hex(std::string(g::kSentimentDemo) + "\n" + std::string(g::kSentimentQuery));
    case TemplateKind::IclNli:
      return sha256_hex(std::string(g::kNliDemo) + "\n" + std::string(g::kNliQuery));
    case TemplateKind::InstructionInduction:
      return sha256_hex(std::string(g::kInductionPreamble) + "\n" + std::string(g::kInductionPair) +
                        "\n" + std::string(g::kInductionClosing));
  }
  throw PromptError("unknown template kind");
}

std::string_view Verbalizer::surface(const Label& label) const {
  if (label.task() != task_) throw PromptError("label task does not match verbalizer task");
  return to_string(label.value());
}

RenderedPrompt render_icl_sentiment(const DemonstrationSet& demos, const Example& test) {
  require_task(demos, test, TaskKind::Sentiment);
  Verbalizer v(TaskKind::Sentiment);
  std::string text;
  for (const Example& e : demos.demos) {
    std::string line = replace_once(g::kSentimentDemo, "{text}", e.text);
    line = replace_once(line, "{label}", v.surface(e.label));
    text += line;
    text += '\n';
  }
  text += replace_once(g::kSentimentQuery, "{text}", test.text);
  return finish(std::move(text), demos, test.id, TemplateKind::IclSentiment);
}

RenderedPrompt render_icl_nli(const DemonstrationSet& demos, const Example& test) {
  require_task(demos, test, TaskKind::Nli);
  Verbalizer v(TaskKind::Nli);
  std::string text;
  for (const Example& e : demos.demos) {
    std::string line = replace_once(g::kNliDemo, "{p}", e.premise);
    line = replace_once(line, "{h}", e.hypothesis);
    line = replace_once(line, "{label}", v.surface(e.label));
    text += line;
    text += '\n';
  }
  std::string query = replace_once(g::kNliQuery, "{p}", test.premise);
  query = replace_once(query, "{h}", test.hypothesis);
  text += query;
  return finish(std::move(text), demos, test.id, TemplateKind::IclNli);
}

RenderedPrompt render_icl(const DemonstrationSet& demos, const Example& test) {
  return test.task == TaskKind::Sentiment ? render_icl_sentiment(demos, test)
                                          : render_icl_nli(demos, test);
}

std::string induction_input(const Example& e) {
  if (e.task == TaskKind::Sentiment) return e.text;
  return "premise: " + e.premise + " hypothesis: " + e.hypothesis;
}

RenderedPrompt render_induction(const DemonstrationSet& demos) {
  if (demos.demos.empty()) {
    throw PromptError("render_induction: demonstration set is empty");
  }
  Verbalizer v(demos.demos.front().task);
  std::string text(g::kInductionPreamble);
  text += '\n';
  for (const Example& e : demos.demos) {
    std::string line = replace_once(g::kInductionPair, "{x}", induction_input(e));
    line = replace_once(line, "{y}", v.surface(e.label));
    text += line;
    text += '\n';
  }
  text += g::kInductionClosing;
  return finish(std::move(text), demos, std::nullopt, TemplateKind::InstructionInduction);
}

std::optional<Label> parse_label(std::string_view completion, const Verbalizer& verbalizer) {
  std::string norm;
  norm.reserve(completion.size());
  for (char c : completion) {
    norm.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  const auto strip = [](unsigned char c) { return std::isspace(c) || std::ispunct(c); };
  std::size_t b = 0, e = norm.size();
  while (b < e && strip(static_cast<unsigned char>(norm[b]))) ++b;
  while (e > b && strip(static_cast<unsigned char>(norm[e - 1]))) --e;
  norm = norm.substr(b, e - b);

  std::optional<Label> found;
  for (LabelValue value : verbalizer.classes()) {
    if (norm.find(to_string(value)) == std::string::npos) continue;
    if (found.has_value()) return std::nullopt;  // ambiguous
    found = Label(verbalizer.task(), value);
  }
  return found;
}

}  // namespace icl
