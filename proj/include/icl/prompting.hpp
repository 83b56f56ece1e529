#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "icl/corpus.hpp"
#include "icl/selection.hpp"

namespace icl {

class PromptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TemplateKind { IclSentiment, IclNli, InstructionInduction };

std::string_view to_string(TemplateKind kind);

// Frozen prompt grammar. Tests pin rendered output to golden files, so these
// literals must never change.
namespace prompt_grammar {
inline constexpr std::string_view kSentimentDemo = "The sentence is {text}, the sentiment is {label}.";
inline constexpr std::string_view kSentimentQuery = "The sentence is {text}, the sentiment is";
inline constexpr std::string_view kNliDemo =
    "The premise is {p}, the hypothesis is {h}, the relation is {label}.";
inline constexpr std::string_view kNliQuery =
    "The premise is {p}, the hypothesis is {h}, the relation is";
inline constexpr std::string_view kInductionPreamble =
    "I gave a friend an instruction and some inputs. The friend read the instruction and wrote "
    "an output for every input. Here are the input-output pairs:";
inline constexpr std::string_view kInductionPair = "The input is {x}, the output is {y}.";
inline constexpr std::string_view kInductionClosing = "The instruction was";
}  // namespace prompt_grammar

// Stable digest of the three template skeletons, recorded in run manifests.
std::string template_hash(TemplateKind kind);

struct RenderedPrompt {
  std::string text;
  std::vector<std::string> demo_ids;
  std::optional<std::string> test_id;
  TemplateKind kind = TemplateKind::IclSentiment;
  std::string content_hash;  // sha256 of text
};

// Fixed bijection between task labels and their lowercase surface forms.
class Verbalizer {
 public:
  explicit Verbalizer(TaskKind task) : task_(task) {}

  TaskKind task() const { return task_; }
  std::string_view surface(const Label& label) const;
  const std::vector<LabelValue>& classes() const { return label_classes(task_); }

 private:
  TaskKind task_;
};

RenderedPrompt render_icl_sentiment(const DemonstrationSet& demos, const Example& test);
RenderedPrompt render_icl_nli(const DemonstrationSet& demos, const Example& test);
RenderedPrompt render_icl(const DemonstrationSet& demos, const Example& test);

// Induction prompt: preamble, one input-output line per demo, closing cue.
// Throws on an empty demonstration set.
RenderedPrompt render_induction(const DemonstrationSet& demos);

// Display form of a demo input inside the induction prompt: the text itself
// for sentiment, "premise: {p} hypothesis: {h}" for NLI.
std::string induction_input(const Example& e);

// Lowercases the completion, strips surrounding whitespace/punctuation, and
// returns the unique verbalizer surface form occurring as a substring.
// nullopt means unparseable (zero or more than one distinct form present).
std::optional<Label> parse_label(std::string_view completion, const Verbalizer& verbalizer);

}  // namespace icl
