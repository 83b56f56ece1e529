#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "icl/corpus.hpp"
#include "icl/gateway.hpp"
#include "icl/mock_provider.hpp"
#include "icl/selection.hpp"

namespace icl {

// Carries every problem found during validation, not just the first.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string summary, std::vector<std::string> problems)
      : std::runtime_error(std::move(summary)), problems(std::move(problems)) {}

  std::vector<std::string> problems;
};

struct DatasetRef {
  std::string name;
  std::filesystem::path path;
};

struct RunConfig {
  TaskKind task = TaskKind::Sentiment;
  DatasetRef id_dataset;
  std::vector<DatasetRef> ood_datasets;
  std::vector<StrategyKind> strategies;
  std::vector<std::size_t> ks;
  std::size_t test_samples = 500;
  std::uint64_t seed = 42;
  double max_edit_ratio = 0.5;
  ArrangePolicy arrangement = ArrangePolicy::SelectionOrder;
  std::filesystem::path embedding_cache;
  std::filesystem::path output_dir;

  ProviderConfig provider;
  std::string completion_model = "gpt-3.5-turbo";
  std::string embedding_model = "text-embedding-ada-002";

  double eval_temperature = 0.0;
  int eval_max_tokens = 8;
  std::size_t induction_count = 100;
  std::size_t induction_k = 4;
  double induction_temperature = 1.0;
  int induction_max_tokens = 128;

  std::optional<MockRule> mock_rule;

  // The parsed document, snapshotted into run manifests.
  nlohmann::ordered_json raw;

  // All dataset references, ID first.
  std::vector<DatasetRef> all_datasets() const;

  // Loads and validates; relative paths resolve against the config file's
  // directory. Throws ConfigError listing every problem at once.
  static RunConfig load(const std::filesystem::path& path);
};

}  // namespace icl
