#include "icl/config.hpp"

#include <fstream>
#include <sstream>

namespace icl {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

class Problems {
 public:
  void add(std::string message) { list_.push_back(std::move(message)); }
  bool empty() const { return list_.empty(); }

  [[noreturn]] void raise(const std::filesystem::path& path) const {
    std::ostringstream os;
    os << "invalid config '" << path.string() << "' (" << list_.size() << " problem"
       << (list_.size() == 1 ? "" : "s") << "):";
    for (const std::string& p : list_) os << "\n  - " << p;
    throw ConfigError(os.str(), list_);
  }

 private:
  std::vector<std::string> list_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

std::vector<DatasetRef> RunConfig::all_datasets() const {
  std::vector<DatasetRef> out{id_dataset};
  out.insert(out.end(), ood_datasets.begin(), ood_datasets.end());
  return out;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path.string() + "'",
                      {"cannot open config file"});
  }
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what(),
                      {e.what()});
  }

  const std::filesystem::path base = path.has_parent_path()
                                         ? path.parent_path()
                                         : std::filesystem::current_path();
  Problems problems;
  RunConfig cfg;
  cfg.raw = doc;

  if (!doc.contains("task") || !doc["task"].is_string()) {
    problems.add("'task' (sentiment|nli) is required");
  } else {
    try {
      cfg.task = task_kind_from_string(doc["task"].get<std::string>());
    } catch (const std::exception& e) {
      problems.add(e.what());
    }
  }

  if (!doc.contains("datasets") || !doc["datasets"].is_object() ||
      !doc["datasets"].contains("id")) {
    problems.add("'datasets.id' ({name, path}) is required");
  } else {
    auto parse_ref = [&](const json& j, const std::string& where) -> std::optional<DatasetRef> {
      if (!j.is_object() || !j.contains("name") || !j.contains("path")) {
        problems.add(where + " must be an object with 'name' and 'path'");
        return std::nullopt;
      }
      DatasetRef ref{j["name"].get<std::string>(), resolve(base, j["path"].get<std::string>())};
      if (!std::filesystem::exists(ref.path)) {
        problems.add(where + ": dataset file '" + ref.path.string() + "' does not exist");
      }
      return ref;
    };
    if (auto ref = parse_ref(doc["datasets"]["id"], "datasets.id")) cfg.id_dataset = *ref;
    if (doc["datasets"].contains("ood")) {
      if (!doc["datasets"]["ood"].is_array()) {
        problems.add("datasets.ood must be an array");
      } else {
        std::size_t i = 0;
        for (const json& j : doc["datasets"]["ood"]) {
          if (auto ref = parse_ref(j, "datasets.ood[" + std::to_string(i) + "]")) {
            cfg.ood_datasets.push_back(*ref);
          }
          ++i;
        }
      }
    }
  }

  if (!doc.contains("strategies") || !doc["strategies"].is_array() || doc["strategies"].empty()) {
    problems.add("'strategies' must be a non-empty array");
  } else {
    for (const json& j : doc["strategies"]) {
      try {
        cfg.strategies.push_back(strategy_from_string(j.get<std::string>()));
      } catch (const std::exception& e) {
        problems.add(e.what());
      }
    }
  }

  if (!doc.contains("ks") || !doc["ks"].is_array() || doc["ks"].empty()) {
    problems.add("'ks' must be a non-empty array of shot counts");
  } else {
    for (const json& j : doc["ks"]) {
      if (!j.is_number_unsigned() || j.get<std::size_t>() < 1) {
        problems.add("every k must be an integer >= 1");
        break;
      }
      cfg.ks.push_back(j.get<std::size_t>());
    }
  }
  const bool has_cd = std::any_of(cfg.strategies.begin(), cfg.strategies.end(), is_cd_strategy);
  if (has_cd) {
    for (std::size_t k : cfg.ks) {
      if (k % 2 != 0) {
        problems.add("k=" + std::to_string(k) + " is odd but a CD strategy is configured");
      }
    }
  }

  if (doc.contains("test_samples")) {
    if (!doc["test_samples"].is_number_unsigned() || doc["test_samples"].get<std::size_t>() < 1) {
      problems.add("'test_samples' must be an integer >= 1");
    } else {
      cfg.test_samples = doc["test_samples"].get<std::size_t>();
    }
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) {
      problems.add("'seed' must be a non-negative integer");
    } else {
      cfg.seed = doc["seed"].get<std::uint64_t>();
    }
  }
  if (doc.contains("max_edit_ratio")) {
    const double r = doc["max_edit_ratio"].is_number() ? doc["max_edit_ratio"].get<double>() : -1;
    if (r < 0.0 || r > 1.0) {
      problems.add("'max_edit_ratio' must be in [0, 1]");
    } else {
      cfg.max_edit_ratio = r;
    }
  }
  if (doc.contains("arrangement")) {
    try {
      cfg.arrangement = arrange_policy_from_string(doc["arrangement"].get<std::string>());
    } catch (const std::exception& e) {
      problems.add(e.what());
    }
  }
  if (doc.contains("embedding_cache")) {
    cfg.embedding_cache = resolve(base, doc["embedding_cache"].get<std::string>());
  } else {
    cfg.embedding_cache = base / "embedding_cache.jsonl";
  }
  if (doc.contains("output_dir")) {
    cfg.output_dir = resolve(base, doc["output_dir"].get<std::string>());
  }

  if (doc.contains("provider")) {
    const json& p = doc["provider"];
    if (!p.is_object()) {
      problems.add("'provider' must be an object");
    } else {
      cfg.provider.base_url = p.value("base_url", "");
      cfg.provider.credential_env_var = p.value("credential_env", "OPENAI_API_KEY");
      cfg.completion_model = p.value("completion_model", cfg.completion_model);
      cfg.embedding_model = p.value("embedding_model", cfg.embedding_model);
      if (p.contains("timeout_ms")) {
        cfg.provider.request_timeout = std::chrono::milliseconds(p["timeout_ms"].get<int>());
      }
      if (p.contains("max_retries")) {
        const int r = p["max_retries"].get<int>();
        if (r < 0) problems.add("'provider.max_retries' must be >= 0");
        cfg.provider.max_retries = r;
      }
      if (p.contains("backoff_ms")) {
        cfg.provider.backoff_base = std::chrono::milliseconds(p["backoff_ms"].get<int>());
      }
      if (p.contains("max_in_flight")) {
        const int m = p["max_in_flight"].get<int>();
        if (m < 1) problems.add("'provider.max_in_flight' must be >= 1");
        cfg.provider.max_in_flight = m;
      }
      if (p.contains("api_key") || p.contains("credential")) {
        problems.add("credentials must come from the environment variable named by "
                     "'provider.credential_env', never from the config file");
      }
    }
  }

  if (doc.contains("eval")) {
    const json& e = doc["eval"];
    cfg.eval_temperature = e.value("temperature", cfg.eval_temperature);
    cfg.eval_max_tokens = e.value("max_tokens", cfg.eval_max_tokens);
  }
  if (doc.contains("induction")) {
    const json& ind = doc["induction"];
    if (ind.contains("count")) {
      if (!ind["count"].is_number_unsigned() || ind["count"].get<std::size_t>() < 1) {
        problems.add("'induction.count' must be an integer >= 1");
      } else {
        cfg.induction_count = ind["count"].get<std::size_t>();
      }
    }
    if (ind.contains("k")) cfg.induction_k = ind["k"].get<std::size_t>();
    cfg.induction_temperature = ind.value("temperature", cfg.induction_temperature);
    cfg.induction_max_tokens = ind.value("max_tokens", cfg.induction_max_tokens);
  }

  if (doc.contains("mock")) {
    const json& m = doc["mock"];
    MockRule rule;
    rule.task = cfg.task;
    try {
      rule.default_label =
          Label::parse(cfg.task, m.value("default_label", "negative")).value();
      if (m.contains("lexicon")) {
        for (auto it = m["lexicon"].begin(); it != m["lexicon"].end(); ++it) {
          rule.lexicon[it.key()] = Label::parse(cfg.task, it.value().get<std::string>()).value();
        }
      }
      if (rule.lexicon.empty()) {
        problems.add("'mock.lexicon' must be non-empty when 'mock' is present");
      } else {
        cfg.mock_rule = rule;
      }
    } catch (const std::exception& e) {
      problems.add(std::string("mock rule: ") + e.what());
    }
  }

  if (!problems.empty()) problems.raise(path);
  return cfg;
}

}  // namespace icl
