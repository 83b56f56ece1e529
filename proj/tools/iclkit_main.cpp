// iclkit: demonstration-selection toolkit for in-context learning.
// Subcommands: ingest, embed, select, eval, induce, grade, report.

#include <algorithm>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>

#include <CLI11.hpp>

#include "icl/config.hpp"
#include "icl/corpus.hpp"
#include "icl/embeddings.hpp"
#include "icl/evaluation.hpp"
#include "icl/gateway.hpp"
#include "icl/hash.hpp"
#include "icl/mock_provider.hpp"
#include "icl/prompting.hpp"
#include "icl/run_store.hpp"
#include "icl/selection.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitResumable = 3;

struct GlobalOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string provider = "remote";
  std::string out;
};

icl::RunConfig load_config(const GlobalOpts& opts) {
  if (opts.config_path.empty()) {
    throw icl::ConfigError("--config PATH is required for this command", {});
  }
  icl::RunConfig cfg = icl::RunConfig::load(opts.config_path);
  if (opts.seed.has_value()) cfg.seed = *opts.seed;
  if (!opts.out.empty()) cfg.output_dir = opts.out;
  return cfg;
}

std::filesystem::path run_dir(const GlobalOpts& opts, const icl::RunConfig* cfg) {
  if (!opts.out.empty()) return opts.out;
  if (cfg != nullptr && !cfg->output_dir.empty()) return cfg->output_dir;
  throw icl::ConfigError("no run directory: pass --out DIR or set output_dir in the config", {});
}

std::unique_ptr<icl::Provider> make_provider(const icl::RunConfig& cfg, const GlobalOpts& opts) {
  if (opts.provider == "mock") {
    icl::MockRule rule = cfg.mock_rule.value_or(icl::default_mock_rule(cfg.task));
    return std::make_unique<icl::MockProvider>(std::move(rule));
  }
  if (opts.provider == "remote") {
    icl::ProviderConfig pc = cfg.provider;
    if (pc.base_url.empty()) {
      throw icl::ConfigError("provider.base_url is required for --provider remote", {});
    }
    if (!cfg.output_dir.empty()) pc.request_log = cfg.output_dir / "requests.jsonl";
    return std::make_unique<icl::RemoteProvider>(std::move(pc));
  }
  throw icl::ConfigError("unknown provider '" + opts.provider + "' (expected remote|mock)", {});
}

std::map<std::string, icl::Corpus> load_datasets(const icl::RunConfig& cfg,
                                                 std::vector<std::string>* warnings = nullptr) {
  std::map<std::string, icl::Corpus> out;
  for (const icl::DatasetRef& ref : cfg.all_datasets()) {
    out.emplace(ref.name, icl::load_corpus(ref.path.string(), cfg.task, ref.name, warnings));
  }
  return out;
}

bool any_needs_embeddings(const std::vector<icl::StrategyKind>& strategies) {
  return std::any_of(strategies.begin(), strategies.end(), icl::strategy_needs_embeddings);
}

nlohmann::ordered_json make_manifest(const icl::RunConfig& cfg, const std::string& provider_name) {
  nlohmann::ordered_json m;
  m["seed"] = cfg.seed;
  m["provider"] = provider_name;
  m["completion_model"] = cfg.completion_model;
  m["embedding_model"] = cfg.embedding_model;
  m["task"] = std::string(icl::to_string(cfg.task));
  std::vector<std::string> datasets;
  for (const icl::DatasetRef& ref : cfg.all_datasets()) datasets.push_back(ref.name);
  m["datasets"] = datasets;
  std::vector<std::string> strategies;
  for (icl::StrategyKind s : cfg.strategies) strategies.emplace_back(icl::strategy_name(s));
  m["strategies"] = strategies;
  m["ks"] = cfg.ks;
  m["test_samples"] = cfg.test_samples;
  m["arrangement"] = std::string(icl::to_string(cfg.arrangement));
  m["template_hashes"] = {
      {"icl-sentiment", icl::template_hash(icl::TemplateKind::IclSentiment)},
      {"icl-nli", icl::template_hash(icl::TemplateKind::IclNli)},
      {"instruction-induction", icl::template_hash(icl::TemplateKind::InstructionInduction)},
  };
  m["config"] = cfg.raw;
  return m;
}

std::uint64_t split_seed(const icl::RunConfig& cfg, const std::string& dataset) {
  return icl::test_split_seed(cfg.seed, dataset);
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

int cmd_ingest(const GlobalOpts& opts) {
  icl::RunConfig cfg = load_config(opts);
  bool failed = false;
  std::size_t total_violations = 0;
  for (const icl::DatasetRef& ref : cfg.all_datasets()) {
    std::vector<std::string> warnings;
    try {
      icl::Corpus corpus = icl::load_corpus(ref.path.string(), cfg.task, ref.name, &warnings);
      for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
      icl::PairValidationReport report = icl::validate_pairs(corpus, cfg.max_edit_ratio);
      std::cout << ref.name << ": " << corpus.size() << " examples, " << corpus.pair_count()
                << " pairs, " << report.violations.size() << " pair violation"
                << (report.violations.size() == 1 ? "" : "s") << "\n";
      for (const icl::PairViolation& v : report.violations) {
        std::cout << "  pair '" << v.pair_id << "': " << v.detail << "\n";
      }
      total_violations += report.violations.size();
    } catch (const icl::CorpusError& e) {
      std::cerr << "error: " << ref.name << ": " << e.what() << "\n";
      failed = true;
    }
  }
  if (failed) return kExitData;
  return total_violations == 0 ? kExitOk : kExitData;
}

// ---------------------------------------------------------------------------
// embed
// ---------------------------------------------------------------------------

int cmd_embed(const GlobalOpts& opts) {
  icl::RunConfig cfg = load_config(opts);
  auto provider = make_provider(cfg, opts);
  icl::EmbeddingCache cache(cfg.embedding_cache);
  auto datasets = load_datasets(cfg);
  for (const auto& [name, corpus] : datasets) {
    icl::EmbedStats stats;
    icl::embed_corpus(corpus, *provider, cache, cfg.embedding_model, &stats);
    std::cout << name << ": " << stats.cache_hits << " hits, " << stats.cache_misses
              << " misses, " << stats.provider_calls << " provider calls\n";
  }
  std::cout << "cache: " << cache.size() << " entries at " << cache.path().string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// select (dry-run introspection)
// ---------------------------------------------------------------------------

int cmd_select(const GlobalOpts& opts, const std::string& test_id, const std::string& strategy,
               std::size_t k) {
  icl::RunConfig cfg = load_config(opts);
  const icl::StrategyKind kind = icl::strategy_from_string(strategy);
  icl::Corpus corpus = icl::load_corpus(cfg.id_dataset.path.string(), cfg.task,
                                        cfg.id_dataset.name);
  const icl::Example& test = corpus.at(test_id);

  std::optional<icl::EmbeddingStore> store;
  if (icl::strategy_needs_embeddings(kind)) {
    auto provider = make_provider(cfg, opts);
    icl::EmbeddingCache cache(cfg.embedding_cache);
    store = icl::embed_corpus(corpus, *provider, cache, cfg.embedding_model);
  }

  icl::StrategySpec spec{kind, k, icl::derive_seed(cfg.seed, {"select", strategy, test_id})};
  icl::DemonstrationSet set =
      icl::select(corpus, store ? &*store : nullptr, test,
                  store ? store->vector_of(test_id) : std::span<const float>{}, spec, {});
  set = icl::arrange(std::move(set), cfg.arrangement);
  icl::validate_demonstration_set(set);

  std::cout << "strategy=" << strategy << " k=" << k << " test=" << test_id << "\n";
  for (std::size_t i = 0; i < set.demos.size(); ++i) {
    const icl::Example& e = set.demos[i];
    std::cout << "  " << (i + 1) << ". [" << e.id << "] " << e.label.surface();
    if (!set.scores.empty()) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6f", set.scores[i]);
      std::cout << " sim=" << buf;
    }
    if (e.cd_role != icl::CdRole::None) {
      std::cout << " pair=" << e.pair_id
                << (e.cd_role == icl::CdRole::Original ? " (original)" : " (counterfactual)");
    }
    std::cout << " " << e.content() << "\n";
  }
  icl::RenderedPrompt prompt = icl::render_icl(set, test);
  std::cout << "\nprompt (" << prompt.content_hash.substr(0, 12) << "):\n"
            << prompt.text << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const GlobalOpts& opts) {
  icl::RunConfig cfg = load_config(opts);
  const std::filesystem::path out_dir = run_dir(opts, &cfg);
  cfg.output_dir = out_dir;
  auto provider = make_provider(cfg, opts);
  auto datasets = load_datasets(cfg);

  // Test splits are drawn per dataset; the demonstration pool is always the
  // ID corpus minus its own test split, so pools and tests stay disjoint.
  std::map<std::string, std::vector<icl::Example>> tests;
  for (const icl::DatasetRef& ref : cfg.all_datasets()) {
    const icl::Corpus& corpus = datasets.at(ref.name);
    if (cfg.test_samples > corpus.size()) {
      std::cerr << "error: test_samples=" << cfg.test_samples << " exceeds dataset '" << ref.name
                << "' size " << corpus.size() << "\n";
      return kExitData;
    }
    tests.emplace(ref.name,
                  icl::sample_test_split(corpus, cfg.test_samples, split_seed(cfg, ref.name)));
  }

  std::unordered_set<std::string> id_test_ids;
  for (const icl::Example& e : tests.at(cfg.id_dataset.name)) id_test_ids.insert(e.id);
  const icl::Corpus pool = datasets.at(cfg.id_dataset.name).without(id_test_ids);

  std::map<std::string, icl::EmbeddingStore> stores;
  if (any_needs_embeddings(cfg.strategies)) {
    icl::EmbeddingCache cache(cfg.embedding_cache);
    for (const auto& [name, corpus] : datasets) {
      stores.emplace(name, icl::embed_corpus(corpus, *provider, cache, cfg.embedding_model));
    }
  }
  const icl::EmbeddingStore* pool_store =
      stores.count(cfg.id_dataset.name) ? &stores.at(cfg.id_dataset.name) : nullptr;

  icl::RunStore store(out_dir);
  store.write_manifest(make_manifest(cfg, provider->name()));
  icl::RunStoreEvalSink sink(store);

  std::vector<icl::EvalRecord> all_records;
  try {
    for (const icl::DatasetRef& ref : cfg.all_datasets()) {
      icl::EvalPlan plan;
      plan.dataset = ref.name;
      plan.pool = &pool;
      plan.store = pool_store;
      plan.query_store = stores.count(ref.name) ? &stores.at(ref.name) : pool_store;
      plan.tests = tests.at(ref.name);
      plan.strategies = cfg.strategies;
      plan.ks = cfg.ks;
      plan.seed = cfg.seed;
      plan.arrangement = cfg.arrangement;
      plan.model = cfg.completion_model;
      plan.temperature = cfg.eval_temperature;
      plan.max_tokens = cfg.eval_max_tokens;
      std::vector<icl::EvalRecord> records = icl::run_icl_eval(plan, *provider, &sink);
      all_records.insert(all_records.end(), records.begin(), records.end());
    }
  } catch (const icl::GatewayError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitResumable;
  }

  store.finalize_eval_records(all_records);
  if (sink.resumed() > 0) {
    std::cout << "resumed " << sink.resumed() << " previously completed records\n";
  }

  std::vector<std::string> dataset_order;
  for (const icl::DatasetRef& ref : cfg.all_datasets()) dataset_order.push_back(ref.name);
  icl::RunReport report = icl::RunReport::from_records(all_records, "random", dataset_order);
  store.write_text("report.md", report.to_markdown());
  store.write_text("report.csv", report.to_csv());

  std::cout << all_records.size() << " records -> " << store.eval_records_path().string() << "\n";
  std::cout << report.to_markdown();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// induce
// ---------------------------------------------------------------------------

int cmd_induce(const GlobalOpts& opts, const std::string& strategy,
               std::optional<std::size_t> count_flag) {
  icl::RunConfig cfg = load_config(opts);
  const std::filesystem::path out_dir = run_dir(opts, &cfg);
  cfg.output_dir = out_dir;
  const icl::StrategyKind kind = icl::strategy_from_string(strategy);
  const std::size_t count = count_flag.value_or(cfg.induction_count);
  if (count < 1) {
    std::cerr << "error: --count must be >= 1\n";
    return kExitUsage;
  }
  if (icl::induction_extension(kind)) {
    std::cerr << "note: strategy '" << strategy << "' is an extension of the induction probe\n";
  }

  auto provider = make_provider(cfg, opts);
  icl::Corpus corpus =
      icl::load_corpus(cfg.id_dataset.path.string(), cfg.task, cfg.id_dataset.name);

  std::optional<icl::EmbeddingStore> emb;
  if (icl::strategy_needs_embeddings(kind)) {
    icl::EmbeddingCache cache(cfg.embedding_cache);
    emb = icl::embed_corpus(corpus, *provider, cache, cfg.embedding_model);
  }

  icl::RunStore store(out_dir);
  std::vector<icl::InstructionRecord> existing;
  if (store.has_instructions()) existing = store.load_instructions();
  std::vector<icl::InstructionRecord> other_strategies;
  std::vector<icl::InstructionRecord> mine;
  for (icl::InstructionRecord& r : existing) {
    (r.strategy == strategy ? mine : other_strategies).push_back(std::move(r));
  }

  icl::InductionPlan plan;
  plan.corpus = &corpus;
  plan.store = emb ? &*emb : nullptr;
  plan.strategy = kind;
  plan.k = cfg.induction_k;
  plan.count = count;
  plan.seed = cfg.seed;
  plan.model = cfg.completion_model;
  plan.temperature = cfg.induction_temperature;
  plan.max_tokens = cfg.induction_max_tokens;

  std::vector<icl::InstructionRecord> completed;
  try {
    std::vector<icl::InstructionRecord> records =
        icl::run_induction(plan, *provider, mine,
                           [&](const icl::InstructionRecord& r) { completed.push_back(r); });
    std::vector<icl::InstructionRecord> merged = other_strategies;
    merged.insert(merged.end(), records.begin(), records.end());
    store.write_instructions(std::move(merged));
  } catch (const icl::GatewayError& e) {
    std::vector<icl::InstructionRecord> merged = other_strategies;
    merged.insert(merged.end(), mine.begin(), mine.end());
    merged.insert(merged.end(), completed.begin(), completed.end());
    store.write_instructions(std::move(merged));
    std::cerr << "error: " << e.what() << "\n";
    return kExitResumable;
  }
  store.write_manifest(make_manifest(cfg, provider->name()));

  std::cout << count << " instruction records for strategy '" << strategy << "' -> "
            << store.instructions_path().string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// grade
// ---------------------------------------------------------------------------

void print_rubric() {
  std::cout << "Grades:\n"
            << "  1  satisfying  - correct instruction; a human could solve the task 0-shot\n"
            << "                   from it, on this dataset and beyond\n"
            << "  2  acceptable  - minor imperfections or redundant wording; usable 0-shot but\n"
            << "                   tied to this dataset\n"
            << "  3  invalid     - misses the task; not executable even by a human\n"
            << "  s  skip        q  quit\n";
}

int cmd_grade(const GlobalOpts& opts) {
  std::optional<icl::RunConfig> cfg;
  if (!opts.config_path.empty()) cfg = load_config(opts);
  icl::RunStore store(run_dir(opts, cfg ? &*cfg : nullptr));
  if (!store.has_instructions()) {
    std::cerr << "error: no instruction records in " << store.dir().string() << "\n";
    return kExitData;
  }

  std::vector<icl::InstructionRecord> records = store.load_instructions();
  std::size_t ungraded = 0;
  for (const icl::InstructionRecord& r : records) ungraded += r.grade.has_value() ? 0 : 1;
  if (ungraded == 0) {
    std::cout << "all " << records.size() << " records are graded\n";
    return kExitOk;
  }

  print_rubric();
  std::size_t graded_now = 0;
  for (const icl::InstructionRecord& r : records) {
    if (r.grade.has_value()) continue;
    std::cout << "\n[" << r.id << "] strategy=" << r.strategy << " k=" << r.k << "\n";
    std::cout << "demonstrations:\n";
    for (const std::string& d : r.demo_display) std::cout << "  " << d << "\n";
    std::cout << "instruction:" << r.instruction << "\n";

    bool next = false;
    while (!next) {
      std::cout << "grade [1/2/3/s/q] > " << std::flush;
      std::string line;
      if (!std::getline(std::cin, line)) {
        std::cout << "\n" << graded_now << " graded this session\n";
        return kExitOk;
      }
      if (line == "1" || line == "2" || line == "3") {
        const icl::Grade g = line == "1"   ? icl::Grade::Satisfying
                             : line == "2" ? icl::Grade::Acceptable
                                           : icl::Grade::Invalid;
        store.grade_instruction(r.id, g);
        ++graded_now;
        next = true;
      } else if (line == "s") {
        next = true;
      } else if (line == "q") {
        std::cout << graded_now << " graded this session\n";
        return kExitOk;
      } else {
        print_rubric();
      }
    }
  }
  std::cout << graded_now << " graded this session; none remain\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const GlobalOpts& opts, const std::string& format, bool grades) {
  std::optional<icl::RunConfig> cfg;
  if (!opts.config_path.empty()) cfg = load_config(opts);
  icl::RunStore store(run_dir(opts, cfg ? &*cfg : nullptr));

  if (grades) {
    if (!store.has_instructions()) {
      std::cerr << "error: no instruction records in " << store.dir().string() << "\n";
      return kExitData;
    }
    auto dist = icl::aggregate_grades(store.load_instructions());
    const std::string content =
        format == "csv" ? icl::grades_to_csv(dist) : icl::grades_to_markdown(dist);
    const auto path =
        store.write_text(format == "csv" ? "grades_report.csv" : "grades_report.md", content);
    std::cout << path.string() << "\n" << content;
    return kExitOk;
  }

  if (!store.has_eval_records()) {
    std::cerr << "error: no eval records in " << store.dir().string() << "\n";
    return kExitData;
  }
  std::vector<std::string> dataset_order;
  if (auto manifest = store.read_manifest()) {
    if (manifest->contains("datasets")) {
      dataset_order = (*manifest)["datasets"].get<std::vector<std::string>>();
    }
  }
  icl::RunReport report =
      icl::RunReport::from_records(store.load_eval_records(), "random", dataset_order);
  const std::string content = format == "csv" ? report.to_csv() : report.to_markdown();
  const auto path = store.write_text(format == "csv" ? "report.csv" : "report.md", content);
  std::cout << path.string() << "\n" << content;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Demonstration-selection toolkit for in-context learning"};
  app.require_subcommand(1);

  GlobalOpts opts;
  std::uint64_t seed_value = 0;
  app.add_option("--config", opts.config_path, "Path to the JSON run config");
  auto* seed_opt = app.add_option("--seed", seed_value, "Override the config seed");
  app.add_option("--provider", opts.provider, "Provider backend (remote|mock)")
      ->check(CLI::IsMember({"remote", "mock"}));
  app.add_option("--out", opts.out, "Run/output directory override");

  auto* ingest = app.add_subcommand("ingest", "Load and validate all configured corpora");
  auto* embed = app.add_subcommand("embed", "Populate the embedding cache");
  auto* select = app.add_subcommand("select", "Print the demonstrations one strategy would pick");
  std::string sel_test, sel_strategy;
  std::size_t sel_k = 4;
  select->add_option("--test-id", sel_test, "Test example id (from the ID dataset)")->required();
  select->add_option("--strategy", sel_strategy, "Strategy name")->required();
  select->add_option("--k", sel_k, "Shot count");
  auto* eval = app.add_subcommand("eval", "Run the ICL evaluation grid");
  auto* induce = app.add_subcommand("induce", "Generate instruction-induction records");
  std::string ind_strategy = "random";
  std::optional<std::size_t> ind_count;
  induce->add_option("--strategy", ind_strategy, "Strategy name");
  induce->add_option("--count", ind_count, "Number of instructions");
  auto* grade = app.add_subcommand("grade", "Interactively grade induced instructions");
  auto* report = app.add_subcommand("report", "Render reports from a run directory");
  std::string rep_format = "md";
  bool rep_grades = false;
  report->add_option("--format", rep_format, "Output format")
      ->check(CLI::IsMember({"md", "csv"}));
  report->add_flag("--grades", rep_grades, "Report grade distributions instead of accuracies");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) opts.seed = seed_value;

  try {
    if (ingest->parsed()) return cmd_ingest(opts);
    if (embed->parsed()) return cmd_embed(opts);
    if (select->parsed()) return cmd_select(opts, sel_test, sel_strategy, sel_k);
    if (eval->parsed()) return cmd_eval(opts);
    if (induce->parsed()) return cmd_induce(opts, ind_strategy, ind_count);
    if (grade->parsed()) return cmd_grade(opts);
    if (report->parsed()) return cmd_report(opts, rep_format, rep_grades);
  } catch (const icl::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
