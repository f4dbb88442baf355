#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memprobe/corpus.hpp"
#include "memprobe/llm/gateway.hpp"
#include "memprobe/memory_store.hpp"
#include "memprobe/metrics.hpp"
#include "memprobe/retrieval.hpp"
#include "memprobe/write_strategies.hpp"

namespace memprobe {

namespace fs = std::filesystem;

enum class ProviderKind { live, replay, mock };

std::string_view to_string(ProviderKind p);
ProviderKind parse_provider_kind(std::string_view s);

struct RunConfig {
    fs::path corpus_path;
    CorpusFormat corpus_format = CorpusFormat::normalized;
    std::vector<WriteStrategy> strategies{std::begin(kAllStrategies), std::end(kAllStrategies)};
    std::vector<RetrievalMethod> methods{std::begin(kAllMethods), std::end(kAllMethods)};
    int k = 5;
    int pool_multiplier = 2;
    std::string backbone_model_id = "gpt-5-mini";
    /// Empty means "same as the backbone".
    std::string judge_model_id;
    std::string rerank_model_id = "gpt-5.2";
    /// "live" or "hash" / "hash:<d>".
    std::string embedder = "live";
    std::string embedding_model = "text-embedding-3-small";
    int embedding_dimension = 1536;
    ProviderKind provider = ProviderKind::replay;
    /// Empty means "<out_dir>/cache".
    fs::path cache_dir;
    fs::path out_dir = "run";
    std::uint64_t seed = 1;
    int max_in_flight = 8;
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;
    int conflict_top_m = 5;
    double conflict_threshold = 0.5;
    int chunk_size = 3;
    int chunk_overlap = 0;
    bool include_adversarial = false;
    bool compare_reference = false;
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key_env = "OPENAI_API_KEY";

    /// Sets one field from its textual form; unknown keys or bad values
    /// raise ArgumentError.
    void set(const std::string& key, const std::string& value);
    /// Checks cross-field invariants (k >= 1, non-empty grid, ...).
    void validate() const;

    std::string judge_model() const { return judge_model_id.empty() ? backbone_model_id : judge_model_id; }
    fs::path effective_cache_dir() const { return cache_dir.empty() ? out_dir / "cache" : cache_dir; }
    WriteOptions write_options() const;

    nlohmann::json to_json() const;
};

/// Every settable key, in declaration order.
const std::vector<std::string>& config_keys();

/// Flat `key = value` lines; `#` starts a comment; lists are comma separated.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config_file(const fs::path& path, RunConfig base = {});

struct StoreSummary {
    std::string conversation_id;
    WriteStrategy strategy = WriteStrategy::basic_rag;
    std::size_t entries = 0;
    int sessions = 0;
    int write_llm_calls = 0;
    bool reused = false;
    BuildLog log;

    nlohmann::json to_json() const;
};

struct CellAccounting {
    std::string config_id;
    int questions = 0;
    int answer_calls = 0;
    int rerank_calls = 0;
    int judge_calls = 0;
    int skipped = 0;
    int utilization_excluded = 0;
    int rerank_fallbacks = 0;

    int total_chat_calls() const { return answer_calls + rerank_calls + judge_calls; }
    nlohmann::json to_json() const;
};

struct EvalSummary {
    std::vector<GridCell> cells;
    std::vector<CellAccounting> accounting;
};

/// Drives the pipeline stages over one output tree:
/// memory/, results/{config_id}/, report/, manifest.json.
class Harness {
  public:
    /// Providers chosen from the config.
    explicit Harness(RunConfig config);
    /// Explicit providers, mainly for tests.
    Harness(RunConfig config, std::shared_ptr<llm::ChatProvider> chat,
            std::shared_ptr<llm::EmbeddingProvider> embedder);

    const RunConfig& config() const { return config_; }
    llm::Gateway& gateway() { return *gateway_; }
    const Corpus& corpus();

    /// One store per (conversation, strategy); stores already on disk are reused.
    std::vector<StoreSummary> build();

    /// Answers, probes, aggregates and writes the report. Requires stores.
    /// Completed question records from an earlier run are reused.
    EvalSummary eval();

    /// Discards stored probe records and recomputes them from stored outcomes.
    EvalSummary probe();

    /// Re-aggregates stored outcomes and probes into the report.
    std::vector<GridCell> report();

    /// Compares judge labels against human labels. Judge labels come from
    /// `llm_*` columns of the CSV when present, otherwise from the probe
    /// records of `config_id`.
    nlohmann::json validate_judge(const fs::path& labels_csv, const std::optional<std::string>& config_id);

    fs::path results_dir(const std::string& config_id) const;
    fs::path manifest_path() const { return config_.out_dir / "manifest.json"; }

  private:
    std::vector<QAItem> questions();
    const MemoryStore& store_for(const std::string& conversation_id, WriteStrategy strategy);
    std::map<std::string, std::string> control_answers(const std::vector<QAItem>& qs);
    EvalSummary run_cells(bool recompute_probes);
    void update_manifest(const std::string& section, nlohmann::json value);

    RunConfig config_;
    std::shared_ptr<llm::Gateway> gateway_;
    std::optional<Corpus> corpus_;
    std::map<std::pair<std::string, WriteStrategy>, std::unique_ptr<MemoryStore>> stores_;
};

/// Writes a synthetic corpus (normalized format) to `path`.
void write_synthetic_corpus(const synthetic::Options& options, const fs::path& path);

}  // namespace memprobe
