#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "memprobe/llm/gateway.hpp"
#include "memprobe/memory_store.hpp"
#include "memprobe/text.hpp"

namespace memprobe {

using text::tokenize;

enum class ScoreSource { cosine, bm25, rerank };
enum class RetrievalMethod { cosine, bm25, hybrid_rerank };

inline constexpr RetrievalMethod kAllMethods[] = {RetrievalMethod::cosine, RetrievalMethod::bm25,
                                                  RetrievalMethod::hybrid_rerank};

std::string_view to_string(ScoreSource s);
std::string_view to_string(RetrievalMethod m);
RetrievalMethod parse_retrieval_method(std::string_view s);

struct ScoredEntry {
    std::string entry_id;
    double score = 0.0;
    ScoreSource source = ScoreSource::cosine;

    bool operator==(const ScoredEntry&) const = default;
};

struct RetrievalResult {
    std::string question_id;
    RetrievalMethod method = RetrievalMethod::cosine;
    int k = 5;
    std::vector<ScoredEntry> ranked;
    std::optional<std::vector<ScoredEntry>> pool;
    /// Set when the reranker failed and pool order was used instead.
    bool rerank_fallback = false;
    int chat_calls = 0;

    bool operator==(const RetrievalResult&) const = default;
};

nlohmann::json to_json(const RetrievalResult& r);
RetrievalResult retrieval_result_from_json(const nlohmann::json& j);

/// Trace document for auditing: query, method, pool with scores, ranking.
nlohmann::json retrieval_trace(const RetrievalResult& r, std::string_view query);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Document-frequency table and per-entry term counts over one store. Built
/// once and shared read-only across queries.
class Bm25Index {
  public:
    explicit Bm25Index(const MemoryStore& store, Bm25Params params = {});

    /// Okapi BM25 with idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)). Every
    /// query token occurrence contributes, so repeated query terms count
    /// repeatedly.
    std::vector<double> score_all(const std::vector<std::string>& query_tokens) const;

    std::size_t document_count() const { return lengths_.size(); }
    double average_length() const { return avg_length_; }
    const Bm25Params& params() const { return params_; }

  private:
    Bm25Params params_;
    std::vector<std::unordered_map<std::string, int>> term_counts_;
    std::vector<std::size_t> lengths_;
    std::unordered_map<std::string, std::size_t> df_;
    double avg_length_ = 0.0;
};

/// Sorts (index, score) pairs by descending score, ascending index on ties,
/// and keeps the first k.
std::vector<std::pair<std::size_t, double>> top_k(const std::vector<double>& scores, std::size_t k);

RetrievalResult retrieve_cosine(const MemoryStore& store, const llm::EmbeddingVector& query, int k);
RetrievalResult retrieve_cosine(const MemoryStore& store, std::string_view query, int k, llm::Gateway& gateway);

/// Entries with zero score are never returned.
RetrievalResult retrieve_bm25(const MemoryStore& store, const Bm25Index& index, std::string_view query, int k);
RetrievalResult retrieve_bm25(const MemoryStore& store, std::string_view query, int k, Bm25Params params = {});

struct HybridOptions {
    std::string rerank_model_id = "gpt-5.2";
    int pool_multiplier = 2;
};

/// Union of the top-(pool_multiplier*k) entries from each of cosine and BM25,
/// ordered by max-normalized score (cosine first on ties). When the pool
/// holds more than k entries one json-mode rerank call picks the final k.
RetrievalResult retrieve_hybrid(const MemoryStore& store, const Bm25Index& index, std::string_view query, int k,
                                llm::Gateway& gateway, const HybridOptions& options = {});

/// Builds the pool without any rerank call.
std::vector<ScoredEntry> hybrid_pool(const MemoryStore& store, const Bm25Index& index,
                                     const llm::EmbeddingVector& query_embedding, std::string_view query, int k,
                                     int pool_multiplier);

/// Maps 1-based reranker indices onto the pool: invalid, duplicate and
/// out-of-range indices are dropped, the list is truncated to k and then
/// back-filled in pool order.
std::vector<ScoredEntry> apply_rerank(const std::vector<ScoredEntry>& pool, const std::vector<nlohmann::json>& indices,
                                      int k);

/// Runs whichever method is requested.
class Retriever {
  public:
    Retriever(const MemoryStore& store, llm::Gateway& gateway, Bm25Params bm25 = {}, HybridOptions hybrid = {});

    RetrievalResult retrieve(RetrievalMethod method, std::string_view question_id, std::string_view query, int k) const;

  private:
    const MemoryStore& store_;
    llm::Gateway& gateway_;
    Bm25Index index_;
    HybridOptions hybrid_;
};

}  // namespace memprobe
