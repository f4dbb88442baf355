#include "memprobe/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <spdlog/spdlog.h>

#include "memprobe/errors.hpp"
#include "memprobe/prompts.hpp"

namespace memprobe {

using nlohmann::json;

std::string_view to_string(ScoreSource s) {
    switch (s) {
        case ScoreSource::cosine: return "cosine";
        case ScoreSource::bm25: return "bm25";
        case ScoreSource::rerank: return "rerank";
    }
    return "";
}

std::string_view to_string(RetrievalMethod m) {
    switch (m) {
        case RetrievalMethod::cosine: return "cosine";
        case RetrievalMethod::bm25: return "bm25";
        case RetrievalMethod::hybrid_rerank: return "hybrid_rerank";
    }
    return "";
}

RetrievalMethod parse_retrieval_method(std::string_view s) {
    if (s == "cosine") return RetrievalMethod::cosine;
    if (s == "bm25") return RetrievalMethod::bm25;
    if (s == "hybrid_rerank" || s == "hybrid") return RetrievalMethod::hybrid_rerank;
    throw ArgumentError("unknown retrieval method '" + std::string(s) + "'");
}

namespace {

ScoreSource parse_source(std::string_view s) {
    if (s == "cosine") return ScoreSource::cosine;
    if (s == "bm25") return ScoreSource::bm25;
    if (s == "rerank") return ScoreSource::rerank;
    throw ParseError("unknown score source '" + std::string(s) + "'");
}

json scored_list(const std::vector<ScoredEntry>& list) {
    json out = json::array();
    for (const auto& s : list) {
        out.push_back({{"entry_id", s.entry_id}, {"score", s.score}, {"source", to_string(s.source)}});
    }
    return out;
}

std::vector<ScoredEntry> parse_scored_list(const json& j) {
    std::vector<ScoredEntry> out;
    for (const auto& s : j) {
        out.push_back({s.at("entry_id").get<std::string>(), s.at("score").get<double>(),
                       parse_source(s.at("source").get<std::string>())});
    }
    return out;
}

void check_k(int k) {
    if (k < 1) {
        throw ArgumentError("retrieval budget k must be >= 1");
    }
}

}  // namespace

json to_json(const RetrievalResult& r) {
    json out = {{"question_id", r.question_id},
                {"method", to_string(r.method)},
                {"k", r.k},
                {"ranked", scored_list(r.ranked)},
                {"rerank_fallback", r.rerank_fallback},
                {"chat_calls", r.chat_calls}};
    out["pool"] = r.pool ? scored_list(*r.pool) : json(nullptr);
    return out;
}

RetrievalResult retrieval_result_from_json(const json& j) {
    RetrievalResult r;
    r.question_id = j.at("question_id").get<std::string>();
    r.method = parse_retrieval_method(j.at("method").get<std::string>());
    r.k = j.at("k").get<int>();
    r.ranked = parse_scored_list(j.at("ranked"));
    if (j.contains("pool") && !j.at("pool").is_null()) {
        r.pool = parse_scored_list(j.at("pool"));
    }
    r.rerank_fallback = j.value("rerank_fallback", false);
    r.chat_calls = j.value("chat_calls", 0);
    return r;
}

json retrieval_trace(const RetrievalResult& r, std::string_view query) {
    json out = to_json(r);
    out["query"] = query;
    return out;
}

namespace {
double ranking_key(double score) { return std::round(score * 1e12) / 1e12; }
}  // namespace

std::vector<std::pair<std::size_t, double>> top_k(const std::vector<double>& scores, std::size_t k) {
    // Rank on scores snapped to 1e-12 so rounding noise does not override sequence tie-breaking.
    std::vector<std::pair<std::size_t, double>> order;
    order.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        order.emplace_back(i, ranking_key(scores[i]));
    }
    const auto keep = std::min(k, order.size());
    auto better = [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), better);
    order.resize(keep);
    for (auto& [i, s] : order) {
        s = scores[i];
    }
    return order;
}

Bm25Index::Bm25Index(const MemoryStore& store, Bm25Params params) : params_(params) {
    const auto& entries = store.entries();
    term_counts_.reserve(entries.size());
    std::size_t total = 0;
    for (const auto& e : entries) {
        std::unordered_map<std::string, int> counts;
        const auto tokens = tokenize(e.content);
        for (const auto& t : tokens) {
            ++counts[t];
        }
        for (const auto& [term, _] : counts) {
            ++df_[term];
        }
        lengths_.push_back(tokens.size());
        total += tokens.size();
        term_counts_.push_back(std::move(counts));
    }
    avg_length_ = entries.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(entries.size());
}

std::vector<double> Bm25Index::score_all(const std::vector<std::string>& query_tokens) const {
    const auto n = static_cast<double>(lengths_.size());
    std::vector<double> scores(lengths_.size(), 0.0);
    for (const auto& term : query_tokens) {
        auto df_it = df_.find(term);
        if (df_it == df_.end()) continue;
        const auto df = static_cast<double>(df_it->second);
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        for (std::size_t d = 0; d < lengths_.size(); ++d) {
            auto tf_it = term_counts_[d].find(term);
            if (tf_it == term_counts_[d].end()) continue;
            const auto tf = static_cast<double>(tf_it->second);
            const double rel_len = avg_length_ > 0.0 ? static_cast<double>(lengths_[d]) / avg_length_ : 1.0;
            const double norm = params_.k1 * (1.0 - params_.b + params_.b * rel_len);
            scores[d] += idf * tf * (params_.k1 + 1.0) / (tf + norm);
        }
    }
    return scores;
}

RetrievalResult retrieve_cosine(const MemoryStore& store, const llm::EmbeddingVector& query, int k) {
    check_k(k);
    RetrievalResult r;
    r.method = RetrievalMethod::cosine;
    r.k = k;
    std::vector<double> scores;
    scores.reserve(store.size());
    for (const auto& e : store.entries()) {
        scores.push_back(llm::cosine_similarity(query, e.embedding));
    }
    for (const auto& [i, s] : top_k(scores, static_cast<std::size_t>(k))) {
        r.ranked.push_back({store.entries()[i].entry_id, s, ScoreSource::cosine});
    }
    return r;
}

RetrievalResult retrieve_cosine(const MemoryStore& store, std::string_view query, int k, llm::Gateway& gateway) {
    check_k(k);
    if (store.empty()) {
        RetrievalResult r;
        r.k = k;
        return r;
    }
    return retrieve_cosine(store, gateway.embed_one(std::string(query)), k);
}

RetrievalResult retrieve_bm25(const MemoryStore& store, const Bm25Index& index, std::string_view query, int k) {
    check_k(k);
    RetrievalResult r;
    r.method = RetrievalMethod::bm25;
    r.k = k;
    const auto tokens = tokenize(query);
    if (tokens.empty()) {
        return r;
    }
    for (const auto& [i, s] : top_k(index.score_all(tokens), static_cast<std::size_t>(k))) {
        if (s <= 0.0) break;
        r.ranked.push_back({store.entries()[i].entry_id, s, ScoreSource::bm25});
    }
    return r;
}

RetrievalResult retrieve_bm25(const MemoryStore& store, std::string_view query, int k, Bm25Params params) {
    return retrieve_bm25(store, Bm25Index(store, params), query, k);
}

std::vector<ScoredEntry> hybrid_pool(const MemoryStore& store, const Bm25Index& index,
                                     const llm::EmbeddingVector& query_embedding, std::string_view query, int k,
                                     int pool_multiplier) {
    check_k(k);
    if (pool_multiplier < 1) {
        throw ArgumentError("pool_multiplier must be >= 1");
    }
    const auto depth = static_cast<std::size_t>(k) * static_cast<std::size_t>(pool_multiplier);
    const auto cos = retrieve_cosine(store, query_embedding, static_cast<int>(depth));
    const auto lex = retrieve_bm25(store, index, query, static_cast<int>(depth));

    auto max_of = [](const std::vector<ScoredEntry>& list) { return list.empty() ? 0.0 : list.front().score; };
    const double cos_max = max_of(cos.ranked);
    const double lex_max = max_of(lex.ranked);

    struct Pooled {
        std::size_t index;
        double score;
        ScoreSource source;
    };
    std::vector<Pooled> pooled;
    auto add = [&](const ScoredEntry& s, double max, ScoreSource source) {
        const double normalized = max > 0.0 ? s.score / max : 0.0;
        const auto idx = *store.index_of(s.entry_id);
        for (auto& p : pooled) {
            if (p.index == idx) {
                if (normalized > p.score) {
                    p.score = normalized;
                    p.source = source;
                }
                return;
            }
        }
        pooled.push_back({idx, normalized, source});
    };
    for (const auto& s : cos.ranked) add(s, cos_max, ScoreSource::cosine);
    for (const auto& s : lex.ranked) add(s, lex_max, ScoreSource::bm25);

    std::sort(pooled.begin(), pooled.end(), [](const Pooled& a, const Pooled& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.source != b.source) return a.source == ScoreSource::cosine;
        return a.index < b.index;
    });
    std::vector<ScoredEntry> out;
    for (const auto& p : pooled) {
        out.push_back({store.entries()[p.index].entry_id, p.score, p.source});
    }
    return out;
}

std::vector<ScoredEntry> apply_rerank(const std::vector<ScoredEntry>& pool, const std::vector<json>& indices, int k) {
    const auto limit = std::min(static_cast<std::size_t>(std::max(k, 0)), pool.size());
    std::vector<std::size_t> chosen;
    std::set<std::size_t> used;
    for (const auto& v : indices) {
        if (chosen.size() == limit) break;
        if (!v.is_number_integer()) continue;
        const auto i = v.get<long long>();
        if (i < 1 || static_cast<std::size_t>(i) > pool.size()) continue;
        const auto slot = static_cast<std::size_t>(i - 1);
        if (!used.insert(slot).second) continue;
        chosen.push_back(slot);
    }
    for (std::size_t slot = 0; slot < pool.size() && chosen.size() < limit; ++slot) {
        if (used.insert(slot).second) {
            chosen.push_back(slot);
        }
    }
    std::vector<ScoredEntry> out;
    for (std::size_t rank = 0; rank < chosen.size(); ++rank) {
        out.push_back({pool[chosen[rank]].entry_id, 1.0 / static_cast<double>(rank + 1), ScoreSource::rerank});
    }
    return out;
}

RetrievalResult retrieve_hybrid(const MemoryStore& store, const Bm25Index& index, std::string_view query, int k,
                                llm::Gateway& gateway, const HybridOptions& options) {
    check_k(k);
    RetrievalResult r;
    r.method = RetrievalMethod::hybrid_rerank;
    r.k = k;
    if (store.empty()) {
        r.pool.emplace();
        return r;
    }
    const auto pool = hybrid_pool(store, index, gateway.embed_one(std::string(query)), query, k,
                                  options.pool_multiplier);
    r.pool = pool;
    if (pool.size() <= static_cast<std::size_t>(k)) {
        r.ranked = pool;
        return r;
    }

    std::vector<std::string> lines;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        lines.push_back("[" + std::to_string(i + 1) + "] " + store.at(pool[i].entry_id).content);
    }
    const auto k_text = std::to_string(k);
    llm::ChatRequest request;
    request.model_id = options.rerank_model_id;
    request.json_mode = true;
    request.messages.push_back({llm::Role::system, prompts::render(prompts::PromptId::rerank_system, {{"k", k_text}})});
    request.messages.push_back(
        {llm::Role::user, prompts::render(prompts::PromptId::rerank_user,
                                          {{"question", std::string(query)},
                                           {"candidates", text::join(lines, "\n")},
                                           {"k", k_text}})});
    r.chat_calls = 1;

    std::optional<std::vector<json>> indices;
    try {
        const auto doc = json::parse(gateway.chat(request), nullptr, false);
        if (doc.is_object() && doc.contains("ranked_indices") && doc.at("ranked_indices").is_array()) {
            indices = doc.at("ranked_indices").get<std::vector<json>>();
        } else if (doc.is_array()) {
            indices = doc.get<std::vector<json>>();
        }
    } catch (const StructuredOutputError& e) {
        spdlog::warn("rerank output unusable: {}", e.what());
    }
    if (!indices) {
        r.rerank_fallback = true;
        r.ranked.assign(pool.begin(), pool.begin() + k);
        return r;
    }
    r.ranked = apply_rerank(pool, *indices, k);
    return r;
}

Retriever::Retriever(const MemoryStore& store, llm::Gateway& gateway, Bm25Params bm25, HybridOptions hybrid)
    : store_(store), gateway_(gateway), index_(store, bm25), hybrid_(std::move(hybrid)) {}

RetrievalResult Retriever::retrieve(RetrievalMethod method, std::string_view question_id, std::string_view query,
                                    int k) const {
    RetrievalResult r;
    switch (method) {
        case RetrievalMethod::cosine: r = retrieve_cosine(store_, query, k, gateway_); break;
        case RetrievalMethod::bm25: r = retrieve_bm25(store_, index_, query, k); break;
        case RetrievalMethod::hybrid_rerank: r = retrieve_hybrid(store_, index_, query, k, gateway_, hybrid_); break;
    }
    r.method = method;
    r.question_id = std::string(question_id);
    return r;
}

}  // namespace memprobe
