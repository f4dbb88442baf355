#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memprobe/corpus.hpp"
#include "memprobe/llm/gateway.hpp"
#include "memprobe/memory_store.hpp"
#include "memprobe/retrieval.hpp"

namespace memprobe {

/// "{strategy}__{method}__k{k}", e.g. "basic_rag__cosine__k5".
std::string make_config_id(WriteStrategy strategy, RetrievalMethod method, int k);

struct QAOutcome {
    std::string question_id;
    std::string config_id;
    std::string answer_with_memory;
    std::string answer_without_memory;
    RetrievalResult retrieval;
    /// Rerank (when made) plus the two answer calls.
    int chat_calls = 0;

    bool operator==(const QAOutcome&) const = default;
};

nlohmann::json to_json(const QAOutcome& o);
QAOutcome qa_outcome_from_json(const nlohmann::json& j);

/// Numbered "[i] ({timestamp}) {content}" lines in rank order.
std::string render_memories(const RetrievalResult& retrieval, const MemoryStore& store);

std::string answer_with_memory(const QAItem& question, const RetrievalResult& retrieval, const MemoryStore& store,
                               llm::Gateway& gateway, const std::string& model_id);

std::string answer_without_memory(const QAItem& question, llm::Gateway& gateway, const std::string& model_id);

}  // namespace memprobe
