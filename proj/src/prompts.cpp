#include "memprobe/prompts.hpp"

#include <set>
#include <utility>

#include "memprobe/errors.hpp"
#include "memprobe/llm/digest.hpp"
#include "memprobe/text.hpp"

namespace memprobe::prompts {

namespace detail {
extern const std::pair<std::string_view, std::string_view> kAssets[];
extern const std::size_t kAssetCount;
}  // namespace detail

std::string_view name(PromptId id) {
    switch (id) {
        case PromptId::extraction: return "extraction";
        case PromptId::conflict_resolution: return "conflict_resolution";
        case PromptId::summarization: return "summarization";
        case PromptId::qa_with_memory: return "qa_with_memory";
        case PromptId::qa_without_memory: return "qa_without_memory";
        case PromptId::judge_relevance: return "judge_relevance";
        case PromptId::judge_utilization: return "judge_utilization";
        case PromptId::judge_failure: return "judge_failure";
        case PromptId::rerank_system: return "rerank_system";
        case PromptId::rerank_user: return "rerank_user";
    }
    return "";
}

std::string_view text(PromptId id) {
    const auto wanted = name(id);
    for (std::size_t i = 0; i < detail::kAssetCount; ++i) {
        if (detail::kAssets[i].first == wanted) {
            auto body = detail::kAssets[i].second;
            if (body.ends_with('\n')) {
                body.remove_suffix(1);
            }
            return body;
        }
    }
    throw NotFoundError("prompt asset '" + std::string(wanted) + "' is not compiled in");
}

const std::vector<std::string>& placeholders(PromptId id) {
    static const std::map<PromptId, std::vector<std::string>> table = {
        {PromptId::extraction, {"conversation"}},
        {PromptId::conflict_resolution, {"new_fact", "existing_memories"}},
        {PromptId::summarization, {"timestamp", "conversation"}},
        {PromptId::qa_with_memory, {"memories", "question"}},
        {PromptId::qa_without_memory, {"question"}},
        {PromptId::judge_relevance, {"question", "gold_answer", "memory_content"}},
        {PromptId::judge_utilization, {"question", "gold_answer", "answer_with", "answer_without"}},
        {PromptId::judge_failure,
         {"question", "gold_answer", "system_answer", "is_correct", "retrieved_memories", "relevance_judgments"}},
        {PromptId::rerank_system, {"k"}},
        {PromptId::rerank_user, {"question", "candidates", "k"}},
    };
    return table.at(id);
}

std::string render(PromptId id, const std::map<std::string, std::string>& values) {
    const auto& expected = placeholders(id);
    std::set<std::string> want(expected.begin(), expected.end());
    for (const auto& [key, _] : values) {
        if (!want.contains(key)) {
            throw ArgumentError("prompt '" + std::string(name(id)) + "' has no placeholder {" + key + "}");
        }
    }
    for (const auto& key : expected) {
        if (!values.contains(key)) {
            throw ArgumentError("prompt '" + std::string(name(id)) + "' needs a value for {" + key + "}");
        }
    }
    return text::render_template(text(id), values);
}

std::string digest(PromptId id) {
    return llm::sha256_hex(text(id));
}

nlohmann::json catalog_digests() {
    nlohmann::json out = nlohmann::json::object();
    for (auto id : kAllPrompts) {
        out[std::string(name(id))] = digest(id);
    }
    return out;
}

std::optional<PromptId> identify(std::string_view rendered) {
    for (auto id : kAllPrompts) {
        auto t = text(id);
        auto first_line = t.substr(0, t.find('\n'));
        // Placeholders may appear in the first line of the rerank templates;
        // match only the literal prefix before any '{'.
        first_line = first_line.substr(0, first_line.find('{'));
        if (!first_line.empty() && rendered.starts_with(first_line)) {
            return id;
        }
    }
    return std::nullopt;
}

}  // namespace memprobe::prompts
