#include "memprobe/llm/oracle_mock.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "memprobe/corpus.hpp"
#include "memprobe/errors.hpp"
#include "memprobe/text.hpp"

namespace memprobe::llm {

using nlohmann::json;
using prompts::PromptId;

namespace {

/// Text between `begin` and the next `end` marker (or the end of `s`).
std::string between(std::string_view s, std::string_view begin, std::string_view end) {
    auto b = s.find(begin);
    if (b == std::string_view::npos) return {};
    b += begin.size();
    auto e = end.empty() ? std::string_view::npos : s.find(end, b);
    return std::string(s.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b));
}

std::vector<std::string> lines_of(std::string_view block) {
    std::vector<std::string> out;
    std::istringstream in{std::string(block)};
    std::string line;
    while (std::getline(in, line)) {
        if (!text::trim(line).empty()) out.push_back(line);
    }
    return out;
}

bool icontains(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return false;
    return text::to_lower(haystack).find(text::to_lower(needle)) != std::string::npos;
}

std::string answer_from_memories(std::string_view memories, std::string_view question) {
    if (auto key = synthetic::question_key(question)) {
        if (auto value = synthetic::find_value(memories, *key)) return *value;
    }
    return kNoInformationAnswer;
}

std::string extraction(std::string_view prompt) {
    json facts = json::array();
    for (const auto& line : lines_of(between(prompt, "Conversation:\n", "\n\nReturn a JSON object"))) {
        if (line.starts_with("[")) continue;
        const auto colon = line.find(": ");
        if (colon == std::string::npos) continue;
        facts.push_back({{"fact", line}, {"speakers", {line.substr(0, colon)}}, {"type", "event"}});
    }
    return json{{"facts", facts}}.dump();
}

std::string conflict(std::string_view prompt) {
    const auto fact = text::trim(between(prompt, "New fact: ", "\n\nExisting similar memories:"));
    const auto existing = between(prompt, "Existing similar memories:\n", "\n\nDecide one of:");
    if (!fact.empty() && existing.find(fact) != std::string::npos) {
        return json{{"action", "NOOP"}, {"reason", "already stored"}}.dump();
    }
    return json{{"action", "ADD"}, {"reason", "new information"}}.dump();
}

std::string summarization(std::string_view prompt) {
    const auto start = prompt.find("Conversation session (");
    const auto body = start == std::string_view::npos ? std::string() : between(prompt.substr(start), "):\n", "\n\nSummary:");
    return text::join(lines_of(body), " ");
}

std::string relevance(std::string_view prompt) {
    const auto gold = text::trim(between(prompt, "Gold answer: ", "\n\nMemory entry: "));
    const auto entry = between(prompt, "Memory entry: ", "\n\nIs this memory entry relevant");
    const bool relevant = icontains(entry, gold);
    return json{{"relevant", relevant}, {"reason", relevant ? "contains the gold answer" : "no gold answer"}}.dump();
}

std::string utilization(std::string_view prompt) {
    const auto gold = text::trim(between(prompt, "Gold (correct) answer: ", "\n\nAnswer A"));
    const auto with = text::trim(between(prompt, "Answer A (with memory): ", "\nAnswer B"));
    const auto without = text::trim(between(prompt, "Answer B (without memory): ", "\n\nEvaluate:"));
    const bool same = text::join(text::tokenize(with), " ") == text::join(text::tokenize(without), " ");
    return json{{"same_answer", same},
                {"answer_with_correct", icontains(with, gold)},
                {"answer_without_correct", icontains(without, gold)},
                {"explanation", "string containment of the gold answer"}}
        .dump();
}

std::string failure(std::string_view prompt) {
    const auto judgments = between(prompt, "Relevance of each memory:\n", "\n\nClassify this case");
    const bool any_relevant = judgments.find("relevant: yes") != std::string::npos;
    return json{{"failure_category", any_relevant ? "utilization_failure" : "retrieval_failure"},
                {"explanation", any_relevant ? "a relevant memory was retrieved" : "no relevant memory was retrieved"},
                {"key_evidence", ""}}
        .dump();
}

std::string rerank(const ChatRequest& request) {
    std::string user;
    for (const auto& m : request.messages) {
        if (m.role == Role::user && prompts::identify(m.content) == PromptId::rerank_user) user = m.content;
    }
    const auto question = text::trim(between(user, "Question: ", "\n\nCandidate memories:"));
    const auto k_text = between(user, "Return the numbers of the ", " most useful");
    const auto candidates = lines_of(between(user, "Candidate memories:\n", "\n\nReturn the numbers"));
    const auto q_tokens = text::tokenize(question);

    std::vector<std::pair<int, int>> scored;  // (score, 1-based index)
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto c_tokens = text::tokenize(candidates[i]);
        int score = 0;
        for (const auto& t : q_tokens) {
            if (std::find(c_tokens.begin(), c_tokens.end(), t) != c_tokens.end()) ++score;
        }
        scored.emplace_back(score, static_cast<int>(i + 1));
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::size_t k = scored.size();
    try {
        k = std::min(k, static_cast<std::size_t>(std::stoul(k_text)));
    } catch (const std::exception&) {
    }
    json ranked = json::array();
    for (std::size_t i = 0; i < k; ++i) ranked.push_back(scored[i].second);
    return json{{"ranked_indices", ranked}}.dump();
}

}  // namespace

std::string OracleMockProvider::complete(const ChatRequest& request) {
    if (request.messages.empty()) throw ProviderError("oracle mock received no messages");
    const auto& first = request.messages.front().content;
    const auto id = prompts::identify(first);
    {
        std::lock_guard lock(mutex_);
        ++calls_[id ? std::string(prompts::name(*id)) : "unknown"];
    }
    if (!id) throw ProviderError("oracle mock cannot identify the prompt");

    switch (*id) {
        case PromptId::extraction: return extraction(first);
        case PromptId::conflict_resolution: return conflict(first);
        case PromptId::summarization: return summarization(first);
        case PromptId::qa_with_memory:
            return answer_from_memories(between(first, "Retrieved memories:\n", "\n\nQuestion: "),
                                        text::trim(between(first, "\n\nQuestion: ", "\n\nBased on")));
        case PromptId::qa_without_memory: return kNoInformationAnswer;
        case PromptId::judge_relevance: return relevance(first);
        case PromptId::judge_utilization: return utilization(first);
        case PromptId::judge_failure: return failure(first);
        case PromptId::rerank_system:
        case PromptId::rerank_user: return rerank(request);
    }
    throw ProviderError("oracle mock has no handler for prompt");
}

std::map<std::string, int> OracleMockProvider::calls_by_prompt() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

int OracleMockProvider::calls() const {
    std::lock_guard lock(mutex_);
    return std::accumulate(calls_.begin(), calls_.end(), 0, [](int acc, const auto& kv) { return acc + kv.second; });
}

}  // namespace memprobe::llm
