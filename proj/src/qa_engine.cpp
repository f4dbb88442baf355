#include "memprobe/qa_engine.hpp"

#include "memprobe/errors.hpp"
#include "memprobe/prompts.hpp"
#include "memprobe/text.hpp"

namespace memprobe {

using nlohmann::json;

std::string make_config_id(WriteStrategy strategy, RetrievalMethod method, int k) {
    return std::string(to_string(strategy)) + "__" + std::string(to_string(method)) + "__k" + std::to_string(k);
}

json to_json(const QAOutcome& o) {
    return {{"question_id", o.question_id},
            {"config_id", o.config_id},
            {"answer_with_memory", o.answer_with_memory},
            {"answer_without_memory", o.answer_without_memory},
            {"retrieval", to_json(o.retrieval)},
            {"chat_calls", o.chat_calls}};
}

QAOutcome qa_outcome_from_json(const json& j) {
    QAOutcome o;
    o.question_id = j.at("question_id").get<std::string>();
    o.config_id = j.at("config_id").get<std::string>();
    o.answer_with_memory = j.at("answer_with_memory").get<std::string>();
    o.answer_without_memory = j.at("answer_without_memory").get<std::string>();
    o.retrieval = retrieval_result_from_json(j.at("retrieval"));
    o.chat_calls = j.value("chat_calls", 0);
    return o;
}

std::string render_memories(const RetrievalResult& retrieval, const MemoryStore& store) {
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < retrieval.ranked.size(); ++i) {
        const auto& e = store.at(retrieval.ranked[i].entry_id);
        lines.push_back("[" + std::to_string(i + 1) + "] (" + e.timestamp + ") " + e.content);
    }
    return text::join(lines, "\n");
}

namespace {

std::string ask(llm::Gateway& gateway, const std::string& model_id, std::string prompt) {
    auto answer = text::trim(gateway.chat(llm::user_request(model_id, std::move(prompt), false)));
    if (answer.empty()) {
        throw ProviderError("model returned an empty answer");
    }
    return answer;
}

}  // namespace

std::string answer_with_memory(const QAItem& question, const RetrievalResult& retrieval, const MemoryStore& store,
                               llm::Gateway& gateway, const std::string& model_id) {
    if (!retrieval.question_id.empty() && retrieval.question_id != question.question_id) {
        throw ArgumentError("retrieval for '" + retrieval.question_id + "' used with question '" +
                            question.question_id + "'");
    }
    return ask(gateway, model_id,
               prompts::render(prompts::PromptId::qa_with_memory,
                               {{"memories", render_memories(retrieval, store)}, {"question", question.question}}));
}

std::string answer_without_memory(const QAItem& question, llm::Gateway& gateway, const std::string& model_id) {
    return ask(gateway, model_id,
               prompts::render(prompts::PromptId::qa_without_memory, {{"question", question.question}}));
}

}  // namespace memprobe
