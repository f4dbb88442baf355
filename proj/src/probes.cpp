#include "memprobe/probes.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "memprobe/errors.hpp"
#include "memprobe/prompts.hpp"
#include "memprobe/text.hpp"

namespace memprobe {

using nlohmann::json;
using prompts::PromptId;

std::string_view to_string(UtilizationCategory c) {
    switch (c) {
        case UtilizationCategory::beneficial: return "Beneficial";
        case UtilizationCategory::harmful: return "Harmful";
        case UtilizationCategory::ignored: return "Ignored";
        case UtilizationCategory::neutral: return "Neutral";
    }
    return "";
}

UtilizationCategory parse_utilization_category(std::string_view s) {
    const auto lower = text::to_lower(s);
    if (lower == "beneficial") return UtilizationCategory::beneficial;
    if (lower == "harmful") return UtilizationCategory::harmful;
    if (lower == "ignored") return UtilizationCategory::ignored;
    if (lower == "neutral") return UtilizationCategory::neutral;
    throw ParseError("unknown utilization category '" + std::string(s) + "'");
}

std::string_view to_string(FailureCategory c) {
    switch (c) {
        case FailureCategory::retrieval_failure: return "retrieval_failure";
        case FailureCategory::utilization_failure: return "utilization_failure";
        case FailureCategory::hallucination: return "hallucination";
        case FailureCategory::correct: return "correct";
        case FailureCategory::unclassified: return "unclassified";
    }
    return "";
}

FailureCategory parse_failure_category(std::string_view s) {
    auto norm = text::to_lower(text::trim(s));
    std::replace(norm.begin(), norm.end(), ' ', '_');
    std::replace(norm.begin(), norm.end(), '-', '_');
    if (norm == "retrieval_failure" || norm == "retrieval") return FailureCategory::retrieval_failure;
    if (norm == "utilization_failure" || norm == "utilization") return FailureCategory::utilization_failure;
    if (norm == "hallucination") return FailureCategory::hallucination;
    if (norm == "correct") return FailureCategory::correct;
    if (norm == "unclassified") return FailureCategory::unclassified;
    throw ParseError("unknown failure category '" + std::string(s) + "'");
}

UtilizationCategory classify_utilization(bool same_answer, bool answer_with_correct, bool answer_without_correct) {
    if (same_answer) return UtilizationCategory::ignored;
    if (answer_with_correct && !answer_without_correct) return UtilizationCategory::beneficial;
    if (!answer_with_correct && answer_without_correct) return UtilizationCategory::harmful;
    return UtilizationCategory::neutral;
}

double precision_at_k(const std::vector<RelevanceJudgment>& judgments, int k) {
    if (k < 1) {
        throw ArgumentError("precision@k needs k >= 1");
    }
    const auto relevant = std::count_if(judgments.begin(), judgments.end(),
                                        [](const RelevanceJudgment& j) { return j.relevant; });
    return static_cast<double>(relevant) / static_cast<double>(k);
}

namespace {

std::optional<bool> as_bool(const json& doc, const char* field) {
    if (!doc.is_object() || !doc.contains(field)) return std::nullopt;
    const auto& v = doc.at(field);
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_string()) {
        const auto s = text::to_lower(text::trim(v.get<std::string>()));
        if (s == "true" || s == "yes") return true;
        if (s == "false" || s == "no") return false;
    }
    return std::nullopt;
}

std::string as_string(const json& doc, const char* field) {
    if (doc.is_object() && doc.contains(field) && doc.at(field).is_string()) {
        return doc.at(field).get<std::string>();
    }
    return {};
}

json judge(llm::Gateway& gateway, const std::string& model_id, std::string prompt) {
    return json::parse(gateway.chat(llm::user_request(model_id, std::move(prompt), true)), nullptr, false);
}

}  // namespace

RelevanceProbe probe_relevance(const QAItem& question, const RetrievalResult& retrieval, const MemoryStore& store,
                               int k, llm::Gateway& gateway, const std::string& judge_model_id) {
    RelevanceProbe out;
    for (const auto& scored : retrieval.ranked) {
        const auto& entry = store.at(scored.entry_id);
        RelevanceJudgment j;
        j.entry_id = scored.entry_id;
        ++out.chat_calls;
        try {
            const auto doc = judge(gateway, judge_model_id,
                                   prompts::render(PromptId::judge_relevance, {{"question", question.question},
                                                                               {"gold_answer", question.gold_answer},
                                                                               {"memory_content", entry.content}}));
            if (auto relevant = as_bool(doc, "relevant")) {
                j.relevant = *relevant;
                j.reason = as_string(doc, "reason");
            } else {
                j.error = true;
            }
        } catch (const StructuredOutputError& e) {
            spdlog::warn("relevance judge failed for {} / {}: {}", question.question_id, scored.entry_id, e.what());
            j.error = true;
        }
        out.judgments.push_back(std::move(j));
    }
    out.precision = precision_at_k(out.judgments, k);
    return out;
}

std::optional<UtilizationVerdict> probe_utilization(const QAItem& question, const QAOutcome& outcome,
                                                    llm::Gateway& gateway, const std::string& judge_model_id) {
    json doc;
    try {
        doc = judge(gateway, judge_model_id,
                    prompts::render(PromptId::judge_utilization, {{"question", question.question},
                                                                  {"gold_answer", question.gold_answer},
                                                                  {"answer_with", outcome.answer_with_memory},
                                                                  {"answer_without", outcome.answer_without_memory}}));
    } catch (const StructuredOutputError& e) {
        spdlog::warn("utilization judge failed for {}: {}", question.question_id, e.what());
        return std::nullopt;
    }
    const auto same = as_bool(doc, "same_answer");
    const auto with = as_bool(doc, "answer_with_correct");
    const auto without = as_bool(doc, "answer_without_correct");
    if (!same || !with || !without) {
        spdlog::warn("utilization judge for {} omitted a verdict field", question.question_id);
        return std::nullopt;
    }
    UtilizationVerdict v;
    v.same_answer = *same;
    v.answer_with_correct = *with;
    v.answer_without_correct = *without;
    v.explanation = as_string(doc, "explanation");
    v.category = classify_utilization(v.same_answer, v.answer_with_correct, v.answer_without_correct);
    return v;
}

FailureProbe probe_failure(const QAItem& question, const QAOutcome& outcome, const MemoryStore& store,
                           const std::vector<RelevanceJudgment>& relevance, std::optional<bool> answer_correct,
                           llm::Gateway& gateway, const std::string& judge_model_id) {
    FailureProbe out;
    if (!answer_correct) {
        out.verdict.category = FailureCategory::unclassified;
        out.verdict.explanation = "no correctness verdict";
        return out;
    }
    if (*answer_correct) {
        out.verdict.category = FailureCategory::correct;
        return out;
    }

    std::vector<std::string> judgment_lines;
    for (std::size_t i = 0; i < relevance.size(); ++i) {
        const auto& j = relevance[i];
        judgment_lines.push_back("[" + std::to_string(i + 1) + "] relevant: " + (j.relevant ? "yes" : "no") +
                                 (j.reason.empty() ? "" : " (" + j.reason + ")"));
    }
    out.chat_calls = 1;
    json doc;
    try {
        doc = judge(gateway, judge_model_id,
                    prompts::render(PromptId::judge_failure,
                                    {{"question", question.question},
                                     {"gold_answer", question.gold_answer},
                                     {"system_answer", outcome.answer_with_memory},
                                     {"is_correct", "False"},
                                     {"retrieved_memories", render_memories(outcome.retrieval, store)},
                                     {"relevance_judgments", text::join(judgment_lines, "\n")}}));
    } catch (const StructuredOutputError& e) {
        spdlog::warn("failure judge failed for {}: {}", question.question_id, e.what());
        out.verdict.category = FailureCategory::unclassified;
        out.verdict.explanation = "judge output unusable";
        return out;
    }

    out.verdict.explanation = as_string(doc, "explanation");
    const auto evidence = as_string(doc, "key_evidence");
    if (!evidence.empty()) out.verdict.key_evidence = evidence;
    try {
        auto category = parse_failure_category(as_string(doc, "failure_category"));
        // A judge calling an incorrect answer "correct" contradicts the
        // utilization verdict; keep it out of every failure class.
        out.verdict.category = category == FailureCategory::correct ? FailureCategory::unclassified : category;
    } catch (const ParseError&) {
        out.verdict.category = FailureCategory::unclassified;
    }
    return out;
}

ProbeRecord run_probes(const QAItem& question, const QAOutcome& outcome, const MemoryStore& store, int k,
                       llm::Gateway& gateway, const std::string& judge_model_id) {
    ProbeRecord rec;
    rec.question_id = question.question_id;
    rec.config_id = outcome.config_id;

    auto relevance = probe_relevance(question, outcome.retrieval, store, k, gateway, judge_model_id);
    rec.relevance = std::move(relevance.judgments);
    rec.precision_at_k = relevance.precision;
    rec.judge_calls += relevance.chat_calls;

    rec.utilization = probe_utilization(question, outcome, gateway, judge_model_id);
    rec.judge_calls += 1;

    std::optional<bool> correct;
    if (rec.utilization) correct = rec.utilization->answer_with_correct;
    auto failure = probe_failure(question, outcome, store, rec.relevance, correct, gateway, judge_model_id);
    rec.failure = std::move(failure.verdict);
    rec.judge_calls += failure.chat_calls;
    return rec;
}

json to_json(const ProbeRecord& r) {
    json relevance = json::array();
    for (const auto& j : r.relevance) {
        relevance.push_back({{"entry_id", j.entry_id}, {"relevant", j.relevant}, {"reason", j.reason}, {"error", j.error}});
    }
    json utilization = nullptr;
    if (r.utilization) {
        const auto& u = *r.utilization;
        utilization = {{"same_answer", u.same_answer},
                       {"answer_with_correct", u.answer_with_correct},
                       {"answer_without_correct", u.answer_without_correct},
                       {"explanation", u.explanation},
                       {"category", to_string(u.category)}};
    }
    json failure = {{"category", to_string(r.failure.category)},
                    {"explanation", r.failure.explanation},
                    {"key_evidence", r.failure.key_evidence ? json(*r.failure.key_evidence) : json(nullptr)}};
    return {{"question_id", r.question_id}, {"config_id", r.config_id},   {"relevance", relevance},
            {"precision_at_k", r.precision_at_k}, {"utilization", utilization}, {"failure", failure},
            {"judge_calls", r.judge_calls}};
}

ProbeRecord probe_record_from_json(const json& j) {
    ProbeRecord r;
    r.question_id = j.at("question_id").get<std::string>();
    r.config_id = j.at("config_id").get<std::string>();
    for (const auto& x : j.at("relevance")) {
        r.relevance.push_back({x.at("entry_id").get<std::string>(), x.at("relevant").get<bool>(),
                               x.value("reason", std::string()), x.value("error", false)});
    }
    r.precision_at_k = j.at("precision_at_k").get<double>();
    if (!j.at("utilization").is_null()) {
        const auto& u = j.at("utilization");
        UtilizationVerdict v;
        v.same_answer = u.at("same_answer").get<bool>();
        v.answer_with_correct = u.at("answer_with_correct").get<bool>();
        v.answer_without_correct = u.at("answer_without_correct").get<bool>();
        v.explanation = u.value("explanation", std::string());
        v.category = parse_utilization_category(u.at("category").get<std::string>());
        r.utilization = v;
    }
    const auto& f = j.at("failure");
    r.failure.category = parse_failure_category(f.at("category").get<std::string>());
    r.failure.explanation = f.value("explanation", std::string());
    if (f.contains("key_evidence") && f.at("key_evidence").is_string()) {
        r.failure.key_evidence = f.at("key_evidence").get<std::string>();
    }
    r.judge_calls = j.value("judge_calls", 0);
    return r;
}

}  // namespace memprobe
