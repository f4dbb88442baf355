#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memprobe/corpus.hpp"
#include "memprobe/llm/gateway.hpp"
#include "memprobe/memory_store.hpp"
#include "memprobe/qa_engine.hpp"
#include "memprobe/retrieval.hpp"

namespace memprobe {

struct RelevanceJudgment {
    std::string entry_id;
    bool relevant = false;
    std::string reason;
    /// Judge output was unusable; counted as not relevant.
    bool error = false;

    bool operator==(const RelevanceJudgment&) const = default;
};

enum class UtilizationCategory { beneficial, harmful, ignored, neutral };

std::string_view to_string(UtilizationCategory c);
UtilizationCategory parse_utilization_category(std::string_view s);

struct UtilizationVerdict {
    bool same_answer = false;
    bool answer_with_correct = false;
    bool answer_without_correct = false;
    std::string explanation;
    UtilizationCategory category = UtilizationCategory::neutral;

    bool operator==(const UtilizationVerdict&) const = default;
};

enum class FailureCategory { retrieval_failure, utilization_failure, hallucination, correct, unclassified };

std::string_view to_string(FailureCategory c);
FailureCategory parse_failure_category(std::string_view s);

struct FailureVerdict {
    FailureCategory category = FailureCategory::unclassified;
    std::string explanation;
    std::optional<std::string> key_evidence;

    bool operator==(const FailureVerdict&) const = default;
};

struct ProbeRecord {
    std::string question_id;
    std::string config_id;
    std::vector<RelevanceJudgment> relevance;
    double precision_at_k = 0.0;
    /// Absent when the utilization judge failed; the question is then
    /// excluded from utilization aggregates and its failure is unclassified.
    std::optional<UtilizationVerdict> utilization;
    FailureVerdict failure;
    int judge_calls = 0;

    bool operator==(const ProbeRecord&) const = default;
};

nlohmann::json to_json(const ProbeRecord& r);
ProbeRecord probe_record_from_json(const nlohmann::json& j);

/// Ignored when the answers match; otherwise Beneficial, Harmful or Neutral
/// by how correctness moved.
UtilizationCategory classify_utilization(bool same_answer, bool answer_with_correct, bool answer_without_correct);

/// relevant count / k, with k the configured budget.
double precision_at_k(const std::vector<RelevanceJudgment>& judgments, int k);

struct RelevanceProbe {
    std::vector<RelevanceJudgment> judgments;
    double precision = 0.0;
    int chat_calls = 0;
};

/// One judge call per retrieved entry. Never sees the generated answers.
RelevanceProbe probe_relevance(const QAItem& question, const RetrievalResult& retrieval, const MemoryStore& store,
                               int k, llm::Gateway& gateway, const std::string& judge_model_id);

/// One judge call comparing a_mem and a_no against the gold answer. Never sees
/// the retrieved entries. nullopt when the judge output is unusable.
std::optional<UtilizationVerdict> probe_utilization(const QAItem& question, const QAOutcome& outcome,
                                                    llm::Gateway& gateway, const std::string& judge_model_id);

struct FailureProbe {
    FailureVerdict verdict;
    int chat_calls = 0;
};

/// `answer_correct` comes from the utilization verdict; nullopt means that
/// verdict is missing and the case stays unclassified without a call.
FailureProbe probe_failure(const QAItem& question, const QAOutcome& outcome, const MemoryStore& store,
                           const std::vector<RelevanceJudgment>& relevance, std::optional<bool> answer_correct,
                           llm::Gateway& gateway, const std::string& judge_model_id);

/// All three probes for one outcome.
ProbeRecord run_probes(const QAItem& question, const QAOutcome& outcome, const MemoryStore& store, int k,
                       llm::Gateway& gateway, const std::string& judge_model_id);

}  // namespace memprobe
