#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace memprobe::prompts {

/// Prompt assets compiled from prompts/*.txt.
enum class PromptId {
    extraction,
    conflict_resolution,
    summarization,
    qa_with_memory,
    qa_without_memory,
    judge_relevance,
    judge_utilization,
    judge_failure,
    rerank_system,
    rerank_user,
};

inline constexpr PromptId kAllPrompts[] = {
    PromptId::extraction,      PromptId::conflict_resolution, PromptId::summarization,
    PromptId::qa_with_memory,  PromptId::qa_without_memory,   PromptId::judge_relevance,
    PromptId::judge_utilization, PromptId::judge_failure,     PromptId::rerank_system,
    PromptId::rerank_user,
};

std::string_view name(PromptId id);

/// Raw template text (asset file minus its final newline).
std::string_view text(PromptId id);

/// Named placeholders the template expects, e.g. {"conversation"}.
const std::vector<std::string>& placeholders(PromptId id);

/// Fills every placeholder. Missing or unexpected keys raise ArgumentError.
std::string render(PromptId id, const std::map<std::string, std::string>& values);

/// SHA-256 of the template text.
std::string digest(PromptId id);

/// {name: sha256} for every asset; recorded in run manifests.
nlohmann::json catalog_digests();

/// Which template a rendered prompt came from, judged by its fixed opening.
std::optional<PromptId> identify(std::string_view rendered);

}  // namespace memprobe::prompts
