#pragma once

#include <map>
#include <mutex>
#include <string>

#include "memprobe/llm/providers.hpp"
#include "memprobe/prompts.hpp"

namespace memprobe::llm {

/// Offline chat provider that answers every harness prompt by reading the
/// rendered prompt itself. On synthetic corpora it is an oracle: it answers
/// a question exactly when the planted "<key> means <VALUE>" statement is in
/// the prompt, and judges by string containment of the gold answer.
class OracleMockProvider : public ChatProvider {
  public:
    std::string complete(const ChatRequest& request) override;

    /// Calls per prompt name; unrecognized prompts count under "unknown".
    std::map<std::string, int> calls_by_prompt() const;
    int calls() const;

  private:
    mutable std::mutex mutex_;
    std::map<std::string, int> calls_;
};

inline constexpr const char* kNoInformationAnswer = "I don't have enough information to answer this question.";

}  // namespace memprobe::llm
