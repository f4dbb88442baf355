#pragma once

#include <optional>
#include <string>
#include <vector>

#include "memprobe/corpus.hpp"
#include "memprobe/llm/gateway.hpp"
#include "memprobe/memory_store.hpp"

namespace memprobe {

struct WriteOptions {
    std::string model_id = "gpt-5-mini";
    int chunk_size = 3;
    int chunk_overlap = 0;
    int conflict_top_m = 5;
    double conflict_threshold = 0.5;
};

/// Non-fatal events collected while building a store.
struct BuildLog {
    std::vector<std::string> warnings;
    int extraction_errors = 0;
    int adds = 0;
    int updates = 0;
    int noops = 0;
    int fallbacks = 0;

    nlohmann::json to_json() const;
};

struct ExtractedFact {
    std::string fact;
    std::vector<std::string> speakers;
    FactType type = FactType::event;

    bool operator==(const ExtractedFact&) const = default;
};

struct ExtractionResult {
    std::vector<ExtractedFact> facts;
    std::vector<std::string> warnings;
};

enum class ResolutionAction { add, update, noop };

std::string_view to_string(ResolutionAction a);

struct ResolutionDecision {
    ResolutionAction action = ResolutionAction::add;
    std::optional<std::string> target_id;  // set iff action == update
    std::string reason;
};

struct Resolution {
    ResolutionDecision decision;
    int chat_calls = 0;
    std::vector<std::string> warnings;
};

/// "{speaker}: {text}" lines.
std::string render_session_lines(const Session& session);

/// Chunk rendering: "[{timestamp}] {speaker}: {text}" lines.
std::string render_chunk(const Session& session, std::size_t begin, std::size_t end);

/// Fact rendering used as retrieval content.
std::string render_fact(const ExtractedFact& fact, const std::string& timestamp);

/// Raw 3-turn windows per session (configurable size/overlap). No chat calls.
MemoryStore write_basic_rag(const Conversation& conversation, llm::Gateway& gateway, const WriteOptions& options = {});

/// One json-mode extraction call for the session. Malformed list items are
/// dropped with a warning; a reply without a usable "facts" list raises
/// StructuredOutputError.
ExtractionResult extract_facts(const Session& session, const std::vector<std::string>& conversation_speakers,
                               llm::Gateway& gateway, const WriteOptions& options = {});

/// Embedding-matched candidates plus one conflict-resolution call. An empty
/// candidate set short-circuits to ADD without a call.
Resolution resolve_fact(const MemoryStore& store, const ExtractedFact& fact, llm::Gateway& gateway,
                        const WriteOptions& options = {});

MemoryStore write_extracted_facts(const Conversation& conversation, llm::Gateway& gateway,
                                  const WriteOptions& options = {}, BuildLog* log = nullptr);

MemoryStore write_summarized_episodes(const Conversation& conversation, llm::Gateway& gateway,
                                      const WriteOptions& options = {}, BuildLog* log = nullptr);

MemoryStore build_store(WriteStrategy strategy, const Conversation& conversation, llm::Gateway& gateway,
                        const WriteOptions& options = {}, BuildLog* log = nullptr);

}  // namespace memprobe
