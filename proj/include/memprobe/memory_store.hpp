#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "memprobe/llm/types.hpp"

namespace memprobe {

namespace llm {
class Gateway;
}

enum class WriteStrategy { basic_rag, extracted_facts, summarized_episodes };

inline constexpr WriteStrategy kAllStrategies[] = {WriteStrategy::basic_rag, WriteStrategy::extracted_facts,
                                                   WriteStrategy::summarized_episodes};

std::string_view to_string(WriteStrategy s);
WriteStrategy parse_write_strategy(std::string_view s);

enum class FactType { event, preference, relationship, plan, personal_detail, opinion };

std::string_view to_string(FactType t);
std::optional<FactType> parse_fact_type(std::string_view s);

struct MemoryEntry {
    std::string entry_id;
    std::string conversation_id;
    WriteStrategy strategy = WriteStrategy::basic_rag;
    std::string content;
    int session_index = 1;
    std::string timestamp;
    std::vector<std::string> speakers;
    std::optional<FactType> fact_type;
    std::vector<std::string> source_turn_ids;
    llm::EmbeddingVector embedding;
    /// Summary entries whose chat call failed hold the raw session instead.
    bool fallback = false;

    bool operator==(const MemoryEntry&) const = default;
};

nlohmann::json to_json(const MemoryEntry& e);
MemoryEntry memory_entry_from_json(const nlohmann::json& j);

/// How an entry enters the store. NOOP decisions never reach the store.
struct UpsertMode {
    enum class Kind { add, update } kind = Kind::add;
    std::string target_id;

    static UpsertMode add() { return {}; }
    static UpsertMode update(std::string target) { return {Kind::update, std::move(target)}; }
};

/// Strategy-homogeneous, append/replace-only collection of memories for one
/// conversation. Entry order is insertion order; the position of an entry is
/// its sequence number for tie-breaking.
class MemoryStore {
  public:
    MemoryStore(std::string conversation_id, WriteStrategy strategy);

    const std::string& conversation_id() const { return conversation_id_; }
    WriteStrategy strategy() const { return strategy_; }
    const std::vector<MemoryEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    int write_llm_calls() const { return write_llm_calls_; }
    void add_write_llm_calls(int n) { write_llm_calls_ += n; }

    const MemoryEntry& at(std::string_view entry_id) const;
    std::optional<std::size_t> index_of(std::string_view entry_id) const;

    /// add: appends with id "{strategy}:{conversation_id}:{sequence}".
    /// update: replaces content and metadata of the target, keeping its id and
    /// position. The entry's embedding is recomputed from its content through
    /// `gateway`. Returns the affected entry id.
    std::string upsert(MemoryEntry entry, const UpsertMode& mode, llm::Gateway& gateway);

    /// Same as upsert but trusts the embedding already on `entry`.
    std::string upsert_embedded(MemoryEntry entry, const UpsertMode& mode);

    /// Writes `path` (one entry per line) and the sidecar `path.meta.json`.
    void save(const std::filesystem::path& path) const;
    static MemoryStore load(const std::filesystem::path& path);

    bool operator==(const MemoryStore&) const = default;

  private:
    void check(const MemoryEntry& entry) const;

    std::string conversation_id_;
    WriteStrategy strategy_;
    std::vector<MemoryEntry> entries_;
    std::size_t next_sequence_ = 0;
    int write_llm_calls_ = 0;
};

/// memory/{conversation_id}/{strategy}.jsonl under `root`.
std::filesystem::path store_path(const std::filesystem::path& root, std::string_view conversation_id,
                                 WriteStrategy strategy);

}  // namespace memprobe
