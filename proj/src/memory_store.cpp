#include "memprobe/memory_store.hpp"

#include <map>
#include <set>

#include "memprobe/errors.hpp"
#include "memprobe/io.hpp"
#include "memprobe/llm/gateway.hpp"
#include "memprobe/text.hpp"

namespace memprobe {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(WriteStrategy s) {
    switch (s) {
        case WriteStrategy::basic_rag: return "basic_rag";
        case WriteStrategy::extracted_facts: return "extracted_facts";
        case WriteStrategy::summarized_episodes: return "summarized_episodes";
    }
    return "";
}

WriteStrategy parse_write_strategy(std::string_view s) {
    for (auto w : kAllStrategies) {
        if (to_string(w) == s) return w;
    }
    throw ArgumentError("unknown write strategy '" + std::string(s) + "'");
}

std::string_view to_string(FactType t) {
    switch (t) {
        case FactType::event: return "event";
        case FactType::preference: return "preference";
        case FactType::relationship: return "relationship";
        case FactType::plan: return "plan";
        case FactType::personal_detail: return "personal_detail";
        case FactType::opinion: return "opinion";
    }
    return "";
}

std::optional<FactType> parse_fact_type(std::string_view s) {
    static const std::map<std::string, FactType, std::less<>> names = {
        {"event", FactType::event}, {"preference", FactType::preference}, {"relationship", FactType::relationship},
        {"plan", FactType::plan},   {"personal_detail", FactType::personal_detail}, {"opinion", FactType::opinion},
    };
    auto it = names.find(text::to_lower(s));
    if (it == names.end()) return std::nullopt;
    return it->second;
}

json to_json(const MemoryEntry& e) {
    return {{"entry_id", e.entry_id},
            {"conversation_id", e.conversation_id},
            {"strategy", to_string(e.strategy)},
            {"content", e.content},
            {"session_index", e.session_index},
            {"timestamp", e.timestamp},
            {"speakers", e.speakers},
            {"fact_type", e.fact_type ? json(to_string(*e.fact_type)) : json(nullptr)},
            {"source_turn_ids", e.source_turn_ids},
            {"embedding", e.embedding.values},
            {"fallback", e.fallback}};
}

MemoryEntry memory_entry_from_json(const json& j) {
    MemoryEntry e;
    e.entry_id = j.at("entry_id").get<std::string>();
    e.conversation_id = j.at("conversation_id").get<std::string>();
    e.strategy = parse_write_strategy(j.at("strategy").get<std::string>());
    e.content = j.at("content").get<std::string>();
    e.session_index = j.at("session_index").get<int>();
    e.timestamp = j.at("timestamp").get<std::string>();
    e.speakers = j.at("speakers").get<std::vector<std::string>>();
    if (j.contains("fact_type") && !j.at("fact_type").is_null()) {
        auto t = parse_fact_type(j.at("fact_type").get<std::string>());
        if (!t) throw ParseError("unknown fact_type " + j.at("fact_type").dump());
        e.fact_type = *t;
    }
    e.source_turn_ids = j.at("source_turn_ids").get<std::vector<std::string>>();
    e.embedding = llm::make_embedding(j.at("embedding").get<std::vector<double>>());
    e.fallback = j.value("fallback", false);
    return e;
}

MemoryStore::MemoryStore(std::string conversation_id, WriteStrategy strategy)
    : conversation_id_(std::move(conversation_id)), strategy_(strategy) {}

const MemoryEntry& MemoryStore::at(std::string_view entry_id) const {
    if (auto i = index_of(entry_id)) {
        return entries_[*i];
    }
    throw NotFoundError("no memory entry '" + std::string(entry_id) + "'");
}

std::optional<std::size_t> MemoryStore::index_of(std::string_view entry_id) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].entry_id == entry_id) return i;
    }
    return std::nullopt;
}

void MemoryStore::check(const MemoryEntry& entry) const {
    if (text::trim(entry.content).empty()) {
        throw ArgumentError("memory content must be non-empty");
    }
    if (entry.strategy != strategy_) {
        throw ArgumentError("store holds " + std::string(to_string(strategy_)) + " entries, got " +
                            std::string(to_string(entry.strategy)));
    }
    if (entry.fact_type.has_value() != (strategy_ == WriteStrategy::extracted_facts)) {
        throw ArgumentError("fact_type must be set exactly for extracted_facts entries");
    }
}

std::string MemoryStore::upsert(MemoryEntry entry, const UpsertMode& mode, llm::Gateway& gateway) {
    check(entry);
    if (mode.kind == UpsertMode::Kind::update && !index_of(mode.target_id)) {
        throw NotFoundError("update target '" + mode.target_id + "' is not in the store");
    }
    entry.embedding = gateway.embed_one(entry.content);
    return upsert_embedded(std::move(entry), mode);
}

std::string MemoryStore::upsert_embedded(MemoryEntry entry, const UpsertMode& mode) {
    check(entry);
    entry.conversation_id = conversation_id_;
    if (mode.kind == UpsertMode::Kind::add) {
        entry.entry_id = std::string(to_string(strategy_)) + ":" + conversation_id_ + ":" +
                         std::to_string(next_sequence_++);
        entries_.push_back(std::move(entry));
        return entries_.back().entry_id;
    }
    auto idx = index_of(mode.target_id);
    if (!idx) {
        throw NotFoundError("update target '" + mode.target_id + "' is not in the store");
    }
    entry.entry_id = mode.target_id;
    entries_[*idx] = std::move(entry);
    return mode.target_id;
}

namespace {

fs::path meta_path(const fs::path& path) {
    auto p = path;
    p += ".meta.json";
    return p;
}

}  // namespace

void MemoryStore::save(const fs::path& path) const {
    std::string body;
    for (const auto& e : entries_) {
        body += to_json(e).dump();
        body += '\n';
    }
    json meta = {{"conversation_id", conversation_id_},
                 {"strategy", to_string(strategy_)},
                 {"entries", entries_.size()},
                 {"next_sequence", next_sequence_},
                 {"write_llm_calls", write_llm_calls_}};
    io::write_file_atomic(path, body);
    io::write_file_atomic(meta_path(path), meta.dump(2) + "\n");
}

MemoryStore MemoryStore::load(const fs::path& path) {
    json meta;
    try {
        meta = json::parse(io::read_file(meta_path(path)));
    } catch (const json::exception& e) {
        throw ParseError(meta_path(path).string() + ": " + e.what());
    }
    MemoryStore store(meta.at("conversation_id").get<std::string>(),
                      parse_write_strategy(meta.at("strategy").get<std::string>()));
    store.write_llm_calls_ = meta.value("write_llm_calls", 0);

    const auto lines = io::read_jsonl(path);
    std::set<std::string> ids;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        MemoryEntry e;
        try {
            e = memory_entry_from_json(lines[i]);
        } catch (const std::exception& ex) {
            throw ParseError(path.string() + ": entry " + std::to_string(i + 1) + ": " + ex.what());
        }
        store.check(e);
        if (!ids.insert(e.entry_id).second) {
            throw ParseError(path.string() + ": duplicate entry_id '" + e.entry_id + "'");
        }
        store.entries_.push_back(std::move(e));
    }
    store.next_sequence_ = meta.value("next_sequence", store.entries_.size());
    if (meta.value("entries", store.entries_.size()) != store.entries_.size()) {
        throw ParseError(path.string() + ": entry count does not match " + meta_path(path).string());
    }
    return store;
}

fs::path store_path(const fs::path& root, std::string_view conversation_id, WriteStrategy strategy) {
    return root / "memory" / std::string(conversation_id) / (std::string(to_string(strategy)) + ".jsonl");
}

}  // namespace memprobe
