#include "memprobe/write_strategies.hpp"

#include <algorithm>
#include <set>

#include <spdlog/spdlog.h>

#include "memprobe/errors.hpp"
#include "memprobe/prompts.hpp"
#include "memprobe/text.hpp"

namespace memprobe {

using nlohmann::json;
using prompts::PromptId;

json BuildLog::to_json() const {
    return {{"warnings", warnings}, {"extraction_errors", extraction_errors}, {"adds", adds},
            {"updates", updates},   {"noops", noops},                         {"fallbacks", fallbacks}};
}

std::string_view to_string(ResolutionAction a) {
    switch (a) {
        case ResolutionAction::add: return "ADD";
        case ResolutionAction::update: return "UPDATE";
        case ResolutionAction::noop: return "NOOP";
    }
    return "";
}

std::string render_session_lines(const Session& session) {
    std::vector<std::string> lines;
    for (const auto& t : session.turns) {
        lines.push_back(t.speaker + ": " + t.text);
    }
    return text::join(lines, "\n");
}

std::string render_chunk(const Session& session, std::size_t begin, std::size_t end) {
    std::vector<std::string> lines;
    for (auto i = begin; i < end; ++i) {
        const auto& t = session.turns[i];
        lines.push_back("[" + session.timestamp + "] " + t.speaker + ": " + t.text);
    }
    return text::join(lines, "\n");
}

std::string render_fact(const ExtractedFact& fact, const std::string& timestamp) {
    if (fact.speakers.empty()) {
        return fact.fact + " (" + timestamp + ")";
    }
    return fact.fact + " (about: " + text::join(fact.speakers, ", ") + "; " + timestamp + ")";
}

namespace {

std::vector<std::string> session_speakers(const Session& session) {
    std::vector<std::string> out;
    for (const auto& t : session.turns) {
        if (std::find(out.begin(), out.end(), t.speaker) == out.end()) {
            out.push_back(t.speaker);
        }
    }
    return out;
}

std::vector<std::string> session_turn_ids(const Session& session) {
    std::vector<std::string> out;
    for (const auto& t : session.turns) {
        out.push_back(t.turn_id);
    }
    return out;
}

void warn(BuildLog* log, std::vector<std::string>* sink, std::string message) {
    spdlog::warn("{}", message);
    if (sink) sink->push_back(message);
    if (log) log->warnings.push_back(std::move(message));
}

}  // namespace

MemoryStore write_basic_rag(const Conversation& conversation, llm::Gateway& gateway, const WriteOptions& options) {
    if (options.chunk_size < 1 || options.chunk_overlap < 0 || options.chunk_overlap >= options.chunk_size) {
        throw ArgumentError("chunking needs chunk_size >= 1 and 0 <= chunk_overlap < chunk_size");
    }
    const auto size = static_cast<std::size_t>(options.chunk_size);
    const auto stride = size - static_cast<std::size_t>(options.chunk_overlap);

    MemoryStore store(conversation.conversation_id, WriteStrategy::basic_rag);
    std::vector<MemoryEntry> pending;
    for (const auto& session : conversation.sessions) {
        const auto n = session.turns.size();
        for (std::size_t begin = 0; begin < n; begin += stride) {
            const auto end = std::min(begin + size, n);
            MemoryEntry e;
            e.conversation_id = conversation.conversation_id;
            e.strategy = WriteStrategy::basic_rag;
            e.content = render_chunk(session, begin, end);
            e.session_index = session.session_index;
            e.timestamp = session.timestamp;
            for (auto i = begin; i < end; ++i) {
                const auto& t = session.turns[i];
                e.source_turn_ids.push_back(t.turn_id);
                if (std::find(e.speakers.begin(), e.speakers.end(), t.speaker) == e.speakers.end()) {
                    e.speakers.push_back(t.speaker);
                }
            }
            pending.push_back(std::move(e));
            if (end == n) break;
        }
    }
    if (!pending.empty()) {
        std::vector<std::string> contents;
        for (const auto& e : pending) contents.push_back(e.content);
        auto vectors = gateway.embed(contents);
        for (std::size_t i = 0; i < pending.size(); ++i) {
            pending[i].embedding = std::move(vectors[i]);
            store.upsert_embedded(std::move(pending[i]), UpsertMode::add());
        }
    }
    return store;
}

ExtractionResult extract_facts(const Session& session, const std::vector<std::string>& conversation_speakers,
                               llm::Gateway& gateway, const WriteOptions& options) {
    if (session.turns.empty()) {
        throw ArgumentError("cannot extract facts from an empty session");
    }
    const auto prompt = prompts::render(
        PromptId::extraction, {{"conversation", "[" + session.timestamp + "]\n" + render_session_lines(session)}});
    const auto reply = gateway.chat(llm::user_request(options.model_id, prompt, true));

    json doc = json::parse(reply, nullptr, false);
    if (!doc.is_object() || !doc.contains("facts") || !doc.at("facts").is_array()) {
        throw StructuredOutputError("extraction reply for session " + std::to_string(session.session_index) +
                                    " has no \"facts\" list");
    }

    ExtractionResult result;
    const std::set<std::string> known(conversation_speakers.begin(), conversation_speakers.end());
    const auto& items = doc.at("facts");
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& item = items[i];
        const std::string where = "session " + std::to_string(session.session_index) + " fact " + std::to_string(i);
        if (!item.is_object() || !item.contains("fact") || !item.at("fact").is_string() ||
            text::trim(item.at("fact").get<std::string>()).empty()) {
            result.warnings.push_back(where + ": dropped, missing fact text");
            continue;
        }
        ExtractedFact fact;
        fact.fact = text::trim(item.at("fact").get<std::string>());

        const auto speakers = item.value("speakers", json::array());
        if (speakers.is_string()) {
            fact.speakers.push_back(speakers.get<std::string>());
        } else if (speakers.is_array() && std::all_of(speakers.begin(), speakers.end(),
                                                      [](const json& s) { return s.is_string(); })) {
            fact.speakers = speakers.get<std::vector<std::string>>();
        } else {
            result.warnings.push_back(where + ": dropped, speakers is not a list of names");
            continue;
        }

        const auto type = item.contains("type") && item.at("type").is_string()
                              ? parse_fact_type(item.at("type").get<std::string>())
                              : std::nullopt;
        if (!type) {
            result.warnings.push_back(where + ": dropped, type is missing or not a known fact type");
            continue;
        }
        fact.type = *type;

        for (const auto& s : fact.speakers) {
            if (!known.contains(s)) {
                result.warnings.push_back(where + ": speaker '" + s + "' is not a conversation speaker");
            }
        }
        result.facts.push_back(std::move(fact));
    }
    for (const auto& w : result.warnings) {
        spdlog::warn("{}", w);
    }
    return result;
}

Resolution resolve_fact(const MemoryStore& store, const ExtractedFact& fact, llm::Gateway& gateway,
                        const WriteOptions& options) {
    if (store.strategy() != WriteStrategy::extracted_facts) {
        throw ArgumentError("conflict resolution needs an extracted_facts store");
    }
    Resolution out;
    const auto query = gateway.embed_one(fact.fact);

    struct Candidate {
        std::size_t index;
        double similarity;
    };
    std::vector<Candidate> candidates;
    const auto& entries = store.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const double sim = llm::cosine_similarity(query, entries[i].embedding);
        if (sim >= options.conflict_threshold) {
            candidates.push_back({i, sim});
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.similarity > b.similarity; });
    if (candidates.size() > static_cast<std::size_t>(std::max(options.conflict_top_m, 0))) {
        candidates.resize(static_cast<std::size_t>(std::max(options.conflict_top_m, 0)));
    }
    if (candidates.empty()) {
        out.decision = {ResolutionAction::add, std::nullopt, "no similar memories"};
        return out;
    }

    std::vector<std::string> lines;
    std::set<std::string> candidate_ids;
    for (const auto& c : candidates) {
        const auto& e = entries[c.index];
        lines.push_back("[" + e.entry_id + "] " + e.content);
        candidate_ids.insert(e.entry_id);
    }
    const auto prompt = prompts::render(PromptId::conflict_resolution,
                                        {{"new_fact", fact.fact}, {"existing_memories", text::join(lines, "\n")}});
    out.chat_calls = 1;
    std::string reply;
    try {
        reply = gateway.chat(llm::user_request(options.model_id, prompt, true));
    } catch (const StructuredOutputError& e) {
        out.warnings.push_back(std::string("conflict resolution fell back to ADD: ") + e.what());
        out.decision = {ResolutionAction::add, std::nullopt, "fallback after invalid judge output"};
        return out;
    }

    const json doc = json::parse(reply, nullptr, false);
    const std::string action = doc.is_object() && doc.contains("action") && doc.at("action").is_string()
                                   ? text::trim(doc.at("action").get<std::string>())
                                   : std::string();
    std::string reason = doc.is_object() && doc.contains("reason") && doc.at("reason").is_string()
                             ? doc.at("reason").get<std::string>()
                             : std::string();
    std::string upper = action;
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });

    if (upper == "NOOP") {
        out.decision = {ResolutionAction::noop, std::nullopt, reason};
    } else if (upper == "UPDATE") {
        std::string target = doc.contains("target_id") && doc.at("target_id").is_string()
                                 ? text::trim(doc.at("target_id").get<std::string>())
                                 : std::string();
        if (!candidate_ids.contains(target)) {
            out.warnings.push_back("UPDATE target '" + target + "' is not a candidate; treating as ADD");
            out.decision = {ResolutionAction::add, std::nullopt, reason};
        } else {
            out.decision = {ResolutionAction::update, target, reason};
        }
    } else if (upper == "ADD") {
        out.decision = {ResolutionAction::add, std::nullopt, reason};
    } else {
        out.warnings.push_back("unrecognised conflict action '" + action + "'; treating as ADD");
        out.decision = {ResolutionAction::add, std::nullopt, reason};
    }
    for (const auto& w : out.warnings) {
        spdlog::warn("{}", w);
    }
    return out;
}

MemoryStore write_extracted_facts(const Conversation& conversation, llm::Gateway& gateway,
                                  const WriteOptions& options, BuildLog* log) {
    MemoryStore store(conversation.conversation_id, WriteStrategy::extracted_facts);
    for (const auto& session : conversation.sessions) {
        if (session.turns.empty()) continue;
        ExtractionResult extraction;
        store.add_write_llm_calls(1);
        try {
            extraction = extract_facts(session, conversation.speakers, gateway, options);
        } catch (const FixtureMissingError&) {
            throw;
        } catch (const ProviderError& e) {
            if (log) ++log->extraction_errors;
            warn(log, nullptr,
                 "session " + std::to_string(session.session_index) + ": extraction failed: " + e.what());
            continue;
        }
        if (log) {
            log->warnings.insert(log->warnings.end(), extraction.warnings.begin(), extraction.warnings.end());
        }
        for (const auto& fact : extraction.facts) {
            auto resolution = resolve_fact(store, fact, gateway, options);
            store.add_write_llm_calls(resolution.chat_calls);
            if (log) {
                log->warnings.insert(log->warnings.end(), resolution.warnings.begin(), resolution.warnings.end());
            }
            if (resolution.decision.action == ResolutionAction::noop) {
                if (log) ++log->noops;
                continue;
            }
            MemoryEntry e;
            e.conversation_id = conversation.conversation_id;
            e.strategy = WriteStrategy::extracted_facts;
            e.content = render_fact(fact, session.timestamp);
            e.session_index = session.session_index;
            e.timestamp = session.timestamp;
            e.speakers = fact.speakers;
            e.fact_type = fact.type;
            e.source_turn_ids = session_turn_ids(session);
            if (resolution.decision.action == ResolutionAction::update) {
                store.upsert(std::move(e), UpsertMode::update(*resolution.decision.target_id), gateway);
                if (log) ++log->updates;
            } else {
                store.upsert(std::move(e), UpsertMode::add(), gateway);
                if (log) ++log->adds;
            }
        }
    }
    return store;
}

MemoryStore write_summarized_episodes(const Conversation& conversation, llm::Gateway& gateway,
                                      const WriteOptions& options, BuildLog* log) {
    MemoryStore store(conversation.conversation_id, WriteStrategy::summarized_episodes);
    for (const auto& session : conversation.sessions) {
        MemoryEntry e;
        e.conversation_id = conversation.conversation_id;
        e.strategy = WriteStrategy::summarized_episodes;
        e.session_index = session.session_index;
        e.timestamp = session.timestamp;
        e.speakers = session_speakers(session);
        e.source_turn_ids = session_turn_ids(session);

        const auto prompt = prompts::render(
            PromptId::summarization, {{"timestamp", session.timestamp}, {"conversation", render_session_lines(session)}});
        store.add_write_llm_calls(1);
        try {
            e.content = text::trim(gateway.chat(llm::user_request(options.model_id, prompt, false)));
        } catch (const FixtureMissingError&) {
            throw;
        } catch (const ProviderError& ex) {
            warn(log, nullptr,
                 "session " + std::to_string(session.session_index) + ": summarization failed: " + ex.what());
        }
        if (e.content.empty()) {
            e.content = render_chunk(session, 0, session.turns.size());
            e.fallback = true;
            if (log) ++log->fallbacks;
        }
        store.upsert(std::move(e), UpsertMode::add(), gateway);
    }
    return store;
}

MemoryStore build_store(WriteStrategy strategy, const Conversation& conversation, llm::Gateway& gateway,
                        const WriteOptions& options, BuildLog* log) {
    switch (strategy) {
        case WriteStrategy::basic_rag: return write_basic_rag(conversation, gateway, options);
        case WriteStrategy::extracted_facts: return write_extracted_facts(conversation, gateway, options, log);
        case WriteStrategy::summarized_episodes:
            return write_summarized_episodes(conversation, gateway, options, log);
    }
    throw ArgumentError("unknown write strategy");
}

}  // namespace memprobe
