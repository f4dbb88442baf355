#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace memprobe {

struct Turn {
    std::string turn_id;
    std::string speaker;
    std::string text;
    int session_index = 1;

    bool operator==(const Turn&) const = default;
};

struct Session {
    int session_index = 1;
    std::string timestamp;
    std::vector<Turn> turns;

    bool operator==(const Session&) const = default;
};

/// A dyadic multi-session dialogue. `speakers` holds exactly two names in
/// declaration order.
struct Conversation {
    std::string conversation_id;
    std::vector<std::string> speakers;
    std::vector<Session> sessions;

    std::size_t turn_count() const;
    bool operator==(const Conversation&) const = default;
};

enum class QuestionCategory { single_hop, multi_hop, temporal, open_domain, adversarial };

std::string_view to_string(QuestionCategory c);
QuestionCategory parse_question_category(std::string_view s);

struct QAItem {
    std::string question_id;
    std::string conversation_id;
    std::string question;
    std::string gold_answer;
    QuestionCategory category = QuestionCategory::single_hop;
    std::optional<std::vector<std::string>> evidence_turn_ids;

    bool operator==(const QAItem&) const = default;
};

struct CorpusRecord {
    Conversation conversation;
    std::vector<QAItem> qa;

    bool operator==(const CorpusRecord&) const = default;
};

using Corpus = std::vector<CorpusRecord>;

enum class CorpusFormat { normalized, locomo_adapter };

CorpusFormat parse_corpus_format(std::string_view s);

/// Loads a corpus file. The normalized format is either a single conversation
/// object or an array of them; the adapter accepts the LoCoMo release layout
/// (`session_N` / `session_N_date_time` keys). Schema violations raise
/// ParseError naming the field and record index; a QA item pointing at an
/// unknown conversation raises IntegrityError.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);

Corpus parse_normalized_corpus(const nlohmann::json& doc);
Corpus parse_locomo_corpus(const nlohmann::json& doc);

/// Normalized-format serialization; always an array of conversations.
nlohmann::json corpus_to_json(const Corpus& corpus);

/// Checks the Turn/Session/Conversation invariants; throws ParseError.
void validate(const Conversation& conversation);

std::vector<QAItem> filter_adversarial(const std::vector<QAItem>& items);

/// Synthetic corpora with planted key/value evidence for offline oracle runs.
/// Each question asks for the value bound to a key; the value is a 12-char
/// uppercase alphanumeric token that appears in exactly one turn.
namespace synthetic {

struct Options {
    std::uint64_t seed = 1;
    int n_sessions = 3;
    int turns_per_session = 9;
    int n_questions = 9;
};

CorpusRecord generate(const Options& options);

/// Key mentioned in a synthetic question, or nullopt for other questions.
std::optional<std::string> question_key(std::string_view question);

/// Value bound to `key` anywhere in `text` ("<key> means <VALUE>").
std::optional<std::string> find_value(std::string_view text, std::string_view key);

}  // namespace synthetic

}  // namespace memprobe
