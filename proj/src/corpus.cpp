#include "memprobe/corpus.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>

#include "memprobe/errors.hpp"
#include "memprobe/io.hpp"
#include "memprobe/text.hpp"

namespace memprobe {

using nlohmann::json;

std::size_t Conversation::turn_count() const {
    std::size_t n = 0;
    for (const auto& s : sessions) {
        n += s.turns.size();
    }
    return n;
}

std::string_view to_string(QuestionCategory c) {
    switch (c) {
        case QuestionCategory::single_hop: return "single_hop";
        case QuestionCategory::multi_hop: return "multi_hop";
        case QuestionCategory::temporal: return "temporal";
        case QuestionCategory::open_domain: return "open_domain";
        case QuestionCategory::adversarial: return "adversarial";
    }
    return "single_hop";
}

QuestionCategory parse_question_category(std::string_view s) {
    static const std::map<std::string, QuestionCategory, std::less<>> names = {
        {"single_hop", QuestionCategory::single_hop},   {"multi_hop", QuestionCategory::multi_hop},
        {"temporal", QuestionCategory::temporal},       {"open_domain", QuestionCategory::open_domain},
        {"adversarial", QuestionCategory::adversarial},
    };
    auto it = names.find(s);
    if (it == names.end()) {
        throw ParseError("unknown question category '" + std::string(s) + "'");
    }
    return it->second;
}

CorpusFormat parse_corpus_format(std::string_view s) {
    if (s == "normalized") return CorpusFormat::normalized;
    if (s == "locomo" || s == "locomo_adapter") return CorpusFormat::locomo_adapter;
    throw ArgumentError("unknown corpus format '" + std::string(s) + "'");
}

namespace {

// Field access with error messages that name the JSON path.
class Cursor {
  public:
    Cursor(const json& node, std::string path) : node_(node), path_(std::move(path)) {}

    const json& node() const { return node_; }
    const std::string& path() const { return path_; }

    [[noreturn]] void fail(const std::string& field, const std::string& what) const {
        throw ParseError(path_ + "." + field + ": " + what);
    }

    bool has(const char* field) const { return node_.is_object() && node_.contains(field); }

    std::string string(const char* field) const {
        if (!has(field)) fail(field, "missing field");
        const auto& v = node_.at(field);
        if (!v.is_string()) fail(field, "expected string");
        return v.get<std::string>();
    }

    std::optional<std::string> optional_string(const char* field) const {
        if (!has(field) || node_.at(field).is_null()) return std::nullopt;
        return string(field);
    }

    const json& array(const char* field) const {
        if (!has(field)) fail(field, "missing field");
        const auto& v = node_.at(field);
        if (!v.is_array()) fail(field, "expected array");
        return v;
    }

    std::vector<std::string> string_list(const char* field) const {
        std::vector<std::string> out;
        const auto& arr = array(field);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            if (!arr[i].is_string()) fail(std::string(field) + "[" + std::to_string(i) + "]", "expected string");
            out.push_back(arr[i].get<std::string>());
        }
        return out;
    }

    Cursor child(const json& sub, const std::string& suffix) const { return Cursor(sub, path_ + suffix); }

  private:
    const json& node_;
    std::string path_;
};

std::string default_turn_id(const std::string& conversation_id, int session_index, std::size_t position) {
    return conversation_id + ":" + std::to_string(session_index) + ":" + std::to_string(position);
}

// Sorts sessions, checks contiguity and propagates session_index into turns.
void finalize_sessions(Conversation& conv, const std::string& path) {
    std::stable_sort(conv.sessions.begin(), conv.sessions.end(),
                     [](const Session& a, const Session& b) { return a.session_index < b.session_index; });
    for (std::size_t i = 0; i < conv.sessions.size(); ++i) {
        auto& s = conv.sessions[i];
        if (s.session_index != static_cast<int>(i) + 1) {
            throw ParseError(path + ".sessions: session_index values must be contiguous from 1 (found " +
                             std::to_string(s.session_index) + " at position " + std::to_string(i + 1) + ")");
        }
        for (auto& t : s.turns) {
            t.session_index = s.session_index;
        }
    }
}

// Moves QA items to the record owning their conversation_id.
Corpus attach_qa(std::vector<Conversation> conversations, std::vector<QAItem> items) {
    Corpus corpus;
    std::map<std::string, std::size_t> index;
    for (auto& c : conversations) {
        if (!index.emplace(c.conversation_id, corpus.size()).second) {
            throw IntegrityError("duplicate conversation_id '" + c.conversation_id + "'");
        }
        corpus.push_back({std::move(c), {}});
    }
    std::set<std::string> seen_questions;
    for (auto& q : items) {
        auto it = index.find(q.conversation_id);
        if (it == index.end()) {
            throw IntegrityError("question '" + q.question_id + "' references unknown conversation_id '" +
                                 q.conversation_id + "'");
        }
        if (!seen_questions.insert(q.question_id).second) {
            throw IntegrityError("duplicate question_id '" + q.question_id + "'");
        }
        corpus[it->second].qa.push_back(std::move(q));
    }
    return corpus;
}

}  // namespace

void validate(const Conversation& conv) {
    const std::string where = "conversation '" + conv.conversation_id + "'";
    if (conv.conversation_id.empty()) {
        throw ParseError("conversation_id must be non-empty");
    }
    if (conv.speakers.size() != 2 || conv.speakers[0] == conv.speakers[1]) {
        throw ParseError(where + ": speakers must name exactly two distinct people");
    }
    if (conv.sessions.empty()) {
        throw ParseError(where + ": no sessions");
    }
    std::set<std::string> ids;
    for (std::size_t i = 0; i < conv.sessions.size(); ++i) {
        const auto& s = conv.sessions[i];
        const std::string sw = where + " session " + std::to_string(s.session_index);
        if (s.session_index != static_cast<int>(i) + 1) {
            throw ParseError(where + ": session indices must be contiguous from 1");
        }
        if (s.turns.empty()) {
            throw ParseError(sw + ": no turns");
        }
        for (const auto& t : s.turns) {
            if (text::trim(t.text).empty()) {
                throw ParseError(sw + " turn '" + t.turn_id + "': text is empty");
            }
            if (t.speaker != conv.speakers[0] && t.speaker != conv.speakers[1]) {
                throw ParseError(sw + " turn '" + t.turn_id + "': speaker '" + t.speaker +
                                 "' is not a declared speaker");
            }
            if (!ids.insert(t.turn_id).second) {
                throw ParseError(sw + ": duplicate turn_id '" + t.turn_id + "'");
            }
        }
    }
}

Corpus parse_normalized_corpus(const json& doc) {
    std::vector<json> records;
    if (doc.is_array()) {
        records.assign(doc.begin(), doc.end());
    } else if (doc.is_object()) {
        records.push_back(doc);
    } else {
        throw ParseError("corpus document must be an object or an array of objects");
    }

    std::vector<Conversation> conversations;
    std::vector<QAItem> items;
    for (std::size_t r = 0; r < records.size(); ++r) {
        Cursor rec(records[r], "record[" + std::to_string(r) + "]");
        if (!rec.node().is_object()) {
            throw ParseError(rec.path() + ": expected object");
        }
        Conversation conv;
        conv.conversation_id = rec.string("conversation_id");
        conv.speakers = rec.string_list("speakers");

        const auto& sessions = rec.array("sessions");
        for (std::size_t si = 0; si < sessions.size(); ++si) {
            auto sc = rec.child(sessions[si], ".sessions[" + std::to_string(si) + "]");
            Session session;
            if (sc.has("session_index")) {
                const auto& v = sc.node().at("session_index");
                if (!v.is_number_integer()) sc.fail("session_index", "expected integer");
                session.session_index = v.get<int>();
            } else {
                session.session_index = static_cast<int>(si) + 1;
            }
            session.timestamp = sc.string("timestamp");
            const auto& turns = sc.array("turns");
            for (std::size_t ti = 0; ti < turns.size(); ++ti) {
                auto tc = sc.child(turns[ti], ".turns[" + std::to_string(ti) + "]");
                Turn t;
                t.speaker = tc.string("speaker");
                t.text = tc.string("text");
                t.turn_id = tc.optional_string("turn_id")
                                .value_or(default_turn_id(conv.conversation_id, session.session_index, ti + 1));
                session.turns.push_back(std::move(t));
            }
            conv.sessions.push_back(std::move(session));
        }
        finalize_sessions(conv, rec.path());
        try {
            validate(conv);
        } catch (const ParseError& e) {
            throw ParseError(rec.path() + ": " + e.what());
        }

        if (rec.has("qa")) {
            const auto& qa = rec.array("qa");
            for (std::size_t qi = 0; qi < qa.size(); ++qi) {
                auto qc = rec.child(qa[qi], ".qa[" + std::to_string(qi) + "]");
                QAItem item;
                item.question_id = qc.string("question_id");
                item.conversation_id = qc.optional_string("conversation_id").value_or(conv.conversation_id);
                item.question = qc.string("question");
                item.gold_answer = qc.string("answer");
                try {
                    item.category = parse_question_category(qc.string("category"));
                } catch (const ParseError& e) {
                    qc.fail("category", e.what());
                }
                if (qc.has("evidence") && !qc.node().at("evidence").is_null()) {
                    item.evidence_turn_ids = qc.string_list("evidence");
                }
                items.push_back(std::move(item));
            }
        }
        conversations.push_back(std::move(conv));
    }
    return attach_qa(std::move(conversations), std::move(items));
}

namespace {

// Numeric LoCoMo categories as used by the public release and its
// evaluation scripts.
QuestionCategory locomo_category(const json& v, const Cursor& qc) {
    if (v.is_number_integer()) {
        switch (v.get<int>()) {
            case 1: return QuestionCategory::multi_hop;
            case 2: return QuestionCategory::temporal;
            case 3: return QuestionCategory::open_domain;
            case 4: return QuestionCategory::single_hop;
            case 5: return QuestionCategory::adversarial;
            default: qc.fail("category", "unknown LoCoMo category " + v.dump());
        }
    }
    if (v.is_string()) {
        return parse_question_category(v.get<std::string>());
    }
    qc.fail("category", "expected integer or string");
}

std::string scalar_text(const json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
}

std::vector<std::string> locomo_evidence(const json& v) {
    std::vector<std::string> out;
    auto add = [&](const std::string& s) {
        std::size_t start = 0;
        while (start <= s.size()) {
            auto end = s.find(';', start);
            auto piece = text::trim(s.substr(start, end == std::string::npos ? std::string::npos : end - start));
            if (!piece.empty()) out.push_back(piece);
            if (end == std::string::npos) break;
            start = end + 1;
        }
    };
    if (v.is_array()) {
        for (const auto& e : v) {
            if (e.is_string()) add(e.get<std::string>());
        }
    } else if (v.is_string()) {
        add(v.get<std::string>());
    }
    return out;
}

}  // namespace

Corpus parse_locomo_corpus(const json& doc) {
    std::vector<json> samples;
    if (doc.is_array()) {
        samples.assign(doc.begin(), doc.end());
    } else if (doc.is_object()) {
        samples.push_back(doc);
    } else {
        throw ParseError("LoCoMo document must be an object or an array of samples");
    }

    static const std::regex session_key(R"(^session_(\d+)$)");
    std::vector<Conversation> conversations;
    std::vector<QAItem> items;
    for (std::size_t r = 0; r < samples.size(); ++r) {
        Cursor rec(samples[r], "sample[" + std::to_string(r) + "]");
        Conversation conv;
        conv.conversation_id = rec.has("sample_id") ? scalar_text(rec.node().at("sample_id"))
                                                    : "conv-" + std::to_string(r);
        if (!rec.has("conversation") || !rec.node().at("conversation").is_object()) {
            rec.fail("conversation", "missing object");
        }
        auto cc = rec.child(rec.node().at("conversation"), ".conversation");
        conv.speakers = {cc.string("speaker_a"), cc.string("speaker_b")};

        std::map<int, const json*> raw_sessions;
        for (const auto& [key, value] : cc.node().items()) {
            std::smatch m;
            if (std::regex_match(key, m, session_key)) {
                if (!value.is_array()) cc.fail(key, "expected array of turns");
                raw_sessions[std::stoi(m[1].str())] = &value;
            }
        }
        // Sessions are renumbered contiguously in N order; empty ones are dropped.
        int next_index = 1;
        for (const auto& [n, turns] : raw_sessions) {
            if (turns->empty()) continue;
            Session session;
            session.session_index = next_index++;
            const std::string date_key = "session_" + std::to_string(n) + "_date_time";
            session.timestamp = cc.has(date_key.c_str()) ? scalar_text(cc.node().at(date_key)) : "";
            for (std::size_t ti = 0; ti < turns->size(); ++ti) {
                auto tc = cc.child((*turns)[ti], ".session_" + std::to_string(n) + "[" + std::to_string(ti) + "]");
                Turn t;
                t.speaker = tc.string("speaker");
                t.text = tc.string("text");
                if (auto caption = tc.optional_string("blip_caption")) {
                    t.text = text::trim(t.text + " [shares an image: " + *caption + "]");
                }
                t.turn_id = tc.optional_string("dia_id")
                                .value_or(default_turn_id(conv.conversation_id, session.session_index, ti + 1));
                session.turns.push_back(std::move(t));
            }
            conv.sessions.push_back(std::move(session));
        }
        finalize_sessions(conv, rec.path());
        try {
            validate(conv);
        } catch (const ParseError& e) {
            throw ParseError(rec.path() + ": " + e.what());
        }

        if (rec.has("qa")) {
            const auto& qa = rec.array("qa");
            for (std::size_t qi = 0; qi < qa.size(); ++qi) {
                auto qc = rec.child(qa[qi], ".qa[" + std::to_string(qi) + "]");
                QAItem item;
                item.conversation_id = conv.conversation_id;
                item.question_id = qc.optional_string("question_id")
                                       .value_or(conv.conversation_id + ":q" + std::to_string(qi + 1));
                item.question = qc.string("question");
                if (!qc.has("category")) qc.fail("category", "missing field");
                item.category = locomo_category(qc.node().at("category"), qc);
                if (qc.has("answer")) {
                    item.gold_answer = scalar_text(qc.node().at("answer"));
                } else if (qc.has("adversarial_answer")) {
                    item.gold_answer = scalar_text(qc.node().at("adversarial_answer"));
                } else {
                    qc.fail("answer", "missing field");
                }
                if (qc.has("evidence")) {
                    item.evidence_turn_ids = locomo_evidence(qc.node().at("evidence"));
                }
                items.push_back(std::move(item));
            }
        }
        conversations.push_back(std::move(conv));
    }
    return attach_qa(std::move(conversations), std::move(items));
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
    json doc;
    try {
        doc = json::parse(io::read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return format == CorpusFormat::normalized ? parse_normalized_corpus(doc) : parse_locomo_corpus(doc);
}

json corpus_to_json(const Corpus& corpus) {
    json out = json::array();
    for (const auto& rec : corpus) {
        const auto& conv = rec.conversation;
        json sessions = json::array();
        for (const auto& s : conv.sessions) {
            json turns = json::array();
            for (const auto& t : s.turns) {
                turns.push_back({{"turn_id", t.turn_id}, {"speaker", t.speaker}, {"text", t.text}});
            }
            sessions.push_back({{"session_index", s.session_index}, {"timestamp", s.timestamp}, {"turns", turns}});
        }
        json qa = json::array();
        for (const auto& q : rec.qa) {
            json item = {{"question_id", q.question_id},
                         {"question", q.question},
                         {"answer", q.gold_answer},
                         {"category", to_string(q.category)}};
            if (q.conversation_id != conv.conversation_id) {
                item["conversation_id"] = q.conversation_id;
            }
            if (q.evidence_turn_ids) {
                item["evidence"] = *q.evidence_turn_ids;
            }
            qa.push_back(std::move(item));
        }
        out.push_back({{"conversation_id", conv.conversation_id},
                       {"speakers", conv.speakers},
                       {"sessions", sessions},
                       {"qa", qa}});
    }
    return out;
}

std::vector<QAItem> filter_adversarial(const std::vector<QAItem>& items) {
    std::vector<QAItem> out;
    std::copy_if(items.begin(), items.end(), std::back_inserter(out),
                 [](const QAItem& q) { return q.category != QuestionCategory::adversarial; });
    return out;
}

}  // namespace memprobe
