#include <array>
#include <limits>
#include <random>
#include <set>

#include "memprobe/corpus.hpp"
#include "memprobe/errors.hpp"
#include "memprobe/llm/providers.hpp"
#include "memprobe/text.hpp"

namespace memprobe::synthetic {

namespace {

// Filler never contains the question words ("what", "does", "mean"), so the
// key is the only query token a chunk can share with its question.
constexpr std::array<std::string_view, 48> kFiller = {
    "garden",  "morning", "coffee",  "weekend", "train",    "river",   "painting", "music",
    "friends", "market",  "bread",   "yoga",    "evening",  "rain",    "school",   "project",
    "hiking",  "movie",   "kitchen", "letter",  "guitar",   "beach",   "museum",   "bicycle",
    "dinner",  "library", "sunset",  "puzzle",  "festival", "harbor",  "lantern",  "meadow",
    "novel",   "orchard", "pottery", "quilt",   "recipe",   "scarf",   "tea",      "umbrella",
    "village", "window",  "yarn",    "zebra",   "candle",   "journey", "notebook", "picnic",
};

// Words that reach a stored entry or a question outside the filler: turn
// templates, chunk and fact rendering, speakers and timestamps.
constexpr std::array<std::string_view, 10> kFixedWords = {
    "what", "does", "mean", "recall", "remember", "that", "means", "about", "alice", "bob",
};

// Keys and values get hash-embedder buckets of their own at this
// dimension, so a question's key can never cancel against another token.
constexpr std::size_t kReservedDimension = 1536;

constexpr std::string_view kLower = "abcdefghijklmnopqrstuvwxyz0123456789";
constexpr std::string_view kUpper = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

// mt19937_64 output is fully specified by the standard; distributions are
// not, so bounded draws are done here with rejection sampling.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    std::string token(std::string_view alphabet, std::size_t len) {
        std::string s;
        for (std::size_t i = 0; i < len; ++i) {
            s += alphabet[below(alphabet.size())];
        }
        return s;
    }

  private:
    std::mt19937_64 engine_;
};

bool has_digit(const std::string& s) {
    return s.find_first_of("0123456789") != std::string::npos;
}

bool has_letter(const std::string& s) {
    return s.find_first_not_of("0123456789") != std::string::npos;
}

std::string filler_sentence(Rng& rng) {
    const auto n = 6 + rng.below(7);
    std::string s;
    for (std::uint64_t i = 0; i < n; ++i) {
        if (i > 0) s += ' ';
        s += kFiller[rng.below(kFiller.size())];
    }
    s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s + ".";
}

std::string session_timestamp(int session_index) {
    static constexpr std::array<std::string_view, 12> months = {
        "January", "February", "March", "April", "May", "June",
        "July", "August", "September", "October", "November", "December"};
    static constexpr std::array<int, 12> days = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    // One session per week from 1 May 2023.
    int month = 4;
    int year = 2023;
    int day = 1 + 7 * (session_index - 1);
    while (day > days[month]) {
        day -= days[month];
        if (++month == 12) {
            month = 0;
            ++year;
        }
    }
    return "10:00 am on " + std::to_string(day) + " " + std::string(months[month]) + ", " + std::to_string(year);
}

}  // namespace

CorpusRecord generate(const Options& opt) {
    if (opt.n_sessions < 1 || opt.turns_per_session < 1 || opt.n_questions < 1) {
        throw ArgumentError("synthetic corpus counts must all be >= 1");
    }
    const auto total = static_cast<std::size_t>(opt.n_sessions) * static_cast<std::size_t>(opt.turns_per_session);
    if (static_cast<std::size_t>(opt.n_questions) > total) {
        throw ArgumentError("n_questions (" + std::to_string(opt.n_questions) + ") exceeds total turns (" +
                            std::to_string(total) + ")");
    }

    Rng rng(opt.seed);
    CorpusRecord rec;
    auto& conv = rec.conversation;
    conv.conversation_id = "synth-" + std::to_string(opt.seed);
    conv.speakers = {"Alice", "Bob"};

    // Partial Fisher-Yates: the first n_questions slots are the planted turns.
    std::vector<std::size_t> slots(total);
    for (std::size_t i = 0; i < total; ++i) slots[i] = i;
    for (std::size_t i = 0; i < static_cast<std::size_t>(opt.n_questions); ++i) {
        std::swap(slots[i], slots[i + rng.below(total - i)]);
    }

    std::set<std::string> used;
    std::set<std::size_t> taken_buckets;
    auto reserve_bucket = [&](std::string_view token) {
        return taken_buckets.insert(llm::hash_bucket(text::to_lower(token), kReservedDimension)).second;
    };
    for (auto w : kFixedWords) reserve_bucket(w);
    for (auto w : kFiller) reserve_bucket(w);
    for (int s = 1; s <= opt.n_sessions; ++s) {
        for (const auto& t : text::tokenize(session_timestamp(s))) reserve_bucket(t);
    }
    std::vector<std::pair<std::string, std::string>> plants;  // key, value per question
    for (int q = 0; q < opt.n_questions; ++q) {
        std::string key;
        do {
            key = "k" + rng.token(kLower, 9);
        } while (!has_digit(key) || used.count(key) || !reserve_bucket(key));
        used.insert(key);
        std::string value;
        do {
            value = rng.token(kUpper, 12);
        } while (!has_digit(value) || !has_letter(value) || used.count(value) || !reserve_bucket(value));
        used.insert(value);
        plants.emplace_back(std::move(key), std::move(value));
    }
    std::vector<int> plant_at(total, -1);
    for (int q = 0; q < opt.n_questions; ++q) {
        plant_at[slots[q]] = q;
    }

    std::vector<std::string> turn_ids(total);
    for (int s = 0; s < opt.n_sessions; ++s) {
        Session session;
        session.session_index = s + 1;
        session.timestamp = session_timestamp(s + 1);
        for (int t = 0; t < opt.turns_per_session; ++t) {
            const auto flat = static_cast<std::size_t>(s) * opt.turns_per_session + t;
            Turn turn;
            turn.session_index = s + 1;
            turn.speaker = conv.speakers[t % 2];
            turn.turn_id = conv.conversation_id + ":" + std::to_string(s + 1) + ":" + std::to_string(t + 1);
            turn.text = filler_sentence(rng);
            if (plant_at[flat] >= 0) {
                const auto& [key, value] = plants[plant_at[flat]];
                turn.text += " Remember that " + key + " means " + value + ". " + filler_sentence(rng);
            }
            turn_ids[flat] = turn.turn_id;
            session.turns.push_back(std::move(turn));
        }
        conv.sessions.push_back(std::move(session));
    }

    for (int q = 0; q < opt.n_questions; ++q) {
        QAItem item;
        item.question_id = conv.conversation_id + ":q" + std::to_string(q + 1);
        item.conversation_id = conv.conversation_id;
        // The key is repeated so it dominates the query embedding.
        item.question = "What does " + plants[q].first + " mean? Recall " + plants[q].first + ".";
        item.gold_answer = plants[q].second;
        item.category = QuestionCategory::single_hop;
        item.evidence_turn_ids = std::vector<std::string>{turn_ids[slots[q]]};
        rec.qa.push_back(std::move(item));
    }
    return rec;
}

std::optional<std::string> question_key(std::string_view question) {
    constexpr std::string_view prefix = "What does ";
    if (!question.starts_with(prefix)) {
        return std::nullopt;
    }
    const auto end = question.find(" mean?", prefix.size());
    if (end == std::string_view::npos || end == prefix.size()) {
        return std::nullopt;
    }
    auto key = question.substr(prefix.size(), end - prefix.size());
    if (key.find(' ') != std::string_view::npos) {
        return std::nullopt;
    }
    return std::string(key);
}

std::optional<std::string> find_value(std::string_view text, std::string_view key) {
    const std::string needle = std::string(key) + " means ";
    auto pos = text.find(needle);
    if (pos == std::string_view::npos) {
        return std::nullopt;
    }
    pos += needle.size();
    std::size_t end = pos;
    while (end < text.size() && kUpper.find(text[end]) != std::string_view::npos) {
        ++end;
    }
    if (end == pos) {
        return std::nullopt;
    }
    return std::string(text.substr(pos, end - pos));
}

}  // namespace memprobe::synthetic
