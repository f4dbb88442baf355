#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "memprobe/corpus.hpp"
#include "memprobe/llm/gateway.hpp"
#include "memprobe/llm/providers.hpp"

namespace memprobe::testkit {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = fs::temp_directory_path() /
                ("memprobe-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

  private:
    fs::path path_;
};

inline std::shared_ptr<llm::Gateway> make_gateway(std::shared_ptr<llm::ChatProvider> chat, std::size_t dim = 64,
                                                  fs::path cache_dir = {}) {
    llm::GatewayOptions options;
    options.cache_dir = std::move(cache_dir);
    options.retry_backoff = std::chrono::milliseconds(1);
    return std::make_shared<llm::Gateway>(std::move(chat), std::make_shared<llm::HashEmbedder>(dim), options);
}

inline Conversation make_conversation(const std::string& id, const std::vector<int>& turns_per_session) {
    Conversation c;
    c.conversation_id = id;
    c.speakers = {"Alice", "Bob"};
    for (std::size_t s = 0; s < turns_per_session.size(); ++s) {
        Session session;
        session.session_index = static_cast<int>(s) + 1;
        session.timestamp = "day " + std::to_string(s + 1);
        for (int t = 0; t < turns_per_session[s]; ++t) {
            Turn turn;
            turn.session_index = session.session_index;
            turn.speaker = c.speakers[t % 2];
            turn.text = "session " + std::to_string(s + 1) + " line " + std::to_string(t + 1);
            turn.turn_id = id + ":" + std::to_string(s + 1) + ":" + std::to_string(t + 1);
            session.turns.push_back(turn);
        }
        c.sessions.push_back(session);
    }
    return c;
}

}  // namespace memprobe::testkit
