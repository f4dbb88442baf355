#include "memprobe/llm/providers.hpp"

#include "memprobe/errors.hpp"
#include "memprobe/io.hpp"

namespace memprobe::llm {

using nlohmann::json;
namespace fs = std::filesystem;

ReplayChatProvider::ReplayChatProvider(fs::path fixture_dir) : dir_(std::move(fixture_dir)) {}

std::string ReplayChatProvider::complete(const ChatRequest& request) {
    const auto digest = cache_key(request);
    const auto path = dir_ / "chat" / (digest + ".json");
    if (!fs::exists(path)) {
        throw FixtureMissingError(digest);
    }
    try {
        return json::parse(io::read_file(path)).at("response").get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

ReplayEmbeddingProvider::ReplayEmbeddingProvider(fs::path fixture_dir, std::string model_id, std::size_t dimension)
    : dir_(std::move(fixture_dir)), model_id_(std::move(model_id)), dimension_(dimension) {}

std::vector<std::vector<double>> ReplayEmbeddingProvider::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    for (const auto& t : texts) {
        const auto digest = cache_key(json{{"model", model_id_}, {"dimension", dimension_}, {"text", t}});
        const auto path = dir_ / "embed" / (digest + ".json");
        if (!fs::exists(path)) {
            throw FixtureMissingError(digest);
        }
        try {
            out.push_back(json::parse(io::read_file(path)).at("values").get<std::vector<double>>());
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ": " + e.what());
        }
    }
    return out;
}

ScriptedChatProvider::ScriptedChatProvider(Handler handler) : handler_(std::move(handler)) {}

void ScriptedChatProvider::enqueue(std::string reply) {
    std::lock_guard lock(mutex_);
    queue_.push_back(std::move(reply));
}

std::string ScriptedChatProvider::complete(const ChatRequest& request) {
    ++calls_;
    std::unique_lock lock(mutex_);
    seen_.push_back(request);
    if (!queue_.empty()) {
        auto reply = std::move(queue_.front());
        queue_.pop_front();
        return reply;
    }
    lock.unlock();
    if (!handler_) {
        throw ProviderError("scripted provider has no reply queued");
    }
    return handler_(request);
}

std::vector<ChatRequest> ScriptedChatProvider::requests() const {
    std::lock_guard lock(mutex_);
    return seen_;
}

}  // namespace memprobe::llm
