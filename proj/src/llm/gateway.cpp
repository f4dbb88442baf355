#include "memprobe/llm/gateway.hpp"

#include <cmath>
#include <thread>

#include <spdlog/spdlog.h>

#include "memprobe/errors.hpp"
#include "memprobe/io.hpp"
#include "memprobe/llm/digest.hpp"
#include "memprobe/text.hpp"

namespace memprobe::llm {

using nlohmann::json;
namespace fs = std::filesystem;

json CallCounters::to_json() const {
    return {{"chat_requests", chat_requests},
            {"chat_cache_hits", chat_cache_hits},
            {"chat_provider_calls", chat_provider_calls},
            {"json_retries", json_retries},
            {"embed_texts", embed_texts},
            {"embed_cache_hits", embed_cache_hits},
            {"embed_provider_calls", embed_provider_calls}};
}

std::optional<std::string> extract_json_text(std::string_view completion) {
    auto parses = [](std::string_view s) { return json::accept(s); };
    if (parses(completion)) {
        return std::string(completion);
    }
    auto open = completion.find("```");
    if (open != std::string_view::npos) {
        auto body_start = completion.find('\n', open);
        auto close = completion.rfind("```");
        if (body_start != std::string_view::npos && close > body_start) {
            auto body = text::trim(completion.substr(body_start + 1, close - body_start - 1));
            if (parses(body)) {
                return body;
            }
        }
    }
    return std::nullopt;
}

Gateway::Gateway(std::shared_ptr<ChatProvider> chat, std::shared_ptr<EmbeddingProvider> embedder,
                 GatewayOptions options)
    : chat_(std::move(chat)),
      embedder_(std::move(embedder)),
      options_(std::move(options)),
      in_flight_(std::clamp(options_.max_in_flight, 1, 1024)) {
    if (!chat_ || !embedder_) {
        throw ArgumentError("gateway needs both a chat provider and an embedder");
    }
}

std::optional<std::string> Gateway::cache_lookup_chat(const std::string& digest) {
    if (auto it = chat_cache_.find(digest); it != chat_cache_.end()) {
        return it->second;
    }
    if (options_.cache_dir.empty()) {
        return std::nullopt;
    }
    auto path = options_.cache_dir / "chat" / (digest + ".json");
    if (!fs::exists(path)) {
        return std::nullopt;
    }
    try {
        auto record = json::parse(io::read_file(path));
        auto response = record.at("response").get<std::string>();
        chat_cache_.emplace(digest, response);
        return response;
    } catch (const std::exception& e) {
        spdlog::warn("ignoring unreadable cache record {}: {}", path.string(), e.what());
        return std::nullopt;
    }
}

void Gateway::cache_store_chat(const std::string& digest, const ChatRequest& request, const std::string& response) {
    if (!options_.cache_dir.empty()) {
        json record = {{"digest", digest}, {"request", to_json(request)}, {"response", response}};
        io::write_file_atomic(options_.cache_dir / "chat" / (digest + ".json"), record.dump(2));
    }
    std::lock_guard lock(mutex_);
    chat_cache_[digest] = response;
}

std::string Gateway::chat(const ChatRequest& request) {
    if (request.messages.empty()) {
        throw ArgumentError("chat request has no messages");
    }
    for (const auto& m : request.messages) {
        if (m.content.empty()) {
            throw ArgumentError("chat request has an empty message");
        }
    }
    const auto digest = cache_key(request);

    std::promise<std::string> promise;
    std::shared_future<std::string> waiter;
    {
        std::lock_guard lock(mutex_);
        ++counters_.chat_requests;
        digests_.insert(digest);
        if (auto hit = cache_lookup_chat(digest)) {
            ++counters_.chat_cache_hits;
            return *hit;
        }
        if (auto it = pending_.find(digest); it != pending_.end()) {
            ++counters_.chat_cache_hits;
            waiter = it->second;
        } else {
            pending_.emplace(digest, promise.get_future().share());
        }
    }
    if (waiter.valid()) {
        return waiter.get();
    }

    try {
        auto response = chat_uncached(request);
        cache_store_chat(digest, request, response);
        promise.set_value(response);
        std::lock_guard lock(mutex_);
        pending_.erase(digest);
        return response;
    } catch (...) {
        promise.set_exception(std::current_exception());
        std::lock_guard lock(mutex_);
        pending_.erase(digest);
        throw;
    }
}

std::string Gateway::call_provider(const ChatRequest& request) {
    for (int attempt = 0;; ++attempt) {
        try {
            in_flight_.acquire();
            struct Release {
                std::counting_semaphore<1024>& s;
                ~Release() { s.release(); }
            } release{in_flight_};
            {
                std::lock_guard lock(mutex_);
                ++counters_.chat_provider_calls;
            }
            return chat_->complete(request);
        } catch (const TransportError& e) {
            if (attempt >= options_.max_transport_retries) {
                throw ProviderError(std::string("provider failed after ") + std::to_string(attempt + 1) +
                                    " attempts: " + e.what());
            }
            spdlog::warn("transient provider failure (attempt {}): {}", attempt + 1, e.what());
            std::this_thread::sleep_for(options_.retry_backoff * (1 << attempt));
        }
    }
}

std::string Gateway::chat_uncached(const ChatRequest& request) {
    auto reply = call_provider(request);
    if (!request.json_mode) {
        return reply;
    }
    if (auto parsed = extract_json_text(reply)) {
        return *parsed;
    }
    ChatRequest retry = request;
    retry.messages.push_back({Role::user, "Return only valid JSON."});
    {
        std::lock_guard lock(mutex_);
        ++counters_.json_retries;
    }
    auto second = call_provider(retry);
    if (auto parsed = extract_json_text(second)) {
        return *parsed;
    }
    throw StructuredOutputError("model returned invalid JSON twice for request " + cache_key(request));
}

std::string Gateway::embed_key(const std::string& text) const {
    json key = {{"model", embedder_->model_id()}, {"dimension", embedder_->dimension()}, {"text", text}};
    return cache_key(key);
}

std::vector<EmbeddingVector> Gateway::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) {
        throw ArgumentError("embed needs at least one text");
    }
    for (const auto& t : texts) {
        if (t.empty()) {
            throw ArgumentError("cannot embed an empty text");
        }
    }
    const auto dim = embedder_->dimension();
    std::vector<std::optional<EmbeddingVector>> out(texts.size());
    std::vector<std::string> keys(texts.size());
    std::vector<std::string> missing;
    std::map<std::string, std::vector<std::size_t>> missing_slots;

    {
        std::lock_guard lock(mutex_);
        counters_.embed_texts += texts.size();
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
        keys[i] = embed_key(texts[i]);
        std::unique_lock lock(mutex_);
        if (auto it = embed_cache_.find(keys[i]); it != embed_cache_.end()) {
            out[i] = it->second;
            ++counters_.embed_cache_hits;
            continue;
        }
        lock.unlock();
        if (!options_.cache_dir.empty()) {
            auto path = options_.cache_dir / "embed" / (keys[i] + ".json");
            if (fs::exists(path)) {
                try {
                    auto rec = json::parse(io::read_file(path));
                    auto vec = make_embedding(rec.at("values").get<std::vector<double>>());
                    lock.lock();
                    embed_cache_.emplace(keys[i], vec);
                    ++counters_.embed_cache_hits;
                    out[i] = std::move(vec);
                    continue;
                } catch (const std::exception& e) {
                    spdlog::warn("ignoring unreadable cache record {}: {}", path.string(), e.what());
                }
            }
        }
        auto& slots = missing_slots[texts[i]];
        if (slots.empty()) {
            missing.push_back(texts[i]);
        }
        slots.push_back(i);
    }

    if (!missing.empty()) {
        std::vector<std::vector<double>> fresh;
        for (int attempt = 0;; ++attempt) {
            try {
                in_flight_.acquire();
                struct Release {
                    std::counting_semaphore<1024>& s;
                    ~Release() { s.release(); }
                } release{in_flight_};
                {
                    std::lock_guard lock(mutex_);
                    ++counters_.embed_provider_calls;
                }
                fresh = embedder_->embed(missing);
                break;
            } catch (const TransportError& e) {
                if (attempt >= options_.max_transport_retries) {
                    throw ProviderError(std::string("embedding provider failed: ") + e.what());
                }
                std::this_thread::sleep_for(options_.retry_backoff * (1 << attempt));
            }
        }
        if (fresh.size() != missing.size()) {
            throw ProviderError("embedding provider returned " + std::to_string(fresh.size()) + " vectors for " +
                                std::to_string(missing.size()) + " texts");
        }
        for (std::size_t m = 0; m < missing.size(); ++m) {
            if (fresh[m].size() != dim) {
                throw ProviderError("embedding dimension " + std::to_string(fresh[m].size()) + " != configured " +
                                    std::to_string(dim));
            }
            for (double v : fresh[m]) {
                if (!std::isfinite(v)) {
                    throw ProviderError("embedding contains a non-finite value");
                }
            }
            auto vec = make_embedding(std::move(fresh[m]));
            const auto key = embed_key(missing[m]);
            if (!options_.cache_dir.empty()) {
                json rec = {{"digest", key}, {"model", embedder_->model_id()}, {"text", missing[m]}, {"values", vec.values}};
                io::write_file_atomic(options_.cache_dir / "embed" / (key + ".json"), rec.dump());
            }
            {
                std::lock_guard lock(mutex_);
                embed_cache_[key] = vec;
            }
            for (auto slot : missing_slots[missing[m]]) {
                out[slot] = vec;
            }
        }
    }

    std::vector<EmbeddingVector> result;
    result.reserve(out.size());
    for (auto& v : out) {
        result.push_back(std::move(*v));
    }
    return result;
}

EmbeddingVector Gateway::embed_one(const std::string& text) {
    return embed({text}).front();
}

CallCounters Gateway::counters() const {
    std::lock_guard lock(mutex_);
    return counters_;
}

std::vector<std::string> Gateway::chat_digests() const {
    std::lock_guard lock(mutex_);
    return {digests_.begin(), digests_.end()};
}

}  // namespace memprobe::llm
