#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "memprobe/llm/providers.hpp"
#include "memprobe/llm/types.hpp"

namespace memprobe::llm {

struct GatewayOptions {
    /// Content-addressed cache root (`chat/`, `embed/`). Empty keeps the
    /// cache in memory only.
    std::filesystem::path cache_dir;
    int max_in_flight = 8;
    int max_transport_retries = 3;
    std::chrono::milliseconds retry_backoff{250};
};

/// Logical counts are stable across warm and cold caches; provider counts
/// are the calls that actually left the process.
struct CallCounters {
    std::uint64_t chat_requests = 0;
    std::uint64_t chat_cache_hits = 0;
    std::uint64_t chat_provider_calls = 0;
    std::uint64_t json_retries = 0;
    std::uint64_t embed_texts = 0;
    std::uint64_t embed_cache_hits = 0;
    std::uint64_t embed_provider_calls = 0;

    nlohmann::json to_json() const;
};

/// Thread-safe front door to chat and embedding providers with caching.
///
/// Identical concurrent requests are coalesced so a provider sees each digest
/// at most once per gateway. When `json_mode` is set, a reply that does not
/// parse triggers one re-prompt with "Return only valid JSON." appended; a
/// second failure raises StructuredOutputError.
class Gateway {
  public:
    Gateway(std::shared_ptr<ChatProvider> chat, std::shared_ptr<EmbeddingProvider> embedder,
            GatewayOptions options = {});

    std::string chat(const ChatRequest& request);

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);
    EmbeddingVector embed_one(const std::string& text);

    std::size_t embedding_dimension() const { return embedder_->dimension(); }
    std::string embedding_model() const { return embedder_->model_id(); }

    CallCounters counters() const;
    /// Every chat digest requested so far, sorted.
    std::vector<std::string> chat_digests() const;

  private:
    std::string chat_uncached(const ChatRequest& request);
    std::string call_provider(const ChatRequest& request);
    std::optional<std::string> cache_lookup_chat(const std::string& digest);
    void cache_store_chat(const std::string& digest, const ChatRequest& request, const std::string& response);
    std::string embed_key(const std::string& text) const;

    std::shared_ptr<ChatProvider> chat_;
    std::shared_ptr<EmbeddingProvider> embedder_;
    GatewayOptions options_;
    std::counting_semaphore<1024> in_flight_;

    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::string> chat_cache_;
    std::unordered_map<std::string, EmbeddingVector> embed_cache_;
    std::unordered_map<std::string, std::shared_future<std::string>> pending_;
    std::set<std::string> digests_;
    CallCounters counters_;
};

/// Extracts the JSON document from a completion, tolerating a surrounding
/// ```json fence. Returns nullopt when nothing parses.
std::optional<std::string> extract_json_text(std::string_view completion);

}  // namespace memprobe::llm
