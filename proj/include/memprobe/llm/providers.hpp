#pragma once

#include <atomic>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "memprobe/llm/types.hpp"

namespace memprobe::llm {

class ChatProvider {
  public:
    virtual ~ChatProvider() = default;
    /// Raw completion text. Retryable failures throw TransportError.
    virtual std::string complete(const ChatRequest& request) = 0;
};

class EmbeddingProvider {
  public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string model_id() const = 0;
    virtual std::size_t dimension() const = 0;
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

/// Serves recorded completions from a directory laid out like the gateway
/// cache (`chat/{digest}.json`). Misses raise FixtureMissingError.
class ReplayChatProvider : public ChatProvider {
  public:
    explicit ReplayChatProvider(std::filesystem::path fixture_dir);
    std::string complete(const ChatRequest& request) override;

  private:
    std::filesystem::path dir_;
};

class ReplayEmbeddingProvider : public EmbeddingProvider {
  public:
    ReplayEmbeddingProvider(std::filesystem::path fixture_dir, std::string model_id, std::size_t dimension);
    std::string model_id() const override { return model_id_; }
    std::size_t dimension() const override { return dimension_; }
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

  private:
    std::filesystem::path dir_;
    std::string model_id_;
    std::size_t dimension_;
};

/// Test double driven by a handler function or a queue of scripted replies.
/// Counts every call.
class ScriptedChatProvider : public ChatProvider {
  public:
    using Handler = std::function<std::string(const ChatRequest&)>;

    ScriptedChatProvider() = default;
    explicit ScriptedChatProvider(Handler handler);

    /// Queued replies take precedence over the handler.
    void enqueue(std::string reply);
    std::string complete(const ChatRequest& request) override;

    int calls() const { return calls_.load(); }
    std::vector<ChatRequest> requests() const;

  private:
    Handler handler_;
    mutable std::mutex mutex_;
    std::deque<std::string> queue_;
    std::vector<ChatRequest> seen_;
    std::atomic<int> calls_{0};
};

/// Deterministic feature-hashing embedder used offline and in tests.
class HashEmbedder : public EmbeddingProvider {
  public:
    explicit HashEmbedder(std::size_t dimension = 1536) : dimension_(dimension) {}
    std::string model_id() const override { return "hash-" + std::to_string(dimension_); }
    std::size_t dimension() const override { return dimension_; }
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

    int calls() const { return calls_.load(); }

  private:
    std::size_t dimension_;
    std::atomic<int> calls_{0};
};

/// Tokenizes, hashes each token into one of `d` buckets with a signed
/// 64-bit FNV-1a hash, accumulates and L2-normalizes. A text with no tokens
/// maps to the unit vector on axis 0. Requires d >= 2.
EmbeddingVector hash_embed(std::string_view text, std::size_t d);

/// Bucket a single (already lowercased) token lands in under hash_embed.
std::size_t hash_bucket(std::string_view token, std::size_t d);

struct LiveProviderConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key_env = "OPENAI_API_KEY";
    std::string embedding_model = "text-embedding-3-small";
    std::size_t embedding_dimension = 1536;
    int timeout_seconds = 120;
    /// Some reasoning models reject an explicit temperature.
    bool send_temperature = true;
};

/// OpenAI-compatible `/chat/completions` and `/embeddings` client.
class LiveProvider : public ChatProvider, public EmbeddingProvider {
  public:
    explicit LiveProvider(LiveProviderConfig config);
    std::string complete(const ChatRequest& request) override;

    std::string model_id() const override { return config_.embedding_model; }
    std::size_t dimension() const override { return config_.embedding_dimension; }
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

    /// Request bodies, exposed for wire-format tests.
    static nlohmann::json chat_body(const ChatRequest& request, bool send_temperature);
    static nlohmann::json embedding_body(const std::string& model, const std::vector<std::string>& texts);

  private:
    std::string post(const std::string& endpoint, const nlohmann::json& body);

    LiveProviderConfig config_;
    std::string api_key_;
};

}  // namespace memprobe::llm
