#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace memprobe::llm {

enum class Role { system, user };

std::string_view to_string(Role r);

struct ChatMessage {
    Role role = Role::user;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string model_id;
    std::vector<ChatMessage> messages;
    bool json_mode = false;
    double temperature = 0.0;

    bool operator==(const ChatRequest&) const = default;
};

/// Single user-message request, the shape every catalog prompt uses.
ChatRequest user_request(std::string model_id, std::string prompt, bool json_mode);

nlohmann::json to_json(const ChatRequest& request);
ChatRequest chat_request_from_json(const nlohmann::json& j);

/// Content digest of the request: SHA-256 over the canonical JSON form
/// (object keys sorted, no insignificant whitespace).
std::string cache_key(const ChatRequest& request);
std::string cache_key(const nlohmann::json& canonical_request);

struct EmbeddingVector {
    std::vector<double> values;
    double norm = 0.0;

    std::size_t dimension() const { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

EmbeddingVector make_embedding(std::vector<double> values);

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace memprobe::llm
