#include "memprobe/llm/types.hpp"

#include <cmath>

#include "memprobe/errors.hpp"
#include "memprobe/llm/digest.hpp"

namespace memprobe::llm {

using nlohmann::json;

std::string_view to_string(Role r) {
    return r == Role::system ? "system" : "user";
}

ChatRequest user_request(std::string model_id, std::string prompt, bool json_mode) {
    ChatRequest req;
    req.model_id = std::move(model_id);
    req.messages.push_back({Role::user, std::move(prompt)});
    req.json_mode = json_mode;
    return req;
}

json to_json(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    return {{"model_id", request.model_id},
            {"messages", messages},
            {"json_mode", request.json_mode},
            {"temperature", request.temperature}};
}

ChatRequest chat_request_from_json(const json& j) {
    try {
        ChatRequest req;
        req.model_id = j.at("model_id").get<std::string>();
        for (const auto& m : j.at("messages")) {
            const auto role = m.at("role").get<std::string>();
            if (role != "system" && role != "user") {
                throw ParseError("unsupported chat role '" + role + "'");
            }
            req.messages.push_back({role == "system" ? Role::system : Role::user, m.at("content").get<std::string>()});
        }
        req.json_mode = j.value("json_mode", false);
        req.temperature = j.value("temperature", 0.0);
        return req;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed chat request: ") + e.what());
    }
}

std::string cache_key(const json& canonical_request) {
    // nlohmann::json objects are std::map backed, so dump() emits sorted keys.
    return sha256_hex(canonical_request.dump());
}

std::string cache_key(const ChatRequest& request) {
    return cache_key(to_json(request));
}

EmbeddingVector make_embedding(std::vector<double> values) {
    double sq = 0.0;
    for (double v : values) {
        sq += v * v;
    }
    return {std::move(values), std::sqrt(sq)};
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.values.size() != b.values.size()) {
        throw ArgumentError("embedding dimension mismatch: " + std::to_string(a.values.size()) + " vs " +
                            std::to_string(b.values.size()));
    }
    if (a.norm == 0.0 || b.norm == 0.0) {
        return 0.0;
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
    }
    return dot / (a.norm * b.norm);
}

}  // namespace memprobe::llm
