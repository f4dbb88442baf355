#include <cstdlib>

#include <httplib.h>

#include "memprobe/errors.hpp"
#include "memprobe/llm/providers.hpp"

namespace memprobe::llm {

using nlohmann::json;

namespace {

struct BaseUrl {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path prefix such as "/v1"
};

BaseUrl split_base_url(const std::string& url) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) {
        throw ArgumentError("base_url must include a scheme: " + url);
    }
    auto path = url.find('/', scheme + 3);
    BaseUrl out;
    out.origin = url.substr(0, path);
    out.prefix = path == std::string::npos ? "" : url.substr(path);
    while (!out.prefix.empty() && out.prefix.back() == '/') {
        out.prefix.pop_back();
    }
    return out;
}

}  // namespace

LiveProvider::LiveProvider(LiveProviderConfig config) : config_(std::move(config)) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw ProviderError("environment variable " + config_.api_key_env + " is not set");
    }
    api_key_ = key;
}

json LiveProvider::chat_body(const ChatRequest& request, bool send_temperature) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    json body = {{"model", request.model_id}, {"messages", messages}};
    if (send_temperature) {
        body["temperature"] = request.temperature;
    }
    if (request.json_mode) {
        body["response_format"] = {{"type", "json_object"}};
    }
    return body;
}

json LiveProvider::embedding_body(const std::string& model, const std::vector<std::string>& texts) {
    return {{"model", model}, {"input", texts}};
}

std::string LiveProvider::post(const std::string& endpoint, const json& body) {
    const auto base = split_base_url(config_.base_url);
    httplib::Client client(base.origin);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_bearer_token_auth(api_key_);
    auto res = client.Post(base.prefix + endpoint, body.dump(), "application/json");
    if (!res) {
        throw TransportError("request to " + endpoint + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 429 || res->status >= 500) {
        throw TransportError("HTTP " + std::to_string(res->status) + " from " + endpoint);
    }
    if (res->status != 200) {
        throw ProviderError("HTTP " + std::to_string(res->status) + " from " + endpoint + ": " + res->body);
    }
    return res->body;
}

std::string LiveProvider::complete(const ChatRequest& request) {
    const auto raw = post("/chat/completions", chat_body(request, config_.send_temperature));
    try {
        const auto doc = json::parse(raw);
        const auto& content = doc.at("choices").at(0).at("message").at("content");
        return content.is_null() ? std::string() : content.get<std::string>();
    } catch (const json::exception& e) {
        throw ProviderError(std::string("unexpected chat response shape: ") + e.what());
    }
}

std::vector<std::vector<double>> LiveProvider::embed(const std::vector<std::string>& texts) {
    const auto raw = post("/embeddings", embedding_body(config_.embedding_model, texts));
    try {
        const auto doc = json::parse(raw);
        std::vector<std::vector<double>> out(texts.size());
        for (const auto& item : doc.at("data")) {
            const auto index = item.at("index").get<std::size_t>();
            if (index >= out.size()) {
                throw ProviderError("embedding index out of range");
            }
            out[index] = item.at("embedding").get<std::vector<double>>();
        }
        return out;
    } catch (const json::exception& e) {
        throw ProviderError(std::string("unexpected embedding response shape: ") + e.what());
    }
}

}  // namespace memprobe::llm
