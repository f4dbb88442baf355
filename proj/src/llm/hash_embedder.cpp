#include <cmath>
#include <cstdint>

#include "memprobe/errors.hpp"
#include "memprobe/llm/providers.hpp"
#include "memprobe/text.hpp"

namespace memprobe::llm {

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

std::size_t hash_bucket(std::string_view token, std::size_t d) {
    if (d < 1) {
        throw ArgumentError("hash bucket needs d >= 1");
    }
    return static_cast<std::size_t>(fnv1a(token) % d);
}

EmbeddingVector hash_embed(std::string_view input, std::size_t d) {
    if (d < 2) {
        throw ArgumentError("hash embedder dimension must be >= 2");
    }
    std::vector<double> values(d, 0.0);
    for (const auto& token : text::tokenize(input)) {
        const auto h = fnv1a(token);
        values[h % d] += (h >> 63) ? -1.0 : 1.0;
    }
    double sq = 0.0;
    for (double v : values) {
        sq += v * v;
    }
    if (sq == 0.0) {
        // No tokens, or every bucket cancelled out.
        std::fill(values.begin(), values.end(), 0.0);
        values[0] = 1.0;
        return {std::move(values), 1.0};
    }
    const double n = std::sqrt(sq);
    for (double& v : values) {
        v /= n;
    }
    return make_embedding(std::move(values));
}

std::vector<std::vector<double>> HashEmbedder::embed(const std::vector<std::string>& texts) {
    ++calls_;
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        out.push_back(hash_embed(t, dimension_).values);
    }
    return out;
}

}  // namespace memprobe::llm
