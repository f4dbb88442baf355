#include "memprobe/llm/digest.hpp"

#include <array>
#include <cstdio>

#include <openssl/sha.h>

namespace memprobe::llm {

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, SHA256_DIGEST_LENGTH> md{};
    SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), md.data());
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(md.size() * 2);
    for (auto b : md) {
        out += hex[b >> 4];
        out += hex[b & 0x0f];
    }
    return out;
}

}  // namespace memprobe::llm
