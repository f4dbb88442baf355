#pragma once

#include <string>
#include <string_view>

namespace memprobe::llm {

std::string sha256_hex(std::string_view data);

}  // namespace memprobe::llm
