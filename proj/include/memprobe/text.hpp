#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace memprobe::text {

/// Lowercases ASCII, splits on every maximal run of non-alphanumeric
/// characters and drops empty tokens. No stemming, no stopwords.
/// Bytes >= 0x80 are treated as separators.
std::vector<std::string> tokenize(std::string_view text);

std::string trim(std::string_view s);

std::string to_lower(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Replaces each `{name}` whose name is a key of `values` in one left-to-right
/// pass. Other braces are copied through, and substituted text is never
/// rescanned.
template <typename Map>
std::string render_template(std::string_view tmpl, const Map& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            auto close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                std::string key(tmpl.substr(i + 1, close - i - 1));
                auto it = values.find(key);
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

}  // namespace memprobe::text
