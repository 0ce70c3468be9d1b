#include "pkit/text.hpp"

#include <cctype>

namespace pkit {

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) out.emplace_back(s.substr(start, i - start));
    }
    return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string collapse_ws(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_ws = true;  // also trims leading whitespace
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_ws = true;
        } else {
            if (in_ws && !out.empty()) out += ' ';
            out += c;
            in_ws = false;
        }
    }
    return out;
}

double printable_ascii_ratio(std::string_view s) {
    if (s.empty()) return 0.0;
    std::size_t printable = 0;
    for (unsigned char c : s)
        if (c >= 0x20 && c <= 0x7e) ++printable;
    return static_cast<double>(printable) / static_cast<double>(s.size());
}

namespace {

bool starts_with_url(std::string_view s, std::size_t i) {
    return s.substr(i).starts_with("http://") || s.substr(i).starts_with("https://") ||
           s.substr(i).starts_with("www.");
}

std::size_t skip_nonspace(std::string_view s, std::size_t i) {
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    return i;
}

}  // namespace

std::string strip_markup(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool at_line_start = true;
    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (c == '\n') {
            out += ' ';
            at_line_start = true;
            ++i;
            continue;
        }
        if (at_line_start && (c == '>' || c == '#')) {  // quote / heading marker
            ++i;
            continue;
        }
        if (!std::isspace(static_cast<unsigned char>(c))) at_line_start = false;
        if (starts_with_url(s, i)) {
            i = skip_nonspace(s, i);
            continue;
        }
        if (c == '!' && i + 1 < s.size() && s[i + 1] == '[') {  // image: treat as link
            ++i;
            continue;
        }
        if (c == '[') {
            // [text](url) -> text ; leave a lone bracket alone
            std::size_t close = s.find(']', i + 1);
            if (close != std::string_view::npos && close + 1 < s.size() && s[close + 1] == '(') {
                std::size_t paren = s.find(')', close + 2);
                if (paren != std::string_view::npos) {
                    out += std::string(s.substr(i + 1, close - i - 1));
                    i = paren + 1;
                    continue;
                }
            }
        }
        if (c == '*' || c == '`' || c == '~') {
            ++i;
            continue;
        }
        out += c;
        ++i;
    }
    return out;
}

}  // namespace pkit
