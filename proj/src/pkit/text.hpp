#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace pkit {

std::vector<std::string> split_ws(std::string_view s);
std::string join_tokens(const std::vector<std::string>& tokens);

std::string lower_ascii(std::string_view s);
std::string trim(std::string_view s);
std::string collapse_ws(std::string_view s);

// Fraction of characters that are printable ASCII (0x20..0x7e). 0 for empty input.
double printable_ascii_ratio(std::string_view s);

// Removes markdown link/image syntax (keeps the bracket text), bare URLs,
// emphasis/code markers and quote prefixes. No regex; single scan.
std::string strip_markup(std::string_view s);

}  // namespace pkit
