#include "pkit/jsonl.hpp"

#include <fstream>

#include "pkit/hash.hpp"

namespace pkit {

void for_each_jsonl_lenient(std::istream& in,
                            const std::function<void(json&&)>& fn,
                            std::uint64_t& skipped) {
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            ++skipped;
            continue;
        }
        fn(std::move(j));
    }
}

void for_each_jsonl_strict(std::istream& in, const std::string& source_name,
                           const std::function<void(json&&)>& fn) {
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw DataError(source_name + ":" + std::to_string(lineno) + ": malformed record");
        fn(std::move(j));
    }
}

std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

std::string hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
        if (!in) break;
    }
    return "fnv64:" + to_hex(h);
}

}  // namespace pkit
