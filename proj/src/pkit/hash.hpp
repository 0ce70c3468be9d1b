#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace pkit {

// FNV-1a, 64-bit. This is the stable hash fixed by docs/formats.md: the
// hashed-TF-IDF similarity buckets and all manifest digests depend on it,
// so it must never change.
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t h = seed;
    for (unsigned char c : s) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string to_hex(std::uint64_t v);

// Digest of a whole file, "fnv64:<hex>". Throws std::runtime_error if unreadable.
std::string hash_file(const std::string& path);

}  // namespace pkit
