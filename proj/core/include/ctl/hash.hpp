#pragma once

#include <cstdint>
#include <string>

namespace ctl {

// 64-bit FNV-1a over a byte string
inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

// 16 lowercase hex digits, used for content-addressed filenames and ids
inline std::string hex_digest(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

inline std::string content_digest(const std::string& bytes) { return hex_digest(fnv1a(bytes)); }

}  // namespace ctl
