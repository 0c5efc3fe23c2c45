// Shortest round-trip number formatting and the 64-bit FNV-1a hash.
#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>

namespace wpsle {

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

inline std::string format_hex(std::uint64_t v) {
    char buf[17];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, 16);
    std::string s(buf, end);
    return std::string(16 - s.size(), '0') + s;
}

}  // namespace wpsle
