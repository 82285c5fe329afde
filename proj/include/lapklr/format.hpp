#pragma once

// Text/binary encoding helpers shared by the model, feature and report files.
// Doubles in text use the shortest representation that round-trips exactly;
// binary payloads are little-endian IEEE-754 float64.

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>

#include "lapklr/error.hpp"

namespace lapklr {

/// Plain decimal for moderate magnitudes, scientific otherwise.
inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    const double a = v < 0 ? -v : v;
    const auto fmt = (a == 0.0 || (a >= 1e-5 && a < 1e16)) ? std::chars_format::fixed : std::chars_format::general;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, fmt);
    return std::string(buf.data(), res.ptr);
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

/// Parse a whole token as a double; nullopt-style failure reported via bool.
inline bool parse_double(std::string_view s, double& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline bool parse_int(std::string_view s, long long& out) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline void write_f64_le(std::ostream& os, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    std::array<char, 8> bytes{};
    for (int i = 0; i < 8; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    os.write(bytes.data(), 8);
}

inline double read_f64_le(std::istream& is) {
    std::array<unsigned char, 8> bytes{};
    if (!is.read(reinterpret_cast<char*>(bytes.data()), 8))
        throw DataError("unexpected end of binary payload");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[static_cast<std::size_t>(i)]) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace lapklr
