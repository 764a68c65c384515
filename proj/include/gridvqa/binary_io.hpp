#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "gridvqa/errors.hpp"

namespace gridvqa::binio {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b, 4);
}

inline void put_f32(std::ostream& os, float f) { put_u32(os, std::bit_cast<std::uint32_t>(f)); }

inline void put_string(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

// Returns false on clean EOF before the first byte; throws on a partial read.
inline bool get_u32(std::istream& is, std::uint32_t& v, const char* what, bool eof_ok = false) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (is.gcount() == 0 && eof_ok) return false;
    if (is.gcount() != 4) throw ParseError(std::string("truncated file reading ") + what);
    v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
        (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    return true;
}

inline float get_f32(std::istream& is, const char* what) {
    std::uint32_t v;
    get_u32(is, v, what);
    return std::bit_cast<float>(v);
}

inline std::string get_string(std::istream& is, const char* what, std::uint32_t max_len = 1u << 20) {
    std::uint32_t n;
    get_u32(is, n, what);
    if (n > max_len) throw ParseError(std::string("implausible string length reading ") + what);
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (static_cast<std::uint32_t>(is.gcount()) != n) throw ParseError(std::string("truncated file reading ") + what);
    return s;
}

inline void expect_magic(std::istream& is, const char* magic, std::size_t len, const std::string& path) {
    std::string got(len, '\0');
    is.read(got.data(), static_cast<std::streamsize>(len));
    if (static_cast<std::size_t>(is.gcount()) != len || std::memcmp(got.data(), magic, len) != 0) {
        throw ParseError(path + ": bad magic, expected \"" + std::string(magic, len) + "\"");
    }
}

}  // namespace gridvqa::binio
