// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fastsae/error.hpp"

namespace fastsae::detail {

// Little-endian primitive encoding, independent of host byte order.

template <class U>
void put_le(std::ostream& os, U v) {
    static_assert(std::is_unsigned_v<U>);
    std::array<char, sizeof(U)> buf{};
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        buf[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
    }
    os.write(buf.data(), buf.size());
}

template <class U>
bool get_le(std::istream& is, U& out) {
    static_assert(std::is_unsigned_v<U>);
    std::array<unsigned char, sizeof(U)> buf{};
    is.read(reinterpret_cast<char*>(buf.data()), buf.size());
    if (is.gcount() != static_cast<std::streamsize>(buf.size())) {
        return false;
    }
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        v |= static_cast<U>(buf[i]) << (8 * i);
    }
    out = v;
    return true;
}

template <class U>
U require_le(std::istream& is, const char* what) {
    U v{};
    if (!get_le(is, v)) {
        throw FormatError(std::string("truncated input while reading ") + what);
    }
    return v;
}

inline void put_f32_array(std::ostream& os, std::span<const float> xs) {
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(xs.data()),
                 static_cast<std::streamsize>(xs.size_bytes()));
    } else {
        for (float x : xs) put_le(os, std::bit_cast<std::uint32_t>(x));
    }
}

inline bool get_f32_array(std::istream& is, std::span<float> xs) {
    if constexpr (std::endian::native == std::endian::little) {
        is.read(reinterpret_cast<char*>(xs.data()), static_cast<std::streamsize>(xs.size_bytes()));
        return is.gcount() == static_cast<std::streamsize>(xs.size_bytes());
    } else {
        for (float& x : xs) {
            std::uint32_t u{};
            if (!get_le(is, u)) return false;
            x = std::bit_cast<float>(u);
        }
        return true;
    }
}

inline void put_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

inline void expect_magic(std::istream& is, const char (&magic)[5], const char* what) {
    char got[4]{};
    is.read(got, 4);
    if (is.gcount() != 4 || std::memcmp(got, magic, 4) != 0) {
        throw FormatError(std::string("bad magic: not a ") + what + " file");
    }
}

}  // namespace fastsae::detail
