#include "cascadelab/base64.hpp"

#include <array>
#include <cstdint>
#include <cstring>

#include "cascadelab/errors.hpp"

namespace cascadelab {

namespace {
constexpr const char* kAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode_doubles(const std::vector<double>& values) {
    std::vector<unsigned char> bytes(values.size() * sizeof(double));
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &values[i], sizeof(bits));
        for (int b = 0; b < 8; ++b) {
            bytes[i * 8 + static_cast<std::size_t>(b)] =
                static_cast<unsigned char>((bits >> (8 * b)) & 0xFF);
        }
    }
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < bytes.size(); i += 3) {
        std::uint32_t chunk = static_cast<std::uint32_t>(bytes[i]) << 16;
        int have = 1;
        if (i + 1 < bytes.size()) {
            chunk |= static_cast<std::uint32_t>(bytes[i + 1]) << 8;
            have = 2;
        }
        if (i + 2 < bytes.size()) {
            chunk |= bytes[i + 2];
            have = 3;
        }
        out.push_back(kAlphabet[(chunk >> 18) & 0x3F]);
        out.push_back(kAlphabet[(chunk >> 12) & 0x3F]);
        out.push_back(have >= 2 ? kAlphabet[(chunk >> 6) & 0x3F] : '=');
        out.push_back(have >= 3 ? kAlphabet[chunk & 0x3F] : '=');
    }
    return out;
}

std::vector<double> base64_decode_doubles(const std::string& text) {
    std::array<int, 256> table;
    table.fill(-1);
    for (int i = 0; i < 64; ++i) table[static_cast<unsigned char>(kAlphabet[i])] = i;
    std::vector<unsigned char> bytes;
    bytes.reserve(text.size() / 4 * 3);
    std::uint32_t chunk = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=') break;
        const int v = table[static_cast<unsigned char>(c)];
        if (v < 0) throw ParseError("invalid base64 character");
        chunk = (chunk << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            bytes.push_back(static_cast<unsigned char>((chunk >> bits) & 0xFF));
        }
    }
    if (bytes.size() % sizeof(double) != 0) {
        throw ParseError("base64 payload is not a whole number of 64-bit values");
    }
    std::vector<double> values(bytes.size() / sizeof(double));
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t word = 0;
        for (int b = 7; b >= 0; --b) {
            word = (word << 8) | bytes[i * 8 + static_cast<std::size_t>(b)];
        }
        std::memcpy(&values[i], &word, sizeof(word));
    }
    return values;
}

}  // namespace cascadelab
