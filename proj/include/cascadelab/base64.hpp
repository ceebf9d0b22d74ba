#pragma once

#include <string>
#include <vector>

namespace cascadelab {

/// Base64 of the little-endian bytes of 64-bit floats; the decode is
/// bit-exact. Used by every on-disk parameter block.
std::string base64_encode_doubles(const std::vector<double>& values);
std::vector<double> base64_decode_doubles(const std::string& text);

}  // namespace cascadelab
