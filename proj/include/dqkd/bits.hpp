#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dqkd {

/// One bit per element, each 0 or 1.
using BitString = std::vector<std::uint8_t>;

/// Packs bits MSB-first into bytes and renders lowercase hex. A trailing
/// partial byte is zero-padded on the right.
inline std::string to_hex(const BitString& bits) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve((bits.size() + 7) / 8 * 2);
  for (std::size_t i = 0; i < bits.size(); i += 8) {
    unsigned byte = 0;
    for (std::size_t j = 0; j < 8; ++j) {
      byte <<= 1;
      if (i + j < bits.size()) byte |= bits[i + j] & 1u;
    }
    out.push_back(kDigits[byte >> 4]);
    out.push_back(kDigits[byte & 0xf]);
  }
  return out;
}

/// Inverse of to_hex for a known bit length.
inline BitString from_hex(std::string_view hex, std::size_t n_bits) {
  if (hex.size() != (n_bits + 7) / 8 * 2) throw std::invalid_argument("from_hex: length mismatch");
  BitString bits(n_bits);
  for (std::size_t i = 0; i < n_bits; ++i) {
    const char c = hex[i / 4];
    int v;
    if (c >= '0' && c <= '9') v = c - '0';
    else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
    else throw std::invalid_argument("from_hex: bad digit");
    bits[i] = static_cast<std::uint8_t>((v >> (3 - i % 4)) & 1);
  }
  return bits;
}

inline std::size_t hamming_distance(const BitString& a, const BitString& b) {
  if (a.size() != b.size()) throw std::invalid_argument("hamming_distance: length mismatch");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] != b[i]);
  return d;
}

}  // namespace dqkd
