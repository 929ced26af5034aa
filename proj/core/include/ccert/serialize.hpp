#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ccert {

// Decimal with 17 significant digits; parses back to the identical double.
std::string format_double(double v);

// Little-endian IEEE-754 f64 payload, base64 encoded (RFC 4648, padded).
std::string encode_f64_base64(std::span<const double> values);
std::vector<double> decode_f64_base64(std::string_view text);

// 64-bit FNV-1a, streamed.
class Fnv1a {
 public:
  void bytes(const void* data, std::size_t len) noexcept;
  void u64(std::uint64_t v) noexcept;
  // Hashes the bit pattern, so any perturbation changes the digest.
  void f64(double v) noexcept;
  std::uint64_t digest() const noexcept { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

// Fixed-width 16 lowercase hex digits.
std::string hex_u64(std::uint64_t v);
// Throws ParseError unless `text` is exactly 16 lowercase hex digits.
std::uint64_t parse_hex_u64(std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace ccert
