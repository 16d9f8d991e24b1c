#include "mtbandit/random.hpp"

#include <cmath>
#include <numbers>

namespace mtbandit {

std::uint64_t hash_label(std::string_view label) noexcept {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t combine_keys(std::uint64_t seed, std::initializer_list<std::uint64_t> labels) noexcept {
  std::uint64_t key = mix64(seed);
  for (std::uint64_t label : labels) {
    key = mix64(key ^ mix64(label + 0x632BE59BD9B4E019ULL));
  }
  return key;
}

std::uint64_t RandomStream::word(std::uint64_t counter, std::uint64_t lane) const noexcept {
  std::uint64_t x = mix64(key_ ^ mix64(counter * 2 + lane));
  return mix64(x + key_);
}

std::uint64_t RandomStream::next_u64() noexcept { return word(counter_++, 0); }

double RandomStream::uniform() noexcept {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() noexcept {
  const std::uint64_t c = counter_++;
  const double u1 = (static_cast<double>(word(c, 0) >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = (static_cast<double>(word(c, 1) >> 11) + 0.5) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t RandomStream::index(std::size_t n) noexcept {
  // Lemire's multiply-shift; the bias is below 2^-40 for the sizes used here.
  const unsigned __int128 product = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::size_t>(product >> 64);
}

}  // namespace mtbandit
