#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace mtbandit {

/// Stable 64-bit hash of a label (FNV-1a). Used to turn stream names into keys.
std::uint64_t hash_label(std::string_view label) noexcept;

/// Bijective 64-bit finalizer (splitmix64 variant).
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Folds a sequence of words into one key. Order matters.
std::uint64_t combine_keys(std::uint64_t seed, std::initializer_list<std::uint64_t> labels) noexcept;

/// Counter-based random stream.
///
/// A stream is identified by a 64-bit key derived from (seed, labels...). The
/// i-th draw is a pure function of (key, i), so two streams built from the same
/// labels produce the same sequence on any thread and in any order of creation.
/// Every public draw advances the counter by exactly one.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::initializer_list<std::uint64_t> labels) noexcept
      : key_(combine_keys(seed, labels)) {}

  explicit RandomStream(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t next_u64() noexcept;
  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;
  /// Standard normal via Box-Muller on two words derived from one counter step.
  double normal() noexcept;
  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n) noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t draws() const noexcept { return counter_; }

 private:
  std::uint64_t word(std::uint64_t counter, std::uint64_t lane) const noexcept;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mtbandit
